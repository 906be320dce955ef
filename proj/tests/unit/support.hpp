#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gridscan/dataset.hpp"

namespace testing {

inline gridscan::Matrix random_matrix(std::size_t rows, std::size_t cols,
                                      std::uint64_t seed, double lo = -1.0,
                                      double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  gridscan::Matrix m(rows, cols);
  for (auto& v : m.data()) v = u(rng);
  return m;
}

inline std::vector<gridscan::Attribute> plain_attributes(std::size_t n) {
  std::vector<gridscan::Attribute> attrs;
  for (std::size_t i = 0; i < n; ++i) {
    attrs.push_back({"a" + std::to_string(i + 1), gridscan::AttributeKind::other,
                     0.0, 0.0});
  }
  return attrs;
}

/// Normalizes a random raw matrix into a point set.
inline gridscan::OperatingPointSet random_points(std::size_t rows,
                                                 std::size_t cols,
                                                 std::uint64_t seed) {
  return gridscan::normalize(random_matrix(rows, cols, seed),
                             plain_attributes(cols));
}

/// Wraps already-normalized values without rescaling them.
inline gridscan::OperatingPointSet as_points(const gridscan::Matrix& values) {
  std::vector<gridscan::Attribute> attrs = plain_attributes(values.cols());
  for (auto& a : attrs) {
    a.raw_min = -1.0;
    a.raw_max = 1.0;
  }
  std::vector<std::int64_t> hours(values.rows());
  for (std::size_t i = 0; i < hours.size(); ++i) hours[i] = static_cast<std::int64_t>(i);
  return gridscan::OperatingPointSet(std::move(attrs), values, std::move(hours));
}

}  // namespace testing
