#include "gridscan/relief.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gridscan/error.hpp"
#include "gridscan/parallel.hpp"

namespace gridscan {

void ReliefParams::validate() const {
  if (m < 1) throw ValidationError("relief.m must be >= 1");
  if (k < 1) throw ValidationError("relief.k must be >= 1");
  if (!(sigma > 0.0)) throw ValidationError("relief.sigma must be > 0");
  if (batch < 1) throw ValidationError("relief.batch must be >= 1");
  if (window < 1) throw ValidationError("relief.window must be >= 1");
  if (!(rho_threshold >= 0.0 && rho_threshold <= 1.0)) {
    throw ValidationError("relief.rho_threshold must lie in [0, 1]");
  }
  if (!(epsilon_f >= 0.0)) throw ValidationError("relief.epsilon_f must be >= 0");
}

double attribute_diff(double a, double b) noexcept {
  return std::abs(a - b) / 2.0;
}

double prediction_diff(double a, double b, double lambda_min,
                       double lambda_max) noexcept {
  const double range = lambda_max - lambda_min;
  if (!(range > 0.0)) return 0.0;
  return std::abs(a - b) / range;
}

double neighbor_influence(std::size_t rank, double sigma) {
  if (rank < 1) throw ValidationError("neighbor rank must be >= 1");
  const double x = static_cast<double>(rank) / sigma;
  return std::exp(-x * x);
}

std::vector<double> neighbor_influences(std::size_t k, double sigma) {
  std::vector<double> d(k);
  double total = 0.0;
  for (std::size_t r = 1; r <= k; ++r) {
    d[r - 1] = neighbor_influence(r, sigma);
    total += d[r - 1];
  }
  for (auto& v : d) v /= total;
  return d;
}

std::vector<int> rank_descending(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] > values[b];
  });
  std::vector<int> rank(values.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    rank[order[pos]] = static_cast<int>(pos + 1);
  }
  return rank;
}

namespace {

// Per-sample accumulator contribution, summed afterwards in sample order.
struct Contribution {
  double dc = 0.0;
  std::vector<double> da;
  std::vector<double> dca;
};

}  // namespace

FeatureReport rrelieff_pass(const OperatingPointSet& data,
                            std::span<const std::size_t> training_rows,
                            std::span<const double> lambda, std::size_t k,
                            double sigma, std::span<const std::size_t> sample) {
  const std::size_t n = training_rows.size();
  const std::size_t dim = data.dimension();
  if (lambda.size() != n) {
    throw ValidationError("rrelieff: one target value per training row needed");
  }
  if (k < 1) throw ValidationError("rrelieff: k must be >= 1");
  if (n <= k) {
    throw ValidationError("rrelieff: training set of " + std::to_string(n) +
                          " instances must exceed k = " + std::to_string(k));
  }
  if (sample.empty()) throw ValidationError("rrelieff: empty sample");
  for (auto s : sample) {
    if (s >= n) throw ValidationError("rrelieff: sample position out of range");
  }

  const auto [lo_it, hi_it] = std::minmax_element(lambda.begin(), lambda.end());
  const double lambda_min = *lo_it;
  const double lambda_max = *hi_it;
  const auto influence = neighbor_influences(k, sigma);

  std::vector<Contribution> parts(sample.size());
  parallel_for(sample.size(), [&](std::size_t si) {
    const std::size_t self = sample[si];
    const auto r = data.point(training_rows[self]);
    struct Candidate {
      double dist;
      std::size_t row;
      std::size_t pos;
    };
    std::vector<Candidate> cands;
    cands.reserve(n - 1);
    for (std::size_t q = 0; q < n; ++q) {
      if (q == self) continue;
      const auto x = data.point(training_rows[q]);
      double d2 = 0.0;
      for (std::size_t a = 0; a < dim; ++a) {
        const double diff = r[a] - x[a];
        d2 += diff * diff;
      }
      cands.push_back({d2, training_rows[q], q});
    }
    auto closer = [](const Candidate& a, const Candidate& b) {
      return a.dist < b.dist || (a.dist == b.dist && a.row < b.row);
    };
    std::partial_sort(cands.begin(), cands.begin() + static_cast<long>(k),
                      cands.end(), closer);

    Contribution c;
    c.da.assign(dim, 0.0);
    c.dca.assign(dim, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
      const auto q = data.point(cands[j].row);
      const double d = influence[j];
      const double dpred =
          prediction_diff(lambda[self], lambda[cands[j].pos], lambda_min,
                          lambda_max);
      c.dc += dpred * d;
      for (std::size_t a = 0; a < dim; ++a) {
        const double dattr = attribute_diff(r[a], q[a]) * d;
        c.da[a] += dattr;
        c.dca[a] += dpred * dattr;
      }
    }
    parts[si] = std::move(c);
  });

  double n_dc = 0.0;
  std::vector<double> n_da(dim, 0.0);
  std::vector<double> n_dca(dim, 0.0);
  for (const auto& c : parts) {
    n_dc += c.dc;
    for (std::size_t a = 0; a < dim; ++a) {
      n_da[a] += c.da[a];
      n_dca[a] += c.dca[a];
    }
  }
  const double m = static_cast<double>(sample.size());
  if (!(n_dc > 0.0) || !(m - n_dc > 0.0)) {
    throw DegenerateError(
        "degenerate prediction diversity: sampled targets give no usable "
        "spread (n_dc = " + std::to_string(n_dc) + ", m = " +
        std::to_string(sample.size()) + ")");
  }

  FeatureReport report;
  report.weight.resize(dim);
  for (std::size_t a = 0; a < dim; ++a) {
    report.weight[a] = n_dca[a] / n_dc - (n_da[a] - n_dca[a]) / (m - n_dc);
  }
  report.rank = rank_descending(report.weight);
  for (const auto& attr : data.attributes()) report.names.push_back(attr.name);

  report.variance.assign(dim, 0.0);
  for (std::size_t a = 0; a < dim; ++a) {
    double mean = 0.0;
    for (auto row : training_rows) mean += data.values()(row, a);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (auto row : training_rows) {
      const double diff = data.values()(row, a) - mean;
      var += diff * diff;
    }
    report.variance[a] = var / static_cast<double>(n);
  }
  report.adjusted_weight = report.weight;
  report.adjusted_rank = report.rank;
  report.training_size = n;
  report.training_rows.assign(training_rows.begin(), training_rows.end());
  report.training_lambda.assign(lambda.begin(), lambda.end());
  return report;
}

FeatureReport rrelieff_pass(const OperatingPointSet& data,
                            std::span<const std::size_t> training_rows,
                            std::span<const double> lambda,
                            const ReliefParams& params, std::mt19937_64& rng) {
  params.validate();
  const std::size_t n = training_rows.size();
  std::vector<std::size_t> sample(n);
  std::iota(sample.begin(), sample.end(), std::size_t{0});
  if (params.m < n) {
    std::shuffle(sample.begin(), sample.end(), rng);
    sample.resize(params.m);
  }
  return rrelieff_pass(data, training_rows, lambda, params.k, params.sigma,
                       sample);
}

namespace {

double adjustment_term(const FeatureReport& r, std::size_t i) {
  return r.weight[i] * r.variance[i] / std::log(2.0 * r.rank[i]);
}

}  // namespace

double default_adjustment_scale(const FeatureReport& report) {
  double best = 0.0;
  for (std::size_t i = 0; i < report.size(); ++i) {
    best = std::max(best, adjustment_term(report, i));
  }
  return best > 0.0 ? 1.0 / best : 1.0;
}

FeatureReport adjust_weights(FeatureReport report, std::optional<double> scale) {
  if (report.rank.size() != report.size() ||
      report.variance.size() != report.size()) {
    throw ValidationError("adjust_weights: ranks and variances must be set");
  }
  for (int r : report.rank) {
    if (r < 1) throw ValidationError("adjust_weights: ranks start at 1");
  }
  const double c = scale ? *scale : default_adjustment_scale(report);
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw ValidationError("adjust_weights: C must be positive and finite");
  }
  report.scale = c;
  report.adjusted_weight.resize(report.size());
  for (std::size_t i = 0; i < report.size(); ++i) {
    report.adjusted_weight[i] = c * adjustment_term(report, i);
  }
  report.adjusted_rank = rank_descending(report.adjusted_weight);
  return report;
}

double spearman(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ValidationError("spearman: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) return 1.0;
  double sum_d2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(a[i] - b[i]);
    sum_d2 += d * d;
  }
  const double nn = static_cast<double>(n);
  return 1.0 - 6.0 * sum_d2 / (nn * (nn * nn - 1.0));
}

FeatureReport select_features(const OperatingPointSet& data,
                              const StabilityOracle& oracle,
                              const ReliefParams& params,
                              std::optional<double> scale) {
  params.validate();
  std::mt19937_64 rng(params.seed);
  std::vector<std::size_t> pool(data.size());
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  std::shuffle(pool.begin(), pool.end(), rng);

  std::vector<std::size_t> rows;
  std::vector<double> lambda;
  std::vector<std::int64_t> failed;
  std::size_t next = 0;
  std::size_t streak = 0;
  std::optional<FeatureReport> previous;
  std::vector<FeatureReport::Pass> history;

  while (true) {
    std::size_t added = 0;
    while (added < params.batch && next < pool.size()) {
      const std::size_t row = pool[next++];
      try {
        lambda.push_back(oracle.evaluate(data.point(row)));
        rows.push_back(row);
        ++added;
      } catch (const OracleFailure&) {
        failed.push_back(data.hours()[row]);
      }
    }
    const bool exhausted = next >= pool.size();
    if (rows.size() <= params.k) {
      if (exhausted) {
        throw ValidationError(
            "select_features: not enough evaluable points to exceed k");
      }
      continue;
    }

    FeatureReport report =
        adjust_weights(rrelieff_pass(data, rows, lambda, params, rng), scale);

    FeatureReport::Pass pass;
    pass.training_size = rows.size();
    pass.spearman = std::numeric_limits<double>::quiet_NaN();
    pass.max_drift = std::numeric_limits<double>::quiet_NaN();
    if (previous) {
      pass.spearman = spearman(previous->adjusted_rank, report.adjusted_rank);
      pass.max_drift = 0.0;
      for (std::size_t i = 0; i < report.size(); ++i) {
        pass.max_drift =
            std::max(pass.max_drift, std::abs(report.adjusted_weight[i] -
                                              previous->adjusted_weight[i]));
      }
      const bool stable = pass.spearman >= params.rho_threshold &&
                          pass.max_drift <= params.epsilon_f;
      streak = stable ? streak + 1 : 0;
    }
    history.push_back(pass);
    report.passes = history.size();
    report.history = history;
    report.failed_hours = failed;
    report.converged = streak >= params.window;
    if (report.converged || exhausted) return report;
    previous = std::move(report);
  }
}

}  // namespace gridscan
