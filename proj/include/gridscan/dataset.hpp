#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gridscan {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  std::span<double> row(std::size_t i) noexcept {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }
  double& operator()(std::size_t i, std::size_t j) noexcept {
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const noexcept {
    return data_[i * cols_ + j];
  }

  void push_row(std::span<const double> values);
  void erase_row(std::size_t i);

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class AttributeKind {
  generator_P,
  generator_Q,
  load_P,
  load_Q,
  interconnector_P,
  interconnector_Q,
  hvdc_P,
  hvdc_Q,
  other,
};

std::string_view to_string(AttributeKind kind);
AttributeKind attribute_kind_from_string(std::string_view text);

/// Infers the kind from a column name such as `load03_P` or `hvdc1_Q`
/// (prefix gen/load/inter/hvdc, suffix _P/_Q). Anything else is `other`.
AttributeKind infer_attribute_kind(std::string_view name);

/// One operating-point feature together with the affine map that sends its
/// native range [raw_min, raw_max] onto [-1, 1].
struct Attribute {
  std::string name;
  AttributeKind kind = AttributeKind::other;
  double raw_min = 0.0;
  double raw_max = 0.0;

  double to_normalized(double raw) const noexcept;
  double to_raw(double normalized) const noexcept;
};

/// Hourly operating points with every value normalized into [-1, 1].
/// Immutable once built.
class OperatingPointSet {
 public:
  OperatingPointSet() = default;
  /// Validates the invariants (entries in [-1, 1], unique names, unique hours,
  /// consistent shapes) and throws ValidationError otherwise.
  OperatingPointSet(std::vector<Attribute> attributes, Matrix values,
                    std::vector<std::int64_t> hours);

  std::size_t size() const noexcept { return values_.rows(); }
  std::size_t dimension() const noexcept { return values_.cols(); }

  const Matrix& values() const noexcept { return values_; }
  std::span<const double> point(std::size_t i) const noexcept {
    return values_.row(i);
  }
  const std::vector<Attribute>& attributes() const noexcept {
    return attributes_;
  }
  const std::vector<std::int64_t>& hours() const noexcept { return hours_; }

  /// Maps the normalized matrix back to native units.
  Matrix denormalized() const;

  /// Column indices whose kind matches.
  std::vector<std::size_t> columns_of_kind(AttributeKind kind) const;

  /// Keeps only the listed rows (in the given order).
  OperatingPointSet subset(std::span<const std::size_t> rows) const;

 private:
  std::vector<Attribute> attributes_;
  Matrix values_;
  std::vector<std::int64_t> hours_;
};

/// Min-max normalizes each column independently. Constant columns map to 0.
/// Names and kinds are taken from `attributes`; their raw bounds are
/// overwritten with the observed column range. `hours` defaults to 0..n-1.
OperatingPointSet normalize(const Matrix& raw, std::vector<Attribute> attributes,
                            std::vector<std::int64_t> hours = {});

/// Reads `hour,<attr1>,<attr2>,...` and normalizes it.
OperatingPointSet load_csv(const std::filesystem::path& path);
OperatingPointSet parse_csv(std::string_view text);

/// Writes the native-unit values in the same layout `load_csv` reads.
void write_csv(const OperatingPointSet& set, const std::filesystem::path& path);

/// Per-attribute name, kind and raw bounds as JSON text.
std::string normalization_sidecar_json(const OperatingPointSet& set);

struct SyntheticYearConfig {
  std::size_t n_hours = 8760;
  std::size_t n_attributes = 20;
  std::uint64_t seed = 1;
  double seasonal_amplitude = 0.5;
  double diurnal_amplitude = 0.35;
  double noise_sigma = 0.25;
  std::size_t n_informative = 3;

  void validate() const;
};

struct SyntheticYear {
  OperatingPointSet points;
  /// Attribute indices the default oracles depend on (sorted).
  std::vector<std::size_t> informative;
  SyntheticYearConfig config;
};

/// Seasonal sinusoid + diurnal sinusoid + white noise per attribute, each
/// with its own random phases, scaled into plausible native units.
/// Bitwise deterministic for a fixed config.
SyntheticYear generate_synthetic_year(const SyntheticYearConfig& cfg);

}  // namespace gridscan
