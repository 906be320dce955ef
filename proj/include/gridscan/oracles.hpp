#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gridscan/dataset.hpp"

namespace gridscan {

enum class OracleKind { damping_surrogate, two_bus_margin, tabulated, custom };

std::string to_string(OracleKind kind);
OracleKind oracle_kind_from_string(const std::string& text);

struct Interaction {
  std::size_t i = 0;
  std::size_t j = 0;
  double coeff = 0.0;
};

/// Sparse quadratic model of an inter-area damping ratio:
///   b0 + sum_i b_i x_i + sum_(i,j) b_ij x_i x_j
/// restricted to the informative attribute indices.
struct DampingCoefficients {
  double b0 = 0.10;
  std::vector<std::size_t> informative;
  std::vector<double> linear;  // aligned with `informative`
  std::vector<Interaction> interactions;

  /// Reference coefficients: b0 = 0.1, alternating-sign linear terms of a few
  /// hundredths and one interaction per consecutive informative pair.
  static DampingCoefficients standard(std::vector<std::size_t> informative);
  void validate(std::size_t dimension) const;
};

double damping_surrogate(std::span<const double> point,
                         const DampingCoefficients& coeffs);

/// Loading margin of a lossless two-bus system feeding a unity-power-factor
/// load: E^2 / (2X) - P0.
double two_bus_margin(double source_voltage, double reactance, double base_load);

struct TwoBusParams {
  double source_voltage = 1.0;  // E, p.u.
  double reactance = 0.5;       // X, p.u.
  /// Columns whose mean sets the base load. Empty means every column.
  std::vector<std::size_t> load_columns;
  /// Base load at the top of the normalized range, as a fraction of E^2/(2X).
  double max_load_fraction = 0.9;

  void validate(std::size_t dimension) const;
  /// Affine map of the mean of the load columns from [-1, 1] into
  /// [0, max_load_fraction * E^2/(2X)].
  double demand(std::span<const double> point) const;
};

/// Point -> stability index. Pure for the analytic kinds; every call counts
/// once. Move-only so the call counter has a single owner.
class StabilityOracle {
 public:
  using Function = std::function<double(std::span<const double>)>;

  static StabilityOracle damping(DampingCoefficients coeffs,
                                 std::size_t dimension);
  static StabilityOracle two_bus(TwoBusParams params, std::size_t dimension);
  /// Nearest-neighbor lookup (unweighted Euclidean, ties to the lowest row)
  /// into precomputed indices, e.g. from an external solver.
  static StabilityOracle tabulated(Matrix points, std::vector<double> lambda);
  static StabilityOracle custom(Function fn);

  StabilityOracle(StabilityOracle&&) noexcept = default;
  StabilityOracle& operator=(StabilityOracle&&) noexcept = default;

  /// Throws OracleFailure when the index is not finite or the wrapped
  /// function throws.
  double evaluate(std::span<const double> point) const;

  OracleKind kind() const noexcept { return kind_; }
  std::size_t eval_count() const noexcept { return count_->load(); }
  void reset_count() noexcept { count_->store(0); }

  /// Artificial per-call cost, for speed-up experiments.
  void set_cost_ms(double ms) noexcept { cost_ms_ = ms; }
  double cost_ms() const noexcept { return cost_ms_; }

 private:
  StabilityOracle(OracleKind kind, Function fn);

  OracleKind kind_;
  Function fn_;
  double cost_ms_ = 0.0;
  std::unique_ptr<std::atomic<std::size_t>> count_;
};

struct StabilityTrace {
  std::vector<std::int64_t> hours;
  std::vector<double> lambda;  // NaN where the oracle failed
  OracleKind kind = OracleKind::custom;
  std::vector<std::int64_t> failed_hours;
  double seconds = 0.0;

  bool partial() const noexcept { return !failed_hours.empty(); }
};

/// Evaluates the oracle at every hour.
StabilityTrace full_scan(const OperatingPointSet& data,
                         const StabilityOracle& oracle);

}  // namespace gridscan
