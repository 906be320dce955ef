#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gridscan/dataset.hpp"
#include "gridscan/oracles.hpp"

namespace gridscan {

struct ReliefParams {
  /// Sampled instances per pass. When m >= training size every instance is
  /// used once, in training order.
  std::size_t m = 1000;
  /// Nearest neighbors per sampled instance.
  std::size_t k = 10;
  /// Rank-decay width of the neighbor influence exp(-(rank/sigma)^2).
  double sigma = 5.0;
  /// Points added to the training set per growth step.
  std::size_t batch = 50;
  /// Minimum Spearman correlation between successive adjusted rankings.
  double rho_threshold = 0.8;
  /// Maximum change of any adjusted weight between successive passes.
  double epsilon_f = 0.05;
  /// Consecutive passes that must satisfy both criteria.
  std::size_t window = 2;
  std::uint64_t seed = 7;

  void validate() const;
};

/// Per-attribute RReliefF estimates, indexed by attribute.
struct FeatureReport {
  std::vector<std::string> names;
  std::vector<double> weight;
  std::vector<int> rank;  // 1 = largest weight
  std::vector<double> adjusted_weight;
  std::vector<int> adjusted_rank;
  std::vector<double> variance;  // population variance over the training set
  double scale = 1.0;            // C used by the adjustment

  std::size_t training_size = 0;
  bool converged = false;
  std::size_t passes = 0;

  /// Oracle results gathered while growing the training set, keyed by row.
  std::vector<std::size_t> training_rows;
  std::vector<double> training_lambda;
  std::vector<std::int64_t> failed_hours;

  struct Pass {
    std::size_t training_size = 0;
    double spearman = 0.0;  // NaN on the first pass
    double max_drift = 0.0;
  };
  std::vector<Pass> history;

  std::size_t size() const noexcept { return weight.size(); }
};

/// |a - b| / 2 for attributes normalized to [-1, 1].
double attribute_diff(double a, double b) noexcept;

/// |a - b| / (max - min); 0 when the target range is degenerate.
double prediction_diff(double a, double b, double lambda_min,
                       double lambda_max) noexcept;

/// exp(-(rank / sigma)^2), before normalization.
double neighbor_influence(std::size_t rank, double sigma);

/// Influences of ranks 1..k normalized to sum to 1.
std::vector<double> neighbor_influences(std::size_t k, double sigma);

/// Ranks 1..n by descending value; ties keep the lower index first.
std::vector<int> rank_descending(std::span<const double> values);

/// One RReliefF pass over `training_rows` of `data`, with `lambda` aligned to
/// `training_rows`. `sample` lists positions into `training_rows` (the
/// instances r_i, in order). Neighbors use unweighted Euclidean distance over
/// all attributes; equal distances are ordered by dataset row.
/// Throws DegenerateError when the sampled targets carry no spread.
FeatureReport rrelieff_pass(const OperatingPointSet& data,
                            std::span<const std::size_t> training_rows,
                            std::span<const double> lambda,
                            std::size_t k, double sigma,
                            std::span<const std::size_t> sample);

/// Same, drawing the sample according to params.m from `rng`.
FeatureReport rrelieff_pass(const OperatingPointSet& data,
                            std::span<const std::size_t> training_rows,
                            std::span<const double> lambda,
                            const ReliefParams& params, std::mt19937_64& rng);

/// Largest positive w_i * var_i / ln(2 rank_i) inverted, so the top adjusted
/// weight becomes 1. Falls back to 1 when no term is positive.
double default_adjustment_scale(const FeatureReport& report);

/// w~_i = C * w_i * var_i / ln(2 * rank_i), then re-ranks. Uses
/// default_adjustment_scale when `scale` is empty.
FeatureReport adjust_weights(FeatureReport report,
                             std::optional<double> scale = std::nullopt);

/// Spearman correlation of two rank vectors (permutations of 1..n).
double spearman(std::span<const int> a, std::span<const int> b);

/// Grows a random training set by `batch` unseen points per pass, evaluating
/// the oracle on each new point, until the adjusted ranking and weights hold
/// still for `window` consecutive passes or the data is exhausted.
FeatureReport select_features(const OperatingPointSet& data,
                              const StabilityOracle& oracle,
                              const ReliefParams& params,
                              std::optional<double> scale = std::nullopt);

}  // namespace gridscan
