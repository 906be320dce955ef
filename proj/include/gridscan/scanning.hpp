#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gridscan/clustering.hpp"
#include "gridscan/dataset.hpp"
#include "gridscan/oracles.hpp"
#include "gridscan/relief.hpp"

namespace gridscan {

struct ScanConfig {
  ReliefParams relief;
  /// Scale C of the weight adjustment; empty normalizes the top weight to 1.
  std::optional<double> adjustment_scale;
  PsoParams pso;
  AdaptiveParams adapt;
  /// Hours drawn for error validation.
  std::size_t sample_size = 500;
  std::uint64_t seed = 2024;
  /// Keep hours used for feature selection out of the validation sample.
  bool exclude_training_from_validation = true;
};

struct ValidationSample {
  std::int64_t hour = 0;
  double lambda = 0.0;
  double lambda_hat = 0.0;
  /// |lambda - lambda_hat| / |lambda|, or the absolute error when
  /// |lambda| < 1e-9 (then `absolute` is set).
  double ape = 0.0;
  bool absolute = false;
};

struct HistogramBin {
  double low_pct = 0.0;
  double high_pct = 0.0;
  std::size_t count = 0;
};

struct Validation {
  std::vector<ValidationSample> samples;
  double mape = 0.0;     // fraction
  double max_ape = 0.0;  // fraction
  std::size_t absolute_fallbacks = 0;
  /// 1-percentage-point bins from 0 up to the largest error.
  std::vector<HistogramBin> histogram;
};

struct ScanTiming {
  double feature_selection_s = 0.0;
  double clustering_s = 0.0;
  double centroid_eval_s = 0.0;
  std::optional<double> full_scan_s;

  double fast_total_s() const noexcept {
    return feature_selection_s + clustering_s + centroid_eval_s;
  }
};

struct ScanReport {
  std::vector<std::int64_t> hours;
  std::vector<double> lambda_hat;
  std::vector<std::size_t> cluster_of_hour;
  std::vector<double> centroid_lambda;
  ClusterModel model;
  FeatureReport features;
  bool clustering_converged = true;
  std::size_t k_final = 0;
  double reduction = 0.0;  // 1 - k_final / |R|
  std::size_t oracle_evaluations = 0;
  double eps_d = 0.0;
  double eps_c = 0.0;
  ScanTiming timing;
  std::optional<Validation> validation;
  /// Errors over every hour, when a full trace is available.
  std::optional<Validation> full_errors;
  std::optional<double> speedup;
};

/// Evaluates the oracle once per centroid and hands every hour its cluster's
/// index. Fills the imputation fields of a report; timing covers the oracle
/// calls only.
ScanReport scan_with_model(const OperatingPointSet& data,
                           const StabilityOracle& oracle, ClusterModel model);

/// Feature selection, weighted self-adaptive PSO-k-means, then oracle calls at
/// the centroids only. Oracle calls = training_size + k_final.
ScanReport fast_scan(const OperatingPointSet& data,
                     const StabilityOracle& oracle, const ScanConfig& config);

/// Absolute percentage error of one estimate (see ValidationSample::ape).
ValidationSample score_sample(std::int64_t hour, double lambda,
                              double lambda_hat);

/// Error statistics and histogram for a list of samples.
Validation summarize_errors(std::vector<ValidationSample> samples);

/// Draws `sample_size` hours without replacement (all of them when fewer are
/// eligible), evaluates the oracle there and compares with the report.
/// `exclude_rows` are ineligible. `cached_rows`/`cached_lambda` supply known
/// indices that are reused instead of calling the oracle.
Validation validate(const ScanReport& report, const OperatingPointSet& data,
                    const StabilityOracle& oracle, std::size_t sample_size,
                    std::uint64_t seed,
                    std::span<const std::size_t> exclude_rows = {},
                    std::span<const std::size_t> cached_rows = {},
                    std::span<const double> cached_lambda = {});

/// Same sampling, with lambda read from a full trace aligned to the report.
Validation validate_against_trace(const ScanReport& report,
                                  const StabilityTrace& trace,
                                  std::size_t sample_size, std::uint64_t seed,
                                  std::span<const std::size_t> exclude_rows = {});

/// Errors over every hour of a full trace.
Validation errors_against_trace(const ScanReport& report,
                                const StabilityTrace& trace);

struct WorstCase {
  std::int64_t min_lambda_hour = 0;
  double min_lambda = 0.0;
  std::int64_t max_demand_hour = 0;
  double max_demand = 0.0;
  double correlation = 0.0;  // Pearson, lambda vs demand
  /// Set when the least stable hour is not the peak-demand hour.
  bool shifted = false;
};

/// Sum of the native-unit load_P columns per hour.
std::vector<double> total_demand(const OperatingPointSet& data);

/// Compares where the stability index bottoms out with where demand peaks.
/// Hours whose index is NaN are skipped.
WorstCase worst_case_analysis(const StabilityTrace& trace,
                              std::span<const double> demand);

/// Runs the full scan (or reuses `cached_full`) and the fast scan and reports
/// speed-up = full_scan_s / (feature_selection_s + clustering_s +
/// centroid_eval_s), plus errors over every hour and a validation sample
/// drawn from the full trace.
ScanReport compare_full_vs_fast(const OperatingPointSet& data,
                                const StabilityOracle& oracle,
                                const ScanConfig& config,
                                std::optional<StabilityTrace> cached_full = {});

}  // namespace gridscan
