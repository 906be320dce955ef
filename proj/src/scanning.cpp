#include "gridscan/scanning.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "gridscan/error.hpp"
#include "gridscan/parallel.hpp"

namespace gridscan {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

constexpr double kNearZeroLambda = 1e-9;

// Rows eligible for validation, sampled without replacement and returned in
// ascending row order.
std::vector<std::size_t> sample_rows(std::size_t n, std::size_t sample_size,
                                     std::uint64_t seed,
                                     std::span<const std::size_t> exclude) {
  std::unordered_set<std::size_t> skip(exclude.begin(), exclude.end());
  std::vector<std::size_t> eligible;
  eligible.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!skip.contains(i)) eligible.push_back(i);
  }
  if (sample_size < eligible.size()) {
    std::mt19937_64 rng(seed);
    std::shuffle(eligible.begin(), eligible.end(), rng);
    eligible.resize(sample_size);
    std::sort(eligible.begin(), eligible.end());
  }
  return eligible;
}

}  // namespace

ScanReport scan_with_model(const OperatingPointSet& data,
                           const StabilityOracle& oracle, ClusterModel model) {
  if (model.assignment.size() != data.size()) {
    throw ValidationError("scan_with_model: assignment does not cover the data");
  }
  ScanReport report;
  const auto start = Clock::now();
  const std::size_t before = oracle.eval_count();
  report.centroid_lambda.assign(model.k(), 0.0);
  parallel_for(model.k(), [&](std::size_t c) {
    try {
      report.centroid_lambda[c] = oracle.evaluate(model.centroids.row(c));
    } catch (const OracleFailure& e) {
      throw OracleFailure("centroid " + std::to_string(c) + ": " + e.what());
    }
  });
  report.timing.centroid_eval_s = seconds_since(start);
  report.oracle_evaluations = oracle.eval_count() - before;

  report.hours = data.hours();
  report.cluster_of_hour = model.assignment;
  report.lambda_hat.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    report.lambda_hat[i] = report.centroid_lambda[model.assignment[i]];
  }
  report.k_final = model.k();
  report.reduction =
      1.0 - static_cast<double>(model.k()) / static_cast<double>(data.size());
  report.model = std::move(model);
  return report;
}

ScanReport fast_scan(const OperatingPointSet& data,
                     const StabilityOracle& oracle, const ScanConfig& config) {
  if (config.sample_size > data.size()) {
    throw ValidationError("scan.sample_size exceeds the number of hours");
  }
  config.adapt.validate();
  config.pso.validate();
  const std::size_t before = oracle.eval_count();

  auto start = Clock::now();
  FeatureReport features =
      select_features(data, oracle, config.relief, config.adjustment_scale);
  const double selection_s = seconds_since(start);

  start = Clock::now();
  const auto weights = DistanceWeights::from_adjusted(features.adjusted_weight);
  AdaptiveResult clusters = self_adaptive_pso_kmeans(data.values(), weights,
                                                     config.pso, config.adapt);
  const double clustering_s = seconds_since(start);

  ScanReport report = scan_with_model(data, oracle, std::move(clusters.model));
  report.features = std::move(features);
  report.clustering_converged = clusters.converged;
  report.eps_d = config.adapt.eps_d;
  report.eps_c = config.adapt.eps_c;
  report.timing.feature_selection_s = selection_s;
  report.timing.clustering_s = clustering_s;
  report.oracle_evaluations = oracle.eval_count() - before;
  return report;
}

ValidationSample score_sample(std::int64_t hour, double lambda,
                              double lambda_hat) {
  ValidationSample s{hour, lambda, lambda_hat, 0.0, false};
  const double err = std::abs(lambda - lambda_hat);
  if (std::abs(lambda) < kNearZeroLambda) {
    s.ape = err;
    s.absolute = true;
  } else {
    s.ape = err / std::abs(lambda);
  }
  return s;
}

Validation summarize_errors(std::vector<ValidationSample> samples) {
  Validation v;
  v.samples = std::move(samples);
  double total = 0.0;
  for (const auto& s : v.samples) {
    total += s.ape;
    v.max_ape = std::max(v.max_ape, s.ape);
    if (s.absolute) ++v.absolute_fallbacks;
  }
  if (!v.samples.empty()) total /= static_cast<double>(v.samples.size());
  v.mape = total;
  const auto bins = static_cast<std::size_t>(
      std::max(1.0, std::floor(v.max_ape * 100.0) + 1.0));
  v.histogram.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    v.histogram[b].low_pct = static_cast<double>(b);
    v.histogram[b].high_pct = static_cast<double>(b + 1);
  }
  for (const auto& s : v.samples) {
    auto b = static_cast<std::size_t>(std::floor(s.ape * 100.0));
    v.histogram[std::min(b, bins - 1)].count++;
  }
  return v;
}

Validation validate(const ScanReport& report, const OperatingPointSet& data,
                    const StabilityOracle& oracle, std::size_t sample_size,
                    std::uint64_t seed, std::span<const std::size_t> exclude_rows,
                    std::span<const std::size_t> cached_rows,
                    std::span<const double> cached_lambda) {
  if (report.lambda_hat.size() != data.size()) {
    throw ValidationError("validate: report and data cover different hours");
  }
  if (cached_rows.size() != cached_lambda.size()) {
    throw ValidationError("validate: cache rows and values differ in length");
  }
  std::unordered_map<std::size_t, double> cache;
  for (std::size_t i = 0; i < cached_rows.size(); ++i) {
    cache.emplace(cached_rows[i], cached_lambda[i]);
  }
  const auto rows = sample_rows(data.size(), sample_size, seed, exclude_rows);
  std::vector<double> lambda(rows.size(), std::numeric_limits<double>::quiet_NaN());
  parallel_for(rows.size(), [&](std::size_t i) {
    if (auto it = cache.find(rows[i]); it != cache.end()) {
      lambda[i] = it->second;
      return;
    }
    try {
      lambda[i] = oracle.evaluate(data.point(rows[i]));
    } catch (const OracleFailure&) {
    }
  });
  std::vector<ValidationSample> samples;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (std::isnan(lambda[i])) continue;
    samples.push_back(score_sample(data.hours()[rows[i]], lambda[i],
                                   report.lambda_hat[rows[i]]));
  }
  return summarize_errors(std::move(samples));
}

Validation validate_against_trace(const ScanReport& report,
                                  const StabilityTrace& trace,
                                  std::size_t sample_size, std::uint64_t seed,
                                  std::span<const std::size_t> exclude_rows) {
  if (trace.hours != report.hours) {
    throw ValidationError("validate: trace and report cover different hours");
  }
  const auto rows =
      sample_rows(report.hours.size(), sample_size, seed, exclude_rows);
  std::vector<ValidationSample> samples;
  for (auto r : rows) {
    if (std::isnan(trace.lambda[r])) continue;
    samples.push_back(
        score_sample(report.hours[r], trace.lambda[r], report.lambda_hat[r]));
  }
  return summarize_errors(std::move(samples));
}

Validation errors_against_trace(const ScanReport& report,
                                const StabilityTrace& trace) {
  return validate_against_trace(report, trace, report.hours.size(), 0);
}

std::vector<double> total_demand(const OperatingPointSet& data) {
  const auto cols = data.columns_of_kind(AttributeKind::load_P);
  if (cols.empty()) {
    throw ValidationError("total_demand: the data has no load_P attributes");
  }
  std::vector<double> demand(data.size(), 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (auto c : cols) {
      demand[i] += data.attributes()[c].to_raw(data.values()(i, c));
    }
  }
  return demand;
}

WorstCase worst_case_analysis(const StabilityTrace& trace,
                              std::span<const double> demand) {
  if (trace.lambda.size() != demand.size() ||
      trace.hours.size() != demand.size()) {
    throw ValidationError("worst_case_analysis: trace and demand lengths differ");
  }
  WorstCase out;
  std::size_t min_i = demand.size();
  std::size_t max_i = demand.size();
  double sum_l = 0.0, sum_d = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < demand.size(); ++i) {
    const double l = trace.lambda[i];
    if (std::isnan(l)) continue;
    if (min_i == demand.size() || l < trace.lambda[min_i]) min_i = i;
    if (max_i == demand.size() || demand[i] > demand[max_i]) max_i = i;
    sum_l += l;
    sum_d += demand[i];
    ++n;
  }
  if (n == 0) throw ValidationError("worst_case_analysis: no valid hours");
  const double mean_l = sum_l / static_cast<double>(n);
  const double mean_d = sum_d / static_cast<double>(n);
  double cov = 0.0, var_l = 0.0, var_d = 0.0;
  for (std::size_t i = 0; i < demand.size(); ++i) {
    if (std::isnan(trace.lambda[i])) continue;
    const double a = trace.lambda[i] - mean_l;
    const double b = demand[i] - mean_d;
    cov += a * b;
    var_l += a * a;
    var_d += b * b;
  }
  out.correlation =
      (var_l > 0.0 && var_d > 0.0) ? cov / std::sqrt(var_l * var_d) : 0.0;
  out.min_lambda_hour = trace.hours[min_i];
  out.min_lambda = trace.lambda[min_i];
  out.max_demand_hour = trace.hours[max_i];
  out.max_demand = demand[max_i];
  out.shifted = out.min_lambda_hour != out.max_demand_hour;
  return out;
}

ScanReport compare_full_vs_fast(const OperatingPointSet& data,
                                const StabilityOracle& oracle,
                                const ScanConfig& config,
                                std::optional<StabilityTrace> cached_full) {
  StabilityTrace full =
      cached_full ? std::move(*cached_full) : full_scan(data, oracle);
  if (full.hours != data.hours()) {
    throw ValidationError("compare: cached full trace covers different hours");
  }
  ScanReport report = fast_scan(data, oracle, config);
  report.timing.full_scan_s = full.seconds;
  const double fast = report.timing.fast_total_s();
  report.speedup = fast > 0.0 ? full.seconds / fast
                              : std::numeric_limits<double>::infinity();
  std::span<const std::size_t> exclude;
  if (config.exclude_training_from_validation) {
    exclude = report.features.training_rows;
  }
  report.validation = validate_against_trace(report, full, config.sample_size,
                                             config.seed, exclude);
  report.full_errors = errors_against_trace(report, full);
  return report;
}

}  // namespace gridscan
