#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "gridscan/error.hpp"
#include "gridscan/scanning.hpp"
#include "support.hpp"

using namespace gridscan;

namespace {

SyntheticYear small_year(std::size_t hours, std::uint64_t seed) {
  SyntheticYearConfig cfg;
  cfg.n_hours = hours;
  cfg.n_attributes = 8;
  cfg.seed = seed;
  return generate_synthetic_year(cfg);
}

ScanConfig small_config() {
  ScanConfig c;
  c.relief.batch = 40;
  c.sample_size = 100;
  return c;
}

StabilityTrace trace_of(std::vector<double> lambda) {
  StabilityTrace t;
  t.lambda = std::move(lambda);
  t.hours.resize(t.lambda.size());
  std::iota(t.hours.begin(), t.hours.end(), std::int64_t{0});
  return t;
}

ScanReport report_with(const StabilityTrace& t, std::vector<double> lambda_hat) {
  ScanReport r;
  r.hours = t.hours;
  r.lambda_hat = std::move(lambda_hat);
  return r;
}

}  // namespace

TEST_SUITE("scanning") {

TEST_CASE("fast scan calls the oracle for training points and centroids only") {
  const auto year = small_year(1500, 3);
  const auto oracle = StabilityOracle::damping(
      DampingCoefficients::standard(year.informative), year.points.dimension());
  const auto r = fast_scan(year.points, oracle, small_config());
  CHECK(r.oracle_evaluations == r.features.training_size + r.k_final);
  CHECK(oracle.eval_count() == r.oracle_evaluations);
  CHECK(r.k_final == r.model.k());
  CHECK(r.reduction == doctest::Approx(1.0 - static_cast<double>(r.k_final) / 1500.0));
  CHECK(r.clustering_converged);
}

TEST_CASE("estimates are constant within each cluster") {
  const auto year = small_year(1200, 4);
  const auto oracle = StabilityOracle::damping(
      DampingCoefficients::standard(year.informative), year.points.dimension());
  const auto r = fast_scan(year.points, oracle, small_config());
  REQUIRE(r.lambda_hat.size() == 1200);
  for (std::size_t i = 0; i < 1200; ++i) {
    CHECK(r.lambda_hat[i] == r.centroid_lambda[r.cluster_of_hour[i]]);
  }
  std::set<std::size_t> used(r.cluster_of_hour.begin(), r.cluster_of_hour.end());
  CHECK(used.size() == r.k_final);
}

TEST_CASE("vanishing cluster radius reproduces the full scan") {
  const auto year = small_year(300, 5);
  const auto oracle = StabilityOracle::damping(
      DampingCoefficients::standard(year.informative), year.points.dimension());
  AdaptiveParams adapt;
  adapt.eps_d = 1e-9;
  adapt.eps_c = 1e-10;
  const auto refined = refine_clusters(year.points.values(), year.points.values(),
                                       DistanceWeights::uniform(8), adapt);
  REQUIRE(refined.converged);
  CHECK(refined.model.k() == 300);
  const auto r = scan_with_model(year.points, oracle, refined.model);
  const auto full = full_scan(year.points, oracle);
  CHECK(r.lambda_hat == full.lambda);
  const auto errs = errors_against_trace(r, full);
  CHECK(errs.max_ape == 0.0);
}

TEST_CASE("huge cluster radius collapses to a single cluster") {
  const auto year = small_year(800, 6);
  const auto oracle = StabilityOracle::damping(
      DampingCoefficients::standard(year.informative), year.points.dimension());
  auto cfg = small_config();
  cfg.adapt.eps_d = 100.0;
  cfg.adapt.eps_c = 50.0;
  const auto r = fast_scan(year.points, oracle, cfg);
  CHECK(r.k_final == 1);
  for (double l : r.lambda_hat) CHECK(l == r.lambda_hat.front());
}

TEST_CASE("validation of an exact report has zero error") {
  const auto t = trace_of({0.5, -0.2, 0.1, 0.3});
  const auto r = report_with(t, t.lambda);
  const auto v = validate_against_trace(r, t, 10, 1);
  CHECK(v.samples.size() == 4);
  CHECK(v.mape == 0.0);
  CHECK(v.max_ape == 0.0);
  REQUIRE(v.histogram.size() == 1);
  CHECK(v.histogram[0].count == 4);
}

TEST_CASE("absolute percentage error examples") {
  const auto s = score_sample(3, 0.2, 0.19);
  CHECK(s.ape == doctest::Approx(0.05));
  CHECK_FALSE(s.absolute);
  const auto z = score_sample(4, 0.0, 0.003);
  CHECK(z.absolute);
  CHECK(z.ape == doctest::Approx(0.003));
  const auto v = summarize_errors({s, z});
  CHECK(v.absolute_fallbacks == 1);
  CHECK(v.mape == doctest::Approx(0.0265));
  CHECK(v.max_ape == doctest::Approx(0.05));
}

TEST_CASE("error magnitude equals APE times |lambda|") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> lambda(200), hat(200);
  for (std::size_t i = 0; i < 200; ++i) {
    lambda[i] = u(rng);
    hat[i] = lambda[i] + 0.1 * u(rng);
  }
  const auto t = trace_of(lambda);
  const auto v = errors_against_trace(report_with(t, hat), t);
  REQUIRE(v.samples.size() == 200);
  std::size_t counted = 0;
  for (const auto& b : v.histogram) counted += b.count;
  CHECK(counted == 200);
  for (const auto& s : v.samples) {
    CHECK(s.ape >= 0.0);
    CHECK(std::abs(s.lambda - s.lambda_hat) ==
          doctest::Approx(s.ape * std::abs(s.lambda)).epsilon(1e-12));
    CHECK(v.histogram[static_cast<std::size_t>(std::floor(s.ape * 100.0))].count > 0);
  }
  CHECK(v.histogram.back().high_pct > v.max_ape * 100.0);
}

TEST_CASE("validation sample size, exclusion and caching") {
  const auto year = small_year(200, 7);
  auto oracle = StabilityOracle::damping(
      DampingCoefficients::standard(year.informative), year.points.dimension());
  const auto full = full_scan(year.points, oracle);
  oracle.reset_count();
  auto r = report_with(full, full.lambda);

  const auto all = validate(r, year.points, oracle, 500, 3);
  CHECK(all.samples.size() == 200);
  CHECK(oracle.eval_count() == 200);

  oracle.reset_count();
  std::vector<std::size_t> exclude = {0, 1, 2, 3, 4};
  std::vector<std::size_t> cached(50);
  std::iota(cached.begin(), cached.end(), std::size_t{5});
  std::vector<double> cached_lambda(full.lambda.begin() + 5, full.lambda.begin() + 55);
  const auto part = validate(r, year.points, oracle, 195, 3, exclude, cached, cached_lambda);
  CHECK(part.samples.size() == 195);
  CHECK(oracle.eval_count() == 145);
  for (const auto& s : part.samples) CHECK(s.hour >= 5);

  const auto a = validate(r, year.points, oracle, 20, 9);
  const auto b = validate(r, year.points, oracle, 20, 9);
  REQUIRE(a.samples.size() == 20);
  for (std::size_t i = 0; i < 20; ++i) CHECK(a.samples[i].hour == b.samples[i].hour);
}

TEST_CASE("worst case at the demand peak") {
  const auto t = trace_of({0.3, 0.1, 0.4});
  const std::vector<double> demand = {50.0, 90.0, 20.0};
  const auto w = worst_case_analysis(t, demand);
  CHECK(w.min_lambda_hour == 1);
  CHECK(w.max_demand_hour == 1);
  CHECK_FALSE(w.shifted);
  CHECK(w.correlation < 0.0);
}

TEST_CASE("worst case away from the demand peak") {
  const auto t = trace_of({0.3, 0.25, 0.05, 0.2});
  const std::vector<double> demand = {40.0, 95.0, 30.0, 60.0};
  const auto w = worst_case_analysis(t, demand);
  CHECK(w.min_lambda_hour == 2);
  CHECK(w.min_lambda == 0.05);
  CHECK(w.max_demand_hour == 1);
  CHECK(w.max_demand == 95.0);
  CHECK(w.shifted);
}

TEST_CASE("worst case skips failed hours") {
  const auto t = trace_of({std::nan(""), 0.2, 0.3});
  const auto w = worst_case_analysis(t, std::vector<double>{100.0, 10.0, 20.0});
  CHECK(w.min_lambda_hour == 1);
  CHECK(w.max_demand_hour == 2);
  CHECK_THROWS_AS(worst_case_analysis(trace_of({std::nan("")}), std::vector<double>{1.0}),
                  ValidationError);
}

TEST_CASE("interaction-driven weakness shows up off-peak") {
  // Margin shrinks with a generator/load interaction, so the least stable
  // hour need not be the one with the most demand.
  const auto year = small_year(2000, 8);
  const auto& data = year.points;
  const auto loads = data.columns_of_kind(AttributeKind::load_P);
  REQUIRE(!loads.empty());
  std::size_t other = 0;
  while (std::find(loads.begin(), loads.end(), other) != loads.end()) ++other;
  const std::size_t load = loads.front();
  const auto oracle = StabilityOracle::custom([=](std::span<const double> p) {
    return 0.5 - 0.05 * p[load] - 0.4 * p[other] * (1.0 - p[load]);
  });
  const auto trace = full_scan(data, oracle);
  const auto w = worst_case_analysis(trace, total_demand(data));
  const auto min_it = std::min_element(trace.lambda.begin(), trace.lambda.end());
  CHECK(w.min_lambda == *min_it);
  CHECK(w.min_lambda_hour == trace.hours[static_cast<std::size_t>(min_it - trace.lambda.begin())]);
  CHECK(w.shifted);
}

TEST_CASE("total demand sums native load columns") {
  const auto s = parse_csv("hour,load1_P,gen1_P,load2_P\n0,10,5,1\n1,20,6,3\n");
  CHECK(total_demand(s) == std::vector<double>{11.0, 23.0});
  const auto none = parse_csv("hour,gen1_P\n0,1\n");
  CHECK_THROWS_AS(total_demand(none), ValidationError);
}

TEST_CASE("no speed-up without oracle cost when every point is its own cluster") {
  const auto year = small_year(200, 9);
  const auto oracle = StabilityOracle::damping(
      DampingCoefficients::standard(year.informative), year.points.dimension());
  auto cfg = small_config();
  cfg.adapt.eps_d = 1e-9;
  cfg.adapt.eps_c = 1e-10;
  cfg.adapt.k_init = 200;
  cfg.pso.n_iter = 2;
  cfg.sample_size = 50;
  const auto r = compare_full_vs_fast(year.points, oracle, cfg);
  REQUIRE(r.speedup.has_value());
  CHECK(*r.speedup <= 1.0);
  CHECK(r.full_errors.has_value());
  CHECK(r.validation.has_value());
}

TEST_CASE("speed-up is the ratio of recorded timings") {
  const auto year = small_year(600, 10);
  const auto oracle = StabilityOracle::damping(
      DampingCoefficients::standard(year.informative), year.points.dimension());
  const auto r = compare_full_vs_fast(year.points, oracle, small_config());
  REQUIRE(r.timing.full_scan_s.has_value());
  CHECK(*r.speedup == doctest::Approx(*r.timing.full_scan_s / r.timing.fast_total_s()));
  for (const auto& s : r.validation->samples) {
    const auto row = static_cast<std::size_t>(s.hour);
    CHECK(std::find(r.features.training_rows.begin(), r.features.training_rows.end(), row) ==
          r.features.training_rows.end());
  }
}

TEST_CASE("sample larger than the data is rejected") {
  const auto year = small_year(100, 11);
  const auto oracle = StabilityOracle::damping(
      DampingCoefficients::standard(year.informative), year.points.dimension());
  auto cfg = small_config();
  cfg.sample_size = 101;
  CHECK_THROWS_AS(fast_scan(year.points, oracle, cfg), ValidationError);
}

}  // TEST_SUITE
