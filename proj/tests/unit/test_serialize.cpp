#include <doctest.h>

#include <cmath>
#include <limits>

#include "gridscan/error.hpp"
#include "gridscan/serialize.hpp"
#include "support.hpp"

using namespace gridscan;

TEST_SUITE("serialize") {

TEST_CASE("trace CSV round-trips, failures included") {
  StabilityTrace t;
  t.hours = {0, 1, 5};
  t.lambda = {0.1234567890123, std::numeric_limits<double>::quiet_NaN(), -3e-7};
  t.failed_hours = {1};
  const auto text = trace_csv(t);
  CHECK(text.rfind("hour,lambda\n", 0) == 0);
  const auto back = parse_trace_csv(text);
  CHECK(back.hours == t.hours);
  CHECK(back.lambda[0] == t.lambda[0]);
  CHECK(std::isnan(back.lambda[1]));
  CHECK(back.lambda[2] == t.lambda[2]);
  CHECK(back.failed_hours == std::vector<std::int64_t>{1});
}

TEST_CASE("malformed trace CSV is rejected") {
  CHECK_THROWS_AS(parse_trace_csv(""), ParseError);
  CHECK_THROWS_AS(parse_trace_csv("h,l\n0,1\n"), ParseError);
  CHECK_THROWS_AS(parse_trace_csv("hour,lambda\n0\n"), ParseError);
  CHECK_THROWS_AS(parse_trace_csv("hour,lambda\nx,1\n"), ParseError);
  CHECK_THROWS_AS(parse_trace_csv("hour,lambda\n0,abc\n"), ParseError);
}

TEST_CASE("feature report round-trips through JSON") {
  FeatureReport r;
  r.names = {"a", "b"};
  r.weight = {0.2, -0.1};
  r.rank = {1, 2};
  r.variance = {0.3, 0.4};
  r.adjusted_weight = {1.0, -0.2};
  r.adjusted_rank = {1, 2};
  r.scale = 3.5;
  r.training_size = 150;
  r.converged = true;
  r.training_rows = {4, 9};
  r.training_lambda = {0.1, 0.2};
  const auto back = feature_report_from_json(to_json(r));
  CHECK(back.names == r.names);
  CHECK(back.weight == r.weight);
  CHECK(back.adjusted_rank == r.adjusted_rank);
  CHECK(back.scale == 3.5);
  CHECK(back.training_rows == r.training_rows);
  CHECK(back.converged);
  const auto csv = feature_report_csv(r);
  CHECK(csv.rfind("feature,initial_weight,initial_rank,adjusted_weight,adjusted_rank\n", 0) == 0);
}

TEST_CASE("cluster model round-trips through JSON") {
  ClusterModel m;
  m.centroids = Matrix(2, 2, std::vector<double>{0.1, 0.2, -0.3, 0.4});
  m.assignment = {0, 1, 1};
  m.weights = {1.0, 0.5};
  m.smse = 0.25;
  const auto back = cluster_model_from_json(to_json(m));
  CHECK(back.centroids == m.centroids);
  CHECK(back.assignment == m.assignment);
  CHECK(back.weights == m.weights);
  auto j = to_json(m);
  j["k"] = 3;
  CHECK_THROWS_AS(cluster_model_from_json(j), ParseError);
}

TEST_CASE("report JSON without timing is reproducible") {
  ScanReport r;
  r.hours = {0, 1};
  r.lambda_hat = {0.1, 0.1};
  r.k_final = 1;
  r.timing.clustering_s = 1.5;
  const auto a = to_json(r, false);
  r.timing.clustering_s = 9.0;
  CHECK(to_json(r, false) == a);
  CHECK_FALSE(a.contains("timing"));
  CHECK(to_json(r, true)["timing"]["clustering_s"] == 9.0);
}

TEST_CASE("histogram CSV layout") {
  Validation v;
  v.histogram = {{0.0, 1.0, 3}, {1.0, 2.0, 1}};
  CHECK(histogram_csv(v) == "bin_low,bin_high,count\n0,1,3\n1,2,1\n");
}

}  // TEST_SUITE
