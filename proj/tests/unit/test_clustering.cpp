#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "gridscan/clustering.hpp"
#include "gridscan/error.hpp"
#include "support.hpp"

using namespace gridscan;

namespace {

Matrix rows_of(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(0, rows.begin()->size());
  for (const auto& r : rows) m.push_row(std::vector<double>(r));
  return m;
}

// Brute-force nearest centroid, scanning every centroid in index order.
std::size_t brute_nearest(std::span<const double> x, const Matrix& c,
                          const std::vector<double>& w) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < c.rows(); ++j) {
    double d = 0.0;
    for (std::size_t a = 0; a < x.size(); ++a) d += w[a] * std::pow(x[a] - c(j, a), 2.0);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

// Three tight Gaussian blobs in 2-D.
Matrix blobs(std::size_t per_blob, double spread, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, spread);
  const double centers[3][2] = {{-0.6, -0.6}, {0.6, -0.5}, {0.0, 0.7}};
  Matrix m(0, 2);
  for (const auto& c : centers) {
    for (std::size_t i = 0; i < per_blob; ++i) {
      m.push_row(std::vector<double>{c[0] + n(rng), c[1] + n(rng)});
    }
  }
  return m;
}

Particle particle_at(const Matrix& position, const Matrix& velocity) {
  Particle p;
  p.position = position;
  p.velocity = velocity;
  p.best_position = position;
  return p;
}

}  // namespace

TEST_SUITE("clustering") {

TEST_CASE("weighted distance examples") {
  const DistanceWeights unit({1.0, 1.0});
  CHECK(weighted_distance(std::vector<double>{0, 0}, std::vector<double>{3, 4}, unit) == 5.0);
  const DistanceWeights w({4.0, 0.0});
  CHECK(weighted_distance(std::vector<double>{1, 7}, std::vector<double>{0, -2}, w) == 2.0);
  CHECK_THROWS_AS(weighted_distance(std::vector<double>{1}, std::vector<double>{1, 2}, unit),
                  ValidationError);
}

TEST_CASE("weighted distance is a pseudo-metric") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.0, 2.0);
  for (int t = 0; t < 300; ++t) {
    std::vector<double> wv(5);
    for (auto& v : wv) v = pos(rng);
    const DistanceWeights w(wv);
    std::vector<double> x(5), y(5), z(5);
    for (std::size_t i = 0; i < 5; ++i) {
      x[i] = u(rng);
      y[i] = u(rng);
      z[i] = u(rng);
    }
    const double dxy = weighted_distance(x, y, w);
    CHECK(dxy >= 0.0);
    CHECK(weighted_distance(x, x, w) == 0.0);
    CHECK(dxy == weighted_distance(y, x, w));
    CHECK(weighted_distance(x, z, w) <= dxy + weighted_distance(y, z, w) + 1e-12);
  }
}

TEST_CASE("distance weights are validated") {
  CHECK_THROWS_AS(DistanceWeights({0.0, 0.0}), ValidationError);
  CHECK_THROWS_AS(DistanceWeights({1.0, -0.1}), ValidationError);
  CHECK_THROWS_AS(DistanceWeights({std::nan(""), 1.0}), ValidationError);
  const auto w = DistanceWeights::from_adjusted(std::vector<double>{0.5, -0.2, 0.0, 1.0});
  CHECK(w[1] == 0.0);
  CHECK(w[0] == 0.5);
  CHECK(std::vector<std::size_t>(w.active().begin(), w.active().end()) ==
        std::vector<std::size_t>{0, 3});
}

TEST_CASE("centroid and fitness examples") {
  const auto pts = rows_of({{0, 0}, {2, 0}, {0, 2}, {2, 2}});
  CHECK(centroid_of(pts) == std::vector<double>{1.0, 1.0});
  const auto data = rows_of({{0, 0}, {2, 0}, {10, 10}});
  const auto centroids = rows_of({{1, 0}, {10, 10}});
  const std::vector<std::size_t> asg = {0, 0, 1};
  const auto w = DistanceWeights::uniform(2);
  // Cluster means 1 and 0.
  CHECK(smse(data, centroids, asg, w) == 0.5);
  CHECK(sum_squared_error(data, centroids, asg, w) == 2.0);
  const std::vector<std::size_t> hollow = {0, 0, 0};
  CHECK_THROWS_AS(smse(data, centroids, hollow, w), ValidationError);
  CHECK(smse_nonempty(data, centroids, hollow, w) ==
        doctest::Approx((1.0 + 1.0 + std::sqrt(81.0 + 100.0)) / 3.0));
}

TEST_CASE("k-means on two separated pairs") {
  const auto data = rows_of({{0.0}, {0.1}, {0.9}, {1.0}});
  const auto r = kmeans(data, rows_of({{0.0}, {0.1}}), DistanceWeights::uniform(1));
  CHECK(r.converged);
  CHECK(r.model.assignment == std::vector<std::size_t>{0, 0, 1, 1});
  CHECK(r.model.centroids(0, 0) == doctest::Approx(0.05));
  CHECK(r.model.centroids(1, 0) == doctest::Approx(0.95));
  CHECK(r.empty_clusters.empty());
}

TEST_CASE("k-means with k equal to the data size is exact") {
  const auto data = testing::random_matrix(12, 3, 5);
  const auto r = kmeans(data, data, DistanceWeights::uniform(3));
  CHECK(r.model.smse == 0.0);
  CHECK(r.iterations == 2);
}

TEST_CASE("k-means preconditions") {
  const auto data = testing::random_matrix(3, 2, 1);
  CHECK_THROWS_AS(kmeans(data, testing::random_matrix(4, 2, 2), DistanceWeights::uniform(2)),
                  ValidationError);
  CHECK_THROWS_AS(kmeans(data, Matrix(0, 2), DistanceWeights::uniform(2)), ValidationError);
  std::mt19937_64 rng(0);
  CHECK_THROWS_AS(random_initial_centroids(data, 4, rng), ValidationError);
}

TEST_CASE("equidistant points go to the lowest centroid index") {
  const auto data = rows_of({{0.0}});
  const auto c = rows_of({{1.0}, {-1.0}});
  CHECK(assign_nearest(data, c, DistanceWeights::uniform(1)).cluster[0] == 0);
  const auto c2 = rows_of({{-1.0}, {1.0}});
  CHECK(assign_nearest(data, c2, DistanceWeights::uniform(1)).cluster[0] == 0);
}

TEST_CASE("k-means objective never increases") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto data = testing::random_matrix(200, 3, seed);
    std::mt19937_64 rng(seed);
    const DistanceWeights w({1.0, 0.3, 2.0});
    const auto r = kmeans(data, random_initial_centroids(data, 8, rng), w);
    for (std::size_t i = 1; i < r.sse_trace.size(); ++i) {
      CHECK(r.sse_trace[i] <= r.sse_trace[i - 1] * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("pruned assignment matches brute force") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const auto data = testing::random_matrix(400, 4, seed);
    std::mt19937_64 rng(100 + seed);
    const std::size_t k = (seed % 2 == 0) ? 17 : 60;
    const auto c = random_initial_centroids(data, k, rng);
    const std::vector<double> wv = {1.0, 0.0, 0.5, 2.0};
    const DistanceWeights w(wv);
    std::vector<std::size_t> hint(data.rows());
    for (auto& h : hint) h = rng() % k;
    const auto plain = assign_nearest(data, c, w);
    const auto hinted = assign_nearest(data, c, w, hint);
    CHECK(plain.cluster == hinted.cluster);
    for (std::size_t i = 0; i < data.rows(); ++i) {
      CHECK(plain.cluster[i] == brute_nearest(data.row(i), c, wv));
    }
  }
}

TEST_CASE("assignment with more than 2048 centroids matches brute force") {
  const auto data = testing::random_matrix(2500, 2, 77);
  Matrix c(0, 2);
  for (std::size_t i = 0; i < 2100; ++i) c.push_row(data.row(i));
  const std::vector<double> wv = {1.0, 3.0};
  const auto got = assign_nearest(data, c, DistanceWeights(wv));
  for (std::size_t i = 0; i < data.rows(); i += 7) {
    CHECK(got.cluster[i] == brute_nearest(data.row(i), c, wv));
  }
}

TEST_CASE("zero-weight dimensions have no effect") {
  auto data = testing::random_matrix(150, 3, 8);
  auto other = data;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t i = 0; i < other.rows(); ++i) other(i, 1) = u(rng);
  const DistanceWeights w({1.0, 0.0, 0.7});
  Matrix start(0, 3);
  for (std::size_t i = 0; i < 6; ++i) start.push_row(data.row(i * 20));
  const auto a = kmeans(data, start, w);
  const auto b = kmeans(other, start, w);
  CHECK(a.model.assignment == b.model.assignment);
  CHECK(a.smse_trace == b.smse_trace);
}

TEST_CASE("one-dimensional two-cluster k-means reaches a locally optimal split") {
  // In 1-D every Lloyd fixed point is a contiguous split at which no point is
  // closer to the other mean; check against exhaustive enumeration.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto data = testing::random_matrix(9, 1, seed);
    std::sort(data.data().begin(), data.data().end());
    const auto r = kmeans(data, rows_of({{data(0, 0)}, {data(8, 0)}}),
                          DistanceWeights::uniform(1));
    REQUIRE(r.converged);
    bool matches_a_fixed_point = false;
    for (std::size_t cut = 1; cut < 9; ++cut) {
      double m0 = 0.0, m1 = 0.0;
      for (std::size_t i = 0; i < cut; ++i) m0 += data(i, 0);
      for (std::size_t i = cut; i < 9; ++i) m1 += data(i, 0);
      m0 /= static_cast<double>(cut);
      m1 /= static_cast<double>(9 - cut);
      bool stable = true;
      for (std::size_t i = 0; i < 9; ++i) {
        const bool left = std::abs(data(i, 0) - m0) <= std::abs(data(i, 0) - m1);
        stable = stable && (left == (i < cut));
      }
      if (!stable) continue;
      std::vector<std::size_t> expect(9);
      for (std::size_t i = 0; i < 9; ++i) expect[i] = i < cut ? 0 : 1;
      matches_a_fixed_point = matches_a_fixed_point || expect == r.model.assignment;
    }
    CHECK(matches_a_fixed_point);
  }
}

TEST_CASE("empty clusters are reported and removed") {
  const auto data = rows_of({{0.0}, {0.1}});
  const auto r = kmeans(data, rows_of({{0.0}, {5.0}}), DistanceWeights::uniform(1));
  CHECK(r.empty_clusters == std::vector<std::size_t>{1});
  auto model = r.model;
  CHECK(remove_empty_clusters(model) == 1);
  CHECK(model.k() == 1);
  CHECK(model.assignment == std::vector<std::size_t>{0, 0});
}

TEST_CASE("inertia schedule endpoints") {
  PsoParams p;
  CHECK(inertia_weight(0, p) == 0.9);
  CHECK(inertia_weight(p.n_iter, p) == doctest::Approx(0.4));
  CHECK(inertia_weight(p.n_iter / 2, p) == doctest::Approx(0.65));
}

TEST_CASE("particle at the global best with zero velocity stays put") {
  const auto pos = rows_of({{0.2, -0.3}});
  auto p = particle_at(pos, Matrix(1, 2, 0.0));
  BoundingBox box{{-1.0, -1.0}, {1.0, 1.0}};
  update_particle(p, pos, 0.9, 1.5, 1.5, 0.7, 0.4, box);
  CHECK(p.position == pos);
  CHECK(p.velocity == Matrix(1, 2, 0.0));
}

TEST_CASE("velocity update by hand") {
  // v' = 0.5 * 2 + 1.5 * 1 * (3 - 1) + 1.5 * 0 * (4 - 1) = 4, x' = 5.
  auto p = particle_at(rows_of({{1.0}}), rows_of({{2.0}}));
  p.best_position = rows_of({{3.0}});
  BoundingBox wide{{-10.0}, {10.0}};
  update_particle(p, rows_of({{4.0}}), 0.5, 1.5, 1.5, 1.0, 0.0, wide);
  CHECK(p.velocity(0, 0) == 4.0);
  CHECK(p.position(0, 0) == 5.0);

  // v' = 1 * 2 + 1 * 1 * (3 - 1) + 1 * 1 * (3 - 1) = 6, then x is clamped.
  auto q = particle_at(rows_of({{1.0}}), rows_of({{2.0}}));
  q.best_position = rows_of({{3.0}});
  BoundingBox tight{{-1.0}, {1.0}};
  update_particle(q, rows_of({{3.0}}), 1.0, 1.0, 1.0, 1.0, 1.0, tight);
  CHECK(q.velocity(0, 0) == 6.0);
  CHECK(q.position(0, 0) == 1.0);
}

TEST_CASE("fitness variance examples") {
  CHECK(fitness_variance(std::vector<double>{0.3, 0.3, 0.3}) == 0.0);
  // Deviations +-1, normalizer 1.
  CHECK(fitness_variance(std::vector<double>{0.0, 2.0}) == 1.0);
  // Deviations +-0.1 stay unnormalized.
  CHECK(fitness_variance(std::vector<double>{0.4, 0.6}) == doctest::Approx(0.01));
  // Large deviations are scaled by the largest one.
  CHECK(fitness_variance(std::vector<double>{-10.0, 10.0}) == 1.0);
}

TEST_CASE("mutation keeps g_best unless the mutant is no worse") {
  const auto data = blobs(30, 0.05, 3);
  const auto w = DistanceWeights::uniform(2);
  PsoParams params;
  std::mt19937_64 rng(1);
  auto swarm = init_swarm(data, w, 3, params, rng);
  const auto before = swarm.gbest;
  const double fit = swarm.gbest_fitness;

  const std::vector<double> zero(swarm.gbest.data().size(), 0.0);
  CHECK(mutate_gbest(swarm, data, w, zero));
  CHECK(swarm.gbest == before);
  CHECK(swarm.gbest_fitness == fit);

  // Shrinking every coordinate to zero collapses all centroids onto one point.
  const std::vector<double> collapse(swarm.gbest.data().size(), -2.0);
  const bool accepted = mutate_gbest(swarm, data, w, collapse);
  CHECK(swarm.gbest_fitness <= fit);
  if (!accepted) CHECK(swarm.gbest == before);
  CHECK(swarm.mutations_attempted == 2);
}

TEST_CASE("mutation probability follows the variance threshold") {
  const auto data = blobs(20, 0.05, 4);
  const auto w = DistanceWeights::uniform(2);
  PsoParams params;
  std::mt19937_64 rng(2);
  auto swarm = init_swarm(data, w, 3, params, rng);
  for (auto& p : swarm.particles) p.fitness = 0.5;
  auto out = mutation_check(swarm, data, w, params, rng);
  CHECK(out.variance == 0.0);
  CHECK(out.probability == params.p0);
  swarm.particles[0].fitness = 5.0;
  out = mutation_check(swarm, data, w, params, rng);
  CHECK(out.probability == 0.0);
  CHECK_FALSE(out.attempted);
}

TEST_CASE("g_best fitness never increases") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto data = testing::random_matrix(300, 3, seed);
    PsoParams params;
    params.seed = seed;
    AdaptiveParams adapt;
    adapt.eps_d = 0.4;
    adapt.eps_c = 0.05;
    const auto r = self_adaptive_pso_kmeans(data, DistanceWeights::uniform(3), params, adapt);
    REQUIRE(r.gbest_history.size() == params.n_iter + 1);
    for (std::size_t i = 1; i < r.gbest_history.size(); ++i) {
      CHECK(r.gbest_history[i] <= r.gbest_history[i - 1]);
    }
  }
}

TEST_CASE("far points seed new centroids") {
  ClusterModel model;
  model.centroids = rows_of({{0.0}});
  const auto data = rows_of({{0.0}, {1.0}, {1.05}, {-2.0}});
  model.assignment = {0, 0, 0, 0};
  const auto w = DistanceWeights::uniform(1);
  const auto seeds = split_far_points(data, model, w, 0.5);
  // Farthest first: -2, then 1.05; 1.0 lies within 0.5 of the 1.05 seed.
  REQUIRE(seeds.rows() == 2);
  CHECK(seeds(0, 0) == -2.0);
  CHECK(seeds(1, 0) == 1.05);
  CHECK(split_far_points(data, model, w, 0.5, 1).rows() == 1);
  CHECK(split_far_points(data, model, w, 3.0).rows() == 0);
}

TEST_CASE("close centroids merge into their weighted mean") {
  auto c = rows_of({{0.0}, {0.01}, {1.0}});
  std::vector<std::size_t> counts = {3, 1, 5};
  CHECK(merge_close_centroids(c, counts, DistanceWeights::uniform(1), 0.05) == 1);
  REQUIRE(c.rows() == 2);
  CHECK(c(0, 0) == doctest::Approx(0.0025));
  CHECK(counts == std::vector<std::size_t>{4, 5});

  // The globally closest pair merges first.
  auto d = rows_of({{0.0}, {0.04}, {0.07}});
  std::vector<std::size_t> ones = {1, 1, 1};
  CHECK(merge_close_centroids(d, ones, DistanceWeights::uniform(1), 0.035) == 1);
  CHECK(d(0, 0) == 0.0);
  CHECK(d(1, 0) == doctest::Approx(0.055));
}

TEST_CASE("refinement separates blobs from a single centroid") {
  const auto data = blobs(40, 0.03, 5);
  AdaptiveParams adapt;
  adapt.eps_d = 0.3;
  adapt.eps_c = 0.1;
  const auto r = refine_clusters(data, rows_of({{0.0, 0.0}}), DistanceWeights::uniform(2), adapt);
  CHECK(r.converged);
  CHECK(r.model.k() == 3);
}

TEST_CASE("refinement merges duplicated starting centroids") {
  const auto data = blobs(40, 0.03, 6);
  Matrix start(0, 2);
  for (std::size_t b = 0; b < 3; ++b) {
    start.push_row(data.row(b * 40));
    start.push_row(data.row(b * 40 + 1));
  }
  AdaptiveParams adapt;
  adapt.eps_d = 0.3;
  adapt.eps_c = 0.2;
  const auto r = refine_clusters(data, start, DistanceWeights::uniform(2), adapt);
  CHECK(r.converged);
  CHECK(r.model.k() == 3);
}

TEST_CASE("converged refinement satisfies both distance bounds") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto data = testing::random_matrix(400, 3, 40 + seed);
    const DistanceWeights w({1.0, 0.5, 0.2});
    PsoParams pso;
    pso.seed = seed;
    AdaptiveParams adapt;
    adapt.eps_d = 0.35;
    adapt.eps_c = 0.05;
    const auto r = self_adaptive_pso_kmeans(data, w, pso, adapt);
    REQUIRE(r.converged);
    const auto& m = r.model;
    for (std::size_t i = 0; i < data.rows(); ++i) {
      CHECK(weighted_distance(data.row(i), m.centroids.row(m.assignment[i]), w) <= 0.35);
    }
    for (std::size_t a = 0; a < m.k(); ++a) {
      for (std::size_t b = a + 1; b < m.k(); ++b) {
        CHECK(weighted_distance(m.centroids.row(a), m.centroids.row(b), w) >= 0.05);
      }
    }
    for (auto s : m.cluster_sizes()) CHECK(s > 0);
  }
}

TEST_CASE("splitting past one centroid per point still refines") {
  // One starting centroid plus a seed at every point exceeds |R|.
  const auto data = testing::random_matrix(20, 2, 12);
  AdaptiveParams adapt;
  adapt.eps_d = 1e-12;
  adapt.eps_c = 1e-13;
  const auto r = refine_clusters(data, rows_of({{5.0, 5.0}}), DistanceWeights::uniform(2), adapt);
  CHECK(r.converged);
  CHECK(r.model.k() == 20);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(r.model.centroids.row(r.model.assignment[i])[0] == data(i, 0));
  }
}

TEST_CASE("outer pass budget exhaustion is flagged") {
  const auto data = testing::random_matrix(300, 2, 3);
  AdaptiveParams adapt;
  adapt.eps_d = 0.05;
  adapt.eps_c = 0.01;
  adapt.max_outer = 1;
  const auto r = refine_clusters(data, rows_of({{0.0, 0.0}}), DistanceWeights::uniform(2), adapt);
  CHECK_FALSE(r.converged);
  CHECK(r.outer_passes == 1);
}

TEST_CASE("one new centroid per pass still converges") {
  const auto data = blobs(30, 0.03, 7);
  AdaptiveParams adapt;
  adapt.eps_d = 0.3;
  adapt.eps_c = 0.1;
  adapt.max_new_per_pass = 1;
  const auto r = refine_clusters(data, rows_of({{0.0, 0.0}}), DistanceWeights::uniform(2), adapt);
  CHECK(r.converged);
  CHECK(r.model.k() == 3);
  for (const auto& p : r.passes) CHECK(p.split <= 1);
}

TEST_CASE("parameter validation") {
  AdaptiveParams a;
  a.eps_c = 0.5;
  a.eps_d = 0.4;
  CHECK_THROWS_AS(a.validate(), ValidationError);
  PsoParams p;
  p.swarm_size = 0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  CHECK(default_k_init(8760) == 67);
  CHECK(default_k_init(1) == 1);
}

}  // TEST_SUITE
