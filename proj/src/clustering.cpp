#include "gridscan/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "gridscan/error.hpp"
#include "gridscan/parallel.hpp"

namespace gridscan {

DistanceWeights::DistanceWeights(std::vector<double> weights)
    : weights_(std::move(weights)) {
  for (std::size_t d = 0; d < weights_.size(); ++d) {
    const double v = weights_[d];
    if (!std::isfinite(v) || v < 0.0) {
      throw ValidationError("distance weight " + std::to_string(d) +
                            " must be finite and non-negative");
    }
    if (v > 0.0) active_.push_back(d);
  }
  if (active_.empty()) {
    throw ValidationError("at least one distance weight must be positive");
  }
}

DistanceWeights DistanceWeights::uniform(std::size_t dimension) {
  return DistanceWeights(std::vector<double>(dimension, 1.0));
}

DistanceWeights DistanceWeights::from_adjusted(std::span<const double> adjusted) {
  std::vector<double> w(adjusted.size());
  for (std::size_t d = 0; d < w.size(); ++d) w[d] = std::max(adjusted[d], 0.0);
  return DistanceWeights(std::move(w));
}

double weighted_distance_squared(std::span<const double> x,
                                 std::span<const double> y,
                                 const DistanceWeights& w) noexcept {
  double s = 0.0;
  for (std::size_t d : w.active()) {
    const double diff = x[d] - y[d];
    s += w[d] * (diff * diff);
  }
  return s;
}

double weighted_distance(std::span<const double> x, std::span<const double> y,
                         const DistanceWeights& w) {
  if (x.size() != y.size() || x.size() != w.size()) {
    throw ValidationError("weighted_distance: dimension mismatch (" +
                          std::to_string(x.size()) + ", " +
                          std::to_string(y.size()) + ", " +
                          std::to_string(w.size()) + ")");
  }
  return std::sqrt(weighted_distance_squared(x, y, w));
}

std::vector<double> centroid_of(const Matrix& points) {
  if (points.rows() == 0) throw ValidationError("centroid_of: no points");
  std::vector<std::size_t> all(points.rows());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return centroid_of(points, all);
}

std::vector<double> centroid_of(const Matrix& data,
                                std::span<const std::size_t> members) {
  if (members.empty()) throw ValidationError("centroid_of: no points");
  std::vector<double> c(data.cols(), 0.0);
  for (auto r : members) {
    const auto x = data.row(r);
    for (std::size_t d = 0; d < c.size(); ++d) c[d] += x[d];
  }
  for (auto& v : c) v /= static_cast<double>(members.size());
  return c;
}

std::vector<std::size_t> ClusterModel::cluster_sizes() const {
  std::vector<std::size_t> sizes(k(), 0);
  for (auto a : assignment) ++sizes[a];
  return sizes;
}

namespace {

void check_assignment(const Matrix& data, const Matrix& centroids,
                      std::span<const std::size_t> assignment,
                      const DistanceWeights& w) {
  if (assignment.size() != data.rows()) {
    throw ValidationError("assignment length differs from point count");
  }
  if (centroids.cols() != data.cols() || w.size() != data.cols()) {
    throw ValidationError("centroid/weight dimension mismatch");
  }
  for (auto a : assignment) {
    if (a >= centroids.rows()) {
      throw ValidationError("assignment refers to a missing centroid");
    }
  }
}

// Per-cluster mean distance, averaged over clusters. `require_nonempty`
// rejects empty clusters instead of skipping them.
double mean_of_cluster_means(const std::vector<double>& sums,
                             const std::vector<std::size_t>& counts,
                             bool require_nonempty) {
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t j = 0; j < sums.size(); ++j) {
    if (counts[j] == 0) {
      if (require_nonempty) {
        throw ValidationError("smse: cluster " + std::to_string(j) +
                              " is empty");
      }
      continue;
    }
    total += sums[j] / static_cast<double>(counts[j]);
    ++used;
  }
  return used ? total / static_cast<double>(used) : 0.0;
}

double smse_impl(const Matrix& data, const Matrix& centroids,
                 std::span<const std::size_t> assignment,
                 const DistanceWeights& w, bool require_nonempty) {
  check_assignment(data, centroids, assignment, w);
  std::vector<double> sums(centroids.rows(), 0.0);
  std::vector<std::size_t> counts(centroids.rows(), 0);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const auto a = assignment[i];
    sums[a] += std::sqrt(
        weighted_distance_squared(data.row(i), centroids.row(a), w));
    ++counts[a];
  }
  return mean_of_cluster_means(sums, counts, require_nonempty);
}

double smse_from_assignment(const Assignment& asg, std::size_t k) {
  std::vector<double> sums(k, 0.0);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < asg.cluster.size(); ++i) {
    sums[asg.cluster[i]] += std::sqrt(asg.distance_squared[i]);
    ++counts[asg.cluster[i]];
  }
  return mean_of_cluster_means(sums, counts, false);
}

// Centroid-distance tables above this size are not worth their memory; the
// assignment falls back to a full scan with partial-distance cut-off.
constexpr std::size_t kSortedCentroidLimit = 2048;

}  // namespace

double smse(const Matrix& data, const Matrix& centroids,
            std::span<const std::size_t> assignment, const DistanceWeights& w) {
  return smse_impl(data, centroids, assignment, w, true);
}

double smse(const ClusterModel& model, const OperatingPointSet& data) {
  return smse(data.values(), model.centroids, model.assignment,
              DistanceWeights(model.weights));
}

double smse_nonempty(const Matrix& data, const Matrix& centroids,
                     std::span<const std::size_t> assignment,
                     const DistanceWeights& w) {
  return smse_impl(data, centroids, assignment, w, false);
}

double sum_squared_error(const Matrix& data, const Matrix& centroids,
                         std::span<const std::size_t> assignment,
                         const DistanceWeights& w) {
  check_assignment(data, centroids, assignment, w);
  double total = 0.0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    total += weighted_distance_squared(data.row(i), centroids.row(assignment[i]),
                                       w);
  }
  return total;
}

Assignment assign_nearest(const Matrix& data, const Matrix& centroids,
                          const DistanceWeights& w,
                          std::span<const std::size_t> hint) {
  const std::size_t k = centroids.rows();
  const std::size_t n = data.rows();
  if (k == 0) throw ValidationError("assign_nearest: no centroids");
  if (centroids.cols() != data.cols() || w.size() != data.cols()) {
    throw ValidationError("assign_nearest: dimension mismatch");
  }
  if (!hint.empty() && hint.size() != n) {
    throw ValidationError("assign_nearest: hint length differs from data");
  }
  const auto active = w.active();

  // Squared distance that stops early once it exceeds `bound`; the partial
  // sum of non-negative terms never decreases, so a cut value is still
  // strictly greater than `bound`.
  auto dist2 = [&](std::span<const double> x, std::span<const double> c,
                   double bound) {
    double s = 0.0;
    for (std::size_t d : active) {
      const double diff = x[d] - c[d];
      s += w[d] * (diff * diff);
      if (s > bound) return s;
    }
    return s;
  };

  // Sorted centroid neighborhoods: if d(c_a, c_j) > 2 d(x, c_a), then
  // d(x, c_j) > d(x, c_a), so the scan around c_a can stop.
  const bool pruned = k > 1 && k <= kSortedCentroidLimit;
  std::vector<double> between;
  std::vector<std::uint32_t> order;
  if (pruned) {
    between.assign(k * k, 0.0);
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = a + 1; b < k; ++b) {
        const double d = std::sqrt(
            weighted_distance_squared(centroids.row(a), centroids.row(b), w));
        between[a * k + b] = d;
        between[b * k + a] = d;
      }
    }
    order.resize(k * (k - 1));
    parallel_for(k, [&](std::size_t a) {
      auto first = order.begin() + static_cast<std::ptrdiff_t>(a * (k - 1));
      std::uint32_t pos = 0;
      for (std::uint32_t j = 0; j < k; ++j) {
        if (j != a) first[pos++] = j;
      }
      const double* row = between.data() + a * k;
      std::sort(first, first + static_cast<std::ptrdiff_t>(k - 1),
                [row](std::uint32_t x, std::uint32_t y) {
                  return row[x] < row[y] || (row[x] == row[y] && x < y);
                });
    });
  }

  Assignment out;
  out.cluster.resize(n);
  out.distance_squared.resize(n);
  constexpr std::size_t kChunk = 256;
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  parallel_for(chunks, [&](std::size_t chunk) {
    const std::size_t end = std::min(n, (chunk + 1) * kChunk);
    for (std::size_t i = chunk * kChunk; i < end; ++i) {
      const auto x = data.row(i);
      std::size_t start = hint.empty() ? 0 : hint[i];
      if (start >= k) start = 0;
      std::size_t best = start;
      double best_d2 = dist2(x, centroids.row(start),
                             std::numeric_limits<double>::infinity());
      auto consider = [&](std::size_t j) {
        const double s = dist2(x, centroids.row(j), best_d2);
        if (s < best_d2 || (s == best_d2 && j < best)) {
          best = j;
          best_d2 = s;
        }
      };
      if (pruned) {
        const double limit = 2.0 * std::sqrt(best_d2) * (1.0 + 1e-9) + 1e-12;
        const double* row = between.data() + start * k;
        const std::uint32_t* nbrs = order.data() + start * (k - 1);
        for (std::size_t p = 0; p < k - 1; ++p) {
          const std::uint32_t j = nbrs[p];
          if (row[j] > limit) break;
          consider(j);
        }
      } else {
        for (std::size_t j = 0; j < k; ++j) {
          if (j != start) consider(j);
        }
      }
      out.cluster[i] = best;
      out.distance_squared[i] = best_d2;
    }
  });
  return out;
}

namespace {

void update_means(const Matrix& data, const std::vector<std::size_t>& cluster,
                  Matrix& centroids) {
  const std::size_t k = centroids.rows();
  const std::size_t dim = data.cols();
  Matrix sums(k, dim);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    auto s = sums.row(cluster[i]);
    const auto x = data.row(i);
    for (std::size_t d = 0; d < dim; ++d) s[d] += x[d];
    ++counts[cluster[i]];
  }
  for (std::size_t j = 0; j < k; ++j) {
    if (counts[j] == 0) continue;
    auto c = centroids.row(j);
    const auto s = sums.row(j);
    for (std::size_t d = 0; d < dim; ++d) {
      c[d] = s[d] / static_cast<double>(counts[j]);
    }
  }
}

}  // namespace

KMeansResult kmeans(const Matrix& data, Matrix initial, const DistanceWeights& w,
                    std::size_t max_iterations,
                    std::span<const std::size_t> hint) {
  if (initial.rows() == 0) throw ValidationError("kmeans: k must be >= 1");
  if (initial.rows() > data.rows()) {
    throw ValidationError("kmeans: k = " + std::to_string(initial.rows()) +
                          " exceeds the " + std::to_string(data.rows()) +
                          " data points");
  }
  if (initial.cols() != data.cols() || w.size() != data.cols()) {
    throw ValidationError("kmeans: dimension mismatch");
  }
  if (max_iterations == 0) {
    throw ValidationError("kmeans: max_iterations must be >= 1");
  }

  KMeansResult result;
  Matrix centroids = std::move(initial);
  auto record = [&](const Assignment& asg) {
    result.sse_trace.push_back(std::accumulate(
        asg.distance_squared.begin(), asg.distance_squared.end(), 0.0));
    result.smse_trace.push_back(smse_from_assignment(asg, centroids.rows()));
  };

  Assignment current = assign_nearest(data, centroids, w, hint);
  record(current);
  result.iterations = 1;
  while (result.iterations < max_iterations) {
    update_means(data, current.cluster, centroids);
    Assignment next = assign_nearest(data, centroids, w, current.cluster);
    ++result.iterations;
    record(next);
    const bool fixed = next.cluster == current.cluster;
    current = std::move(next);
    if (fixed) {
      result.converged = true;
      break;
    }
  }

  result.model.centroids = std::move(centroids);
  result.model.assignment = std::move(current.cluster);
  result.model.weights.assign(w.values().begin(), w.values().end());
  result.model.smse = result.smse_trace.back();
  const auto sizes = result.model.cluster_sizes();
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    if (sizes[j] == 0) result.empty_clusters.push_back(j);
  }
  return result;
}

Matrix random_initial_centroids(const Matrix& data, std::size_t k,
                                std::mt19937_64& rng) {
  if (k == 0 || k > data.rows()) {
    throw ValidationError("random_initial_centroids: need 1 <= k <= |R|");
  }
  std::vector<std::size_t> rows(data.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  Matrix out(0, data.cols());
  // Partial Fisher-Yates: draw until k distinct values are found.
  for (std::size_t i = 0; i < rows.size() && out.rows() < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, rows.size() - 1);
    std::swap(rows[i], rows[pick(rng)]);
    const auto candidate = data.row(rows[i]);
    bool duplicate = false;
    for (std::size_t j = 0; j < out.rows() && !duplicate; ++j) {
      duplicate = std::equal(candidate.begin(), candidate.end(),
                             out.row(j).begin());
    }
    if (!duplicate) out.push_row(candidate);
  }
  if (out.rows() < k) {
    throw ValidationError("random_initial_centroids: fewer than k distinct "
                          "points");
  }
  return out;
}

std::size_t remove_empty_clusters(ClusterModel& model) {
  const auto sizes = model.cluster_sizes();
  std::vector<std::size_t> remap(sizes.size());
  Matrix kept(0, model.centroids.cols());
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    if (sizes[j] == 0) continue;
    remap[j] = kept.rows();
    kept.push_row(model.centroids.row(j));
  }
  const std::size_t removed = sizes.size() - kept.rows();
  if (removed == 0) return 0;
  for (auto& a : model.assignment) a = remap[a];
  model.centroids = std::move(kept);
  return removed;
}

BoundingBox BoundingBox::of(const Matrix& data) {
  BoundingBox box;
  if (data.rows() == 0) throw ValidationError("bounding box of empty data");
  box.lower.assign(data.row(0).begin(), data.row(0).end());
  box.upper = box.lower;
  for (std::size_t i = 1; i < data.rows(); ++i) {
    const auto x = data.row(i);
    for (std::size_t d = 0; d < x.size(); ++d) {
      box.lower[d] = std::min(box.lower[d], x[d]);
      box.upper[d] = std::max(box.upper[d], x[d]);
    }
  }
  return box;
}

void BoundingBox::clamp(std::span<double> point) const noexcept {
  for (std::size_t d = 0; d < point.size(); ++d) {
    point[d] = std::clamp(point[d], lower[d], upper[d]);
  }
}

void PsoParams::validate() const {
  if (swarm_size < 2) throw ValidationError("pso.swarm_size must be >= 2");
  if (n_iter < 1) throw ValidationError("pso.n_iter must be >= 1");
  if (!(c1 > 0.0) || !(c2 > 0.0)) throw ValidationError("pso.c1, pso.c2 must be > 0");
  if (!(w_min > 0.0) || !(w_max >= w_min)) {
    throw ValidationError("pso: need w_max >= w_min > 0");
  }
  if (!(p0 >= 0.0 && p0 <= 1.0)) throw ValidationError("pso.p0 must lie in [0, 1]");
  if (!(sigma_t2 >= 0.0)) throw ValidationError("pso.sigma_t2 must be >= 0");
  if (!(initial_velocity >= 0.0)) {
    throw ValidationError("pso.initial_velocity must be >= 0");
  }
}

double particle_fitness(const Matrix& data, const Matrix& centroids,
                        const DistanceWeights& w,
                        std::vector<std::size_t>* hint) {
  std::span<const std::size_t> h;
  if (hint && hint->size() == data.rows()) h = *hint;
  Assignment asg = assign_nearest(data, centroids, w, h);
  const double fitness = smse_from_assignment(asg, centroids.rows());
  if (hint) *hint = std::move(asg.cluster);
  return fitness;
}

double inertia_weight(std::size_t iter, const PsoParams& params) {
  return params.w_max - static_cast<double>(iter) *
                            (params.w_max - params.w_min) /
                            static_cast<double>(params.n_iter);
}

void update_particle(Particle& particle, const Matrix& gbest, double inertia,
                     double c1, double c2, double r1, double r2,
                     const BoundingBox& box) {
  auto& p = particle.position.data();
  auto& v = particle.velocity.data();
  const auto& pb = particle.best_position.data();
  const auto& gb = gbest.data();
  for (std::size_t e = 0; e < p.size(); ++e) {
    v[e] = inertia * v[e] + c1 * r1 * (pb[e] - p[e]) + c2 * r2 * (gb[e] - p[e]);
    p[e] += v[e];
  }
  for (std::size_t j = 0; j < particle.position.rows(); ++j) {
    box.clamp(particle.position.row(j));
  }
}

namespace {

void refresh_gbest(Swarm& swarm) {
  for (const auto& p : swarm.particles) {
    if (p.best_fitness < swarm.gbest_fitness) {
      swarm.gbest_fitness = p.best_fitness;
      swarm.gbest = p.best_position;
    }
  }
}

}  // namespace

Swarm init_swarm(const Matrix& data, const DistanceWeights& w, std::size_t k,
                 const PsoParams& params, std::mt19937_64& rng) {
  params.validate();
  Swarm swarm;
  swarm.box = BoundingBox::of(data);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  swarm.particles.resize(params.swarm_size);
  for (auto& p : swarm.particles) {
    p.position = random_initial_centroids(data, k, rng);
    p.velocity = Matrix(k, data.cols());
    for (std::size_t j = 0; j < k; ++j) {
      auto v = p.velocity.row(j);
      for (std::size_t d = 0; d < v.size(); ++d) {
        v[d] = params.initial_velocity *
               (swarm.box.upper[d] - swarm.box.lower[d]) * unit(rng);
      }
    }
    p.best_position = p.position;
  }
  parallel_for(swarm.particles.size(), [&](std::size_t i) {
    auto& p = swarm.particles[i];
    p.fitness = particle_fitness(data, p.position, w, &p.hint);
    p.best_fitness = p.fitness;
  });
  swarm.gbest_fitness = std::numeric_limits<double>::infinity();
  refresh_gbest(swarm);
  swarm.gbest_history.push_back(swarm.gbest_fitness);
  return swarm;
}

void pso_step(Swarm& swarm, const Matrix& data, const DistanceWeights& w,
              const PsoParams& params, std::size_t iter, std::mt19937_64& rng) {
  if (iter >= params.n_iter) {
    throw ValidationError("pso_step: iteration index beyond n_iter");
  }
  const double inertia = inertia_weight(iter, params);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& p : swarm.particles) {
    const double r1 = unit(rng);
    const double r2 = unit(rng);
    update_particle(p, swarm.gbest, inertia, params.c1, params.c2, r1, r2,
                    swarm.box);
  }
  parallel_for(swarm.particles.size(), [&](std::size_t i) {
    auto& p = swarm.particles[i];
    p.fitness = particle_fitness(data, p.position, w, &p.hint);
  });
  for (auto& p : swarm.particles) {
    if (p.fitness < p.best_fitness) {
      p.best_fitness = p.fitness;
      p.best_position = p.position;
    }
  }
  refresh_gbest(swarm);
}

double fitness_variance(std::span<const double> fitness) {
  if (fitness.empty()) return 0.0;
  const double n = static_cast<double>(fitness.size());
  const double mean = std::accumulate(fitness.begin(), fitness.end(), 0.0) / n;
  double spread = 0.0;
  for (double f : fitness) spread = std::max(spread, std::abs(f - mean));
  const double scale = std::max(1.0, spread);
  double var = 0.0;
  for (double f : fitness) {
    const double z = (f - mean) / scale;
    var += z * z;
  }
  return var / n;
}

bool mutate_gbest(Swarm& swarm, const Matrix& data, const DistanceWeights& w,
                  std::span<const double> eta) {
  if (eta.size() != swarm.gbest.data().size()) {
    throw ValidationError("mutate_gbest: one draw per coordinate required");
  }
  Matrix mutant = swarm.gbest;
  auto& m = mutant.data();
  for (std::size_t e = 0; e < m.size(); ++e) m[e] *= 1.0 + eta[e] / 2.0;
  for (std::size_t j = 0; j < mutant.rows(); ++j) swarm.box.clamp(mutant.row(j));
  const double fitness = particle_fitness(data, mutant, w);
  ++swarm.mutations_attempted;
  if (fitness > swarm.gbest_fitness) return false;
  swarm.gbest = std::move(mutant);
  swarm.gbest_fitness = fitness;
  ++swarm.mutations_accepted;
  return true;
}

MutationOutcome mutation_check(Swarm& swarm, const Matrix& data,
                               const DistanceWeights& w,
                               const PsoParams& params, std::mt19937_64& rng) {
  MutationOutcome out;
  std::vector<double> fitness;
  fitness.reserve(swarm.particles.size());
  for (const auto& p : swarm.particles) fitness.push_back(p.fitness);
  out.variance = fitness_variance(fitness);
  out.probability = out.variance < params.sigma_t2 ? params.p0 : 0.0;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (out.probability > unit(rng)) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> eta(swarm.gbest.data().size());
    for (auto& e : eta) e = normal(rng);
    out.attempted = true;
    out.accepted = mutate_gbest(swarm, data, w, eta);
  }
  return out;
}

void AdaptiveParams::validate() const {
  if (!(eps_c > 0.0)) throw ValidationError("adapt.eps_c must be > 0");
  if (!(eps_d > eps_c)) throw ValidationError("adapt: need eps_d > eps_c");
  if (max_outer < 1) throw ValidationError("adapt.max_outer must be >= 1");
  if (kmeans_iterations < 1) {
    throw ValidationError("adapt.kmeans_iterations must be >= 1");
  }
}

std::size_t default_k_init(std::size_t n_points) {
  return std::max<std::size_t>(
      1, static_cast<std::size_t>(
             std::ceil(std::sqrt(static_cast<double>(n_points) / 2.0))));
}

Matrix split_far_points(const Matrix& data, const ClusterModel& model,
                        const DistanceWeights& w, double eps_d,
                        std::size_t limit) {
  struct Far {
    double distance;
    std::size_t row;
  };
  std::vector<Far> far;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const double d =
        weighted_distance(data.row(i), model.centroids.row(model.assignment[i]), w);
    if (d > eps_d) far.push_back({d, i});
  }
  std::sort(far.begin(), far.end(), [](const Far& a, const Far& b) {
    return a.distance > b.distance || (a.distance == b.distance && a.row < b.row);
  });
  Matrix seeds(0, data.cols());
  const double eps2 = eps_d * eps_d;
  for (const auto& f : far) {
    if (limit != 0 && seeds.rows() >= limit) break;
    const auto x = data.row(f.row);
    bool covered = false;
    for (std::size_t s = 0; s < seeds.rows() && !covered; ++s) {
      covered = !(weighted_distance_squared(x, seeds.row(s), w) > eps2);
    }
    if (!covered) seeds.push_row(x);
  }
  return seeds;
}

std::size_t merge_close_centroids(Matrix& centroids,
                                  std::vector<std::size_t>& counts,
                                  const DistanceWeights& w, double eps_c) {
  if (counts.size() != centroids.rows()) {
    throw ValidationError("merge_close_centroids: one count per centroid");
  }
  const double eps2 = eps_c * eps_c;
  std::size_t merges = 0;
  while (centroids.rows() > 1) {
    const std::size_t k = centroids.rows();
    std::vector<double> row_best(k, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> row_partner(k, 0);
    parallel_for(k - 1, [&](std::size_t i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        const double d2 =
            weighted_distance_squared(centroids.row(i), centroids.row(j), w);
        if (d2 < row_best[i]) {
          row_best[i] = d2;
          row_partner[i] = j;
        }
      }
    });
    std::size_t bi = 0;
    for (std::size_t i = 1; i + 1 < k; ++i) {
      if (row_best[i] < row_best[bi]) bi = i;
    }
    if (!(row_best[bi] < eps2)) break;
    const std::size_t bj = row_partner[bi];
    const double ni = static_cast<double>(counts[bi]);
    const double nj = static_cast<double>(counts[bj]);
    auto ci = centroids.row(bi);
    const auto cj = centroids.row(bj);
    for (std::size_t d = 0; d < ci.size(); ++d) {
      ci[d] = (ni + nj) > 0.0 ? (ni * ci[d] + nj * cj[d]) / (ni + nj)
                              : 0.5 * (ci[d] + cj[d]);
    }
    counts[bi] += counts[bj];
    counts.erase(counts.begin() + static_cast<std::ptrdiff_t>(bj));
    centroids.erase_row(bj);
    ++merges;
  }
  return merges;
}

AdaptiveResult refine_clusters(const Matrix& data, Matrix initial,
                               const DistanceWeights& w,
                               const AdaptiveParams& adapt) {
  adapt.validate();
  AdaptiveResult result;
  Matrix centroids = std::move(initial);
  std::vector<std::size_t> hint;
  std::size_t best_violations = std::numeric_limits<std::size_t>::max();
  const double eps_d2 = adapt.eps_d * adapt.eps_d;

  for (std::size_t outer = 1; outer <= adapt.max_outer; ++outer) {
    // Splitting can leave more centroids than points; drop the ones that
    // attract nobody before k-means sees them.
    std::size_t pre_removed = 0;
    if (centroids.rows() > data.rows()) {
      ClusterModel probe;
      probe.centroids = std::move(centroids);
      probe.assignment = assign_nearest(data, probe.centroids, w).cluster;
      pre_removed = remove_empty_clusters(probe);
      centroids = std::move(probe.centroids);
      hint = std::move(probe.assignment);
    }
    KMeansResult run = kmeans(data, std::move(centroids), w,
                              adapt.kmeans_iterations, hint);
    if (outer == 1) result.first_iteration_smse = run.smse_trace.front();
    result.smse_trace.insert(result.smse_trace.end(), run.smse_trace.begin(),
                             run.smse_trace.end());

    OuterPassRecord rec;
    rec.k_before = run.model.k();
    rec.kmeans_iterations = run.iterations;
    ClusterModel model = std::move(run.model);
    rec.removed = pre_removed + remove_empty_clusters(model);
    model.smse = smse(data, model.centroids, model.assignment, w);
    rec.smse = model.smse;

    std::size_t violations = 0;
    for (std::size_t i = 0; i < data.rows(); ++i) {
      if (weighted_distance_squared(data.row(i),
                                    model.centroids.row(model.assignment[i]),
                                    w) > eps_d2) {
        ++violations;
      }
    }

    Matrix seeds = split_far_points(data, model, w, adapt.eps_d,
                                    adapt.max_new_per_pass);
    rec.split = seeds.rows();
    centroids = model.centroids;
    auto counts = model.cluster_sizes();
    for (std::size_t s = 0; s < seeds.rows(); ++s) {
      centroids.push_row(seeds.row(s));
      counts.push_back(1);
    }
    rec.merged = merge_close_centroids(centroids, counts, w, adapt.eps_c);
    rec.k_after = centroids.rows();
    result.passes.push_back(rec);
    result.outer_passes = outer;

    const bool unchanged = rec.removed == 0 && rec.split == 0 && rec.merged == 0;
    if (unchanged && run.converged) {
      result.model = std::move(model);
      result.converged = true;
      return result;
    }
    hint = model.assignment;
    if (violations <= best_violations) {
      best_violations = violations;
      result.model = std::move(model);
    }
  }
  return result;
}

AdaptiveResult self_adaptive_pso_kmeans(const Matrix& data,
                                        const DistanceWeights& w,
                                        const PsoParams& pso,
                                        const AdaptiveParams& adapt) {
  pso.validate();
  adapt.validate();
  if (w.size() != data.cols()) {
    throw ValidationError("self_adaptive_pso_kmeans: weight dimension mismatch");
  }
  const std::size_t k =
      adapt.k_init ? adapt.k_init : default_k_init(data.rows());
  if (k > data.rows()) {
    throw ValidationError("self_adaptive_pso_kmeans: k_init exceeds |R|");
  }
  std::mt19937_64 rng(pso.seed);
  Swarm swarm = init_swarm(data, w, k, pso, rng);
  for (std::size_t iter = 0; iter < pso.n_iter; ++iter) {
    pso_step(swarm, data, w, pso, iter, rng);
    mutation_check(swarm, data, w, pso, rng);
    swarm.gbest_history.push_back(swarm.gbest_fitness);
  }
  AdaptiveResult result = refine_clusters(data, swarm.gbest, w, adapt);
  result.k_init = k;
  result.gbest_history = std::move(swarm.gbest_history);
  result.mutations_accepted = swarm.mutations_accepted;
  return result;
}

}  // namespace gridscan
