#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "gridscan/dataset.hpp"

namespace gridscan {

/// Non-negative per-attribute weights of the clustering distance.
class DistanceWeights {
 public:
  /// Throws ValidationError unless all entries are finite, >= 0 and at least
  /// one is strictly positive.
  explicit DistanceWeights(std::vector<double> weights);

  static DistanceWeights uniform(std::size_t dimension);
  /// max(w, 0) of adjusted feature weights.
  static DistanceWeights from_adjusted(std::span<const double> adjusted);

  std::size_t size() const noexcept { return weights_.size(); }
  double operator[](std::size_t i) const noexcept { return weights_[i]; }
  std::span<const double> values() const noexcept { return weights_; }
  /// Indices with a strictly positive weight, ascending.
  std::span<const std::size_t> active() const noexcept { return active_; }

 private:
  std::vector<double> weights_;
  std::vector<std::size_t> active_;
};

/// sqrt(sum_d w_d (x_d - y_d)^2). Throws on dimension mismatch.
double weighted_distance(std::span<const double> x, std::span<const double> y,
                         const DistanceWeights& w);

/// Squared weighted distance, summed over the active dimensions in ascending
/// order. Bitwise equal to summing every dimension, since inactive terms are
/// exactly zero. No dimension checks.
double weighted_distance_squared(std::span<const double> x,
                                 std::span<const double> y,
                                 const DistanceWeights& w) noexcept;

/// Per-dimension arithmetic mean of the rows of `points`.
std::vector<double> centroid_of(const Matrix& points);
/// Mean of the listed rows of `data`.
std::vector<double> centroid_of(const Matrix& data,
                                std::span<const std::size_t> members);

struct ClusterModel {
  Matrix centroids;
  std::vector<std::size_t> assignment;  // per data row
  std::vector<double> weights;
  double smse = 0.0;

  std::size_t k() const noexcept { return centroids.rows(); }
  std::vector<std::size_t> cluster_sizes() const;
};

/// Clustering fitness: mean over clusters of the mean (unsquared) weighted
/// distance of members to their centroid. Throws on an empty cluster.
double smse(const Matrix& data, const Matrix& centroids,
            std::span<const std::size_t> assignment, const DistanceWeights& w);
double smse(const ClusterModel& model, const OperatingPointSet& data);

/// Same average, taken over the non-empty clusters only (0 if all are empty).
double smse_nonempty(const Matrix& data, const Matrix& centroids,
                     std::span<const std::size_t> assignment,
                     const DistanceWeights& w);

/// Sum of squared weighted distances to the assigned centroids (the k-means
/// objective minimized by Lloyd iterations).
double sum_squared_error(const Matrix& data, const Matrix& centroids,
                         std::span<const std::size_t> assignment,
                         const DistanceWeights& w);

struct Assignment {
  std::vector<std::size_t> cluster;
  std::vector<double> distance_squared;
};

/// Nearest centroid per row under the weighted distance; ties go to the lowest
/// centroid index. `hint`, when given, is a per-row starting guess used only
/// to prune the search; the result does not depend on it.
Assignment assign_nearest(const Matrix& data, const Matrix& centroids,
                          const DistanceWeights& w,
                          std::span<const std::size_t> hint = {});

struct KMeansResult {
  /// Centroids and the assignment they induce. May hold empty clusters,
  /// listed in `empty_clusters`; `model.smse` then averages the non-empty
  /// ones.
  ClusterModel model;
  std::vector<std::size_t> empty_clusters;
  std::size_t iterations = 0;
  bool converged = false;
  /// Fitness and k-means objective after every assignment step.
  std::vector<double> smse_trace;
  std::vector<double> sse_trace;
};

inline constexpr std::size_t kDefaultKMeansIterations = 300;

/// Lloyd iterations from `initial` until the assignment repeats or
/// `max_iterations` assignment steps ran. Empty clusters keep their previous
/// centroid.
KMeansResult kmeans(const Matrix& data, Matrix initial, const DistanceWeights& w,
                    std::size_t max_iterations = kDefaultKMeansIterations,
                    std::span<const std::size_t> hint = {});

/// `k` data rows with pairwise distinct values, drawn uniformly.
Matrix random_initial_centroids(const Matrix& data, std::size_t k,
                                std::mt19937_64& rng);

/// Drops clusters without members and renumbers the assignment.
/// Returns the number of clusters removed.
std::size_t remove_empty_clusters(ClusterModel& model);

struct BoundingBox {
  std::vector<double> lower;
  std::vector<double> upper;

  static BoundingBox of(const Matrix& data);
  void clamp(std::span<double> point) const noexcept;
};

struct PsoParams {
  std::size_t swarm_size = 10;
  std::size_t n_iter = 40;
  double c1 = 1.5;
  double c2 = 1.5;
  double w_max = 0.9;
  double w_min = 0.4;
  /// Fitness-variance level below which the swarm counts as collapsed.
  double sigma_t2 = 1e-3;
  /// Mutation probability once collapsed.
  double p0 = 0.3;
  /// Initial velocities are uniform in +-(this fraction of the box width).
  double initial_velocity = 0.1;
  std::uint64_t seed = 11;

  void validate() const;
};

/// A full centroid set flying through the search space.
struct Particle {
  Matrix position;
  Matrix velocity;
  Matrix best_position;
  double fitness = 0.0;
  double best_fitness = 0.0;
  std::vector<std::size_t> hint;
};

struct Swarm {
  std::vector<Particle> particles;
  Matrix gbest;
  double gbest_fitness = 0.0;
  BoundingBox box;
  /// g_best fitness after initialization and after every iteration.
  std::vector<double> gbest_history;
  std::size_t mutations_attempted = 0;
  std::size_t mutations_accepted = 0;
};

/// Fitness of a centroid set: the non-empty-cluster SMSE of the partition it
/// induces. `hint` is read and updated when non-null.
double particle_fitness(const Matrix& data, const Matrix& centroids,
                        const DistanceWeights& w,
                        std::vector<std::size_t>* hint = nullptr);

/// w_max - iter * (w_max - w_min) / n_iter.
double inertia_weight(std::size_t iter, const PsoParams& params);

/// v <- inertia v + c1 r1 (p_best - p) + c2 r2 (g_best - p); p <- p + v;
/// then clamps p into `box`. Fitness is not touched.
void update_particle(Particle& particle, const Matrix& gbest, double inertia,
                     double c1, double c2, double r1, double r2,
                     const BoundingBox& box);

/// Every particle starts at `k` distinct random data rows.
Swarm init_swarm(const Matrix& data, const DistanceWeights& w, std::size_t k,
                 const PsoParams& params, std::mt19937_64& rng);

/// One velocity/position update of every particle followed by p_best and
/// g_best refresh. `iter` must be < params.n_iter.
void pso_step(Swarm& swarm, const Matrix& data, const DistanceWeights& w,
              const PsoParams& params, std::size_t iter, std::mt19937_64& rng);

/// (1/S) sum ((J_i - mean) / F)^2 with F = max(1, max |J_i - mean|).
double fitness_variance(std::span<const double> fitness);

struct MutationOutcome {
  double variance = 0.0;
  double probability = 0.0;
  bool attempted = false;
  bool accepted = false;
};

/// Computes the normalized fitness variance and mutation probability and, when
/// triggered, mutates g_best.
MutationOutcome mutation_check(Swarm& swarm, const Matrix& data,
                               const DistanceWeights& w,
                               const PsoParams& params, std::mt19937_64& rng);

/// Multiplies each g_best coordinate by (1 + eta / 2), clamps, and keeps the
/// mutant unless its fitness is worse. `eta` holds one draw per coordinate.
bool mutate_gbest(Swarm& swarm, const Matrix& data, const DistanceWeights& w,
                  std::span<const double> eta);

struct AdaptiveParams {
  /// Cluster count of the swarm stage; 0 picks ceil(sqrt(|R| / 2)).
  std::size_t k_init = 0;
  /// Largest allowed point-to-centroid distance.
  double eps_d = 0.12;
  /// Smallest allowed centroid-to-centroid distance.
  double eps_c = 0.02;
  std::size_t max_outer = 200;
  /// New centroids per outer pass; 0 means no limit.
  std::size_t max_new_per_pass = 0;
  std::size_t kmeans_iterations = kDefaultKMeansIterations;

  void validate() const;
};

std::size_t default_k_init(std::size_t n_points);

/// New centroids for points farther than eps_d from their centroid. Walks the
/// violators from the farthest down and seeds one wherever the point is
/// farther than eps_d from every seed chosen so far, up to `limit` seeds
/// (0 = no limit).
Matrix split_far_points(const Matrix& data, const ClusterModel& model,
                        const DistanceWeights& w, double eps_d,
                        std::size_t limit = 0);

/// Repeatedly merges the closest centroid pair while it is closer than eps_c,
/// replacing it by the member-count weighted mean. `counts` follows the
/// merges. Returns the number of merges.
std::size_t merge_close_centroids(Matrix& centroids,
                                  std::vector<std::size_t>& counts,
                                  const DistanceWeights& w, double eps_c);

struct OuterPassRecord {
  std::size_t k_before = 0;
  std::size_t removed = 0;
  std::size_t split = 0;
  std::size_t merged = 0;
  std::size_t k_after = 0;
  std::size_t kmeans_iterations = 0;
  double smse = 0.0;
};

struct AdaptiveResult {
  ClusterModel model;
  bool converged = false;
  std::size_t k_init = 0;
  std::size_t outer_passes = 0;
  std::vector<double> gbest_history;
  /// Fitness after the first assignment step of the swarm-seeded k-means.
  double first_iteration_smse = 0.0;
  std::vector<double> smse_trace;  // k-means steps across all outer passes
  std::vector<OuterPassRecord> passes;
  std::size_t mutations_accepted = 0;
};

/// Split/merge refinement starting from `initial` centroids: k-means, drop
/// empty clusters, split far points, merge close centroids, until a pass
/// changes nothing and the assignment is stable.
AdaptiveResult refine_clusters(const Matrix& data, Matrix initial,
                               const DistanceWeights& w,
                               const AdaptiveParams& adapt);

/// Swarm search for k_init centroids, then refine_clusters from g_best.
AdaptiveResult self_adaptive_pso_kmeans(const Matrix& data,
                                        const DistanceWeights& w,
                                        const PsoParams& pso,
                                        const AdaptiveParams& adapt);

}  // namespace gridscan
