#pragma once

// Greedy subset-of-data simplification: fit the GP on a small random subset,
// seed the active set with farthest point sampling, then repeatedly move the
// remainder points with the largest predictive std + absolute error into the
// active set until it holds M points.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "gpsimp/cloud.hpp"
#include "gpsimp/error.hpp"
#include "gpsimp/geometry.hpp"
#include "gpsimp/gp.hpp"
#include "gpsimp/hyperopt.hpp"
#include "gpsimp/kernel.hpp"
#include "gpsimp/laplacian.hpp"
#include "gpsimp/spatial.hpp"

namespace gpsimp {

/// Uniform random subset of [0, n) without replacement, ascending. Identity
/// when `count` is absent or not smaller than n.
inline std::vector<Index> subsample_working_set(std::size_t n, std::optional<std::size_t> count, std::uint64_t seed) {
  std::vector<Index> all(n);
  std::iota(all.begin(), all.end(), Index{0});
  if (!count || *count >= n) return all;
  std::mt19937_64 rng(seed);
  // partial Fisher-Yates
  for (std::size_t i = 0; i < *count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  all.resize(*count);
  std::sort(all.begin(), all.end());
  return all;
}

/// s_j = sqrt(var_j) + |mu_j - y_j|.
inline Eigen::VectorXd selection_scores(const Posterior& post, const Eigen::VectorXd& targets) {
  if (post.mean.size() != targets.size() || post.variance.size() != targets.size())
    throw Error(ErrorKind::LengthMismatch, "posterior and targets differ in length");
  return post.variance.cwiseMax(0.0).cwiseSqrt() + (post.mean - targets).cwiseAbs();
}

/// Elements of `remainder` carrying the `k` largest scores, highest first;
/// equal scores go to the lower point index.
inline std::vector<Index> select_batch(const Eigen::VectorXd& scores, std::span<const Index> remainder, std::size_t k) {
  if (static_cast<std::size_t>(scores.size()) != remainder.size())
    throw Error(ErrorKind::LengthMismatch, "scores and remainder differ in length");
  if (k > remainder.size())
    throw Error(ErrorKind::BatchTooLarge,
                "batch of " + std::to_string(k) + " from a remainder of " + std::to_string(remainder.size()));
  std::vector<std::size_t> pos(remainder.size());
  std::iota(pos.begin(), pos.end(), std::size_t{0});
  auto better = [&](std::size_t a, std::size_t b) {
    const double sa = scores[static_cast<Eigen::Index>(a)], sb = scores[static_cast<Eigen::Index>(b)];
    if (sa != sb) return sa > sb;
    return remainder[a] < remainder[b];
  };
  std::partial_sort(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(k), pos.end(), better);
  std::vector<Index> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = remainder[pos[i]];
  return out;
}

/// State visible to an observer before each greedy batch is committed.
/// Indices are positions in the working set.
struct SelectionSnapshot {
  std::size_t iteration = 0;
  const std::vector<Index>* active = nullptr;
  const std::vector<Index>* remainder = nullptr;
  const Eigen::VectorXd* scores = nullptr;
  const std::vector<Index>* batch = nullptr;
};

struct SimplifyConfig {
  std::optional<std::size_t> target_count;   // M
  std::optional<double> ratio;               // alpha = M / N, used when M is absent
  double init_fraction = 1.0 / 3.0;          // k_init = floor(M * init_fraction)
  std::size_t rounds = 10;                   // k_add = ceil((M - k_init) / rounds)
  std::optional<std::size_t> batch_size;     // explicit k_add
  std::size_t opt_count = 200;               // k_opt
  std::optional<std::size_t> working_subsample;
  KernelSpec kernel;                         // family and manifold settings; hyperparameters are fitted
  OptimizerOptions optimizer;
  EigenSolverOptions eigen;
  std::uint64_t seed = 0;
  std::function<void(const SelectionSnapshot&)> observer;
};

struct StageTimings {
  double basis = 0.0;         // graph Laplacian and eigenpairs
  double optimization = 0.0;  // hyperparameter fit
  double selection = 0.0;     // FPS and the greedy loop
};

struct SimplifyResult {
  PointCloud cloud;                  // selected points, original order
  std::vector<Index> indices;        // original-cloud indices, ascending
  std::vector<Index> selection_order;  // original-cloud indices in selection order
  std::size_t input_size = 0;
  std::size_t working_size = 0;
  std::size_t target = 0;
  std::size_t init_count = 0;
  std::size_t batch_size = 0;
  std::size_t iterations = 0;
  HyperparameterFit fit;
  StageTimings timings;
};

/// Target size M for a cloud of n points.
inline std::size_t resolve_target(const SimplifyConfig& config, std::size_t n) {
  std::size_t m = 0;
  if (config.target_count) {
    m = *config.target_count;
  } else if (config.ratio) {
    if (!(*config.ratio > 0.0) || !(*config.ratio < 1.0))
      throw Error(ErrorKind::InvalidArgument, "ratio must lie in (0, 1)");
    m = static_cast<std::size_t>(std::floor(*config.ratio * static_cast<double>(n)));
  } else {
    throw Error(ErrorKind::InvalidArgument, "either a target count or a ratio is required");
  }
  if (m < 1) throw Error(ErrorKind::InvalidArgument, "target size must be at least 1");
  if (m >= n)
    throw Error(ErrorKind::TargetTooLarge,
                "target " + std::to_string(m) + " is not smaller than the " + std::to_string(n) + " input points");
  return m;
}

/// Builds the covariance over `points` for the configured family.
inline Kernel make_kernel(const KernelSpec& spec, const std::vector<Point3>& points, const EigenSolverOptions& eigen) {
  if (spec.family == KernelFamily::EuclideanMatern)
    return Kernel::euclidean(spec, std::make_shared<const std::vector<Point3>>(points));
  const std::size_t k_graph = std::max<std::size_t>(1, std::min(spec.graph_neighbors, points.size() - 1));
  GraphLaplacian lap = build_graph_laplacian(points, k_graph);
  const std::size_t count = std::min(spec.eigenpairs, points.size());
  auto basis = std::make_shared<LaplacianBasis>(laplacian_eigenpairs(lap.matrix, count, eigen));
  return Kernel::manifold(spec, std::move(basis));
}

inline SimplifyResult simplify(const PointCloud& cloud, const VariationField& field, const SimplifyConfig& config) {
  using clock = std::chrono::steady_clock;
  auto seconds_since = [](clock::time_point t0) { return std::chrono::duration<double>(clock::now() - t0).count(); };

  const std::size_t n = cloud.size();
  if (field.values.size() != n) throw Error(ErrorKind::LengthMismatch, "variation field does not match the cloud");
  if (n < 2) throw Error(ErrorKind::TargetTooLarge, "cannot simplify fewer than 2 points");

  SimplifyResult result;
  result.input_size = n;

  // working set
  const std::vector<Index> working = subsample_working_set(n, config.working_subsample, config.seed);
  const std::size_t w = working.size();
  const std::size_t m = resolve_target(config, n);
  if (m >= w)
    throw Error(ErrorKind::TargetTooLarge, "target " + std::to_string(m) + " is not smaller than the working set");
  result.working_size = w;
  result.target = m;

  std::vector<Point3> pts(w);
  Eigen::VectorXd y(static_cast<Eigen::Index>(w));
  for (std::size_t i = 0; i < w; ++i) {
    pts[i] = cloud[working[i]];
    y[static_cast<Eigen::Index>(i)] = field.values[working[i]];
  }

  auto t0 = clock::now();
  Kernel kernel = make_kernel(config.kernel, pts, config.eigen);
  result.timings.basis = seconds_since(t0);

  // hyperparameters on k_opt random working points
  t0 = clock::now();
  const std::size_t k_opt = std::min(config.opt_count, w);
  std::vector<Index> opt_inputs = subsample_working_set(w, k_opt, config.seed + 1);
  Eigen::VectorXd y_opt(static_cast<Eigen::Index>(k_opt));
  for (std::size_t i = 0; i < k_opt; ++i) y_opt[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(opt_inputs[i])];
  result.fit = optimize_hyperparams(kernel, opt_inputs, y_opt, config.optimizer);
  kernel = kernel.with_spec(result.fit.spec);
  result.timings.optimization = seconds_since(t0);

  // greedy selection
  t0 = clock::now();
  std::size_t k_init = static_cast<std::size_t>(std::floor(static_cast<double>(m) * config.init_fraction));
  k_init = std::clamp<std::size_t>(k_init, 1, m > 1 ? m - 1 : 1);
  const std::size_t k_add =
      config.batch_size ? std::max<std::size_t>(1, *config.batch_size)
                        : std::max<std::size_t>(1, (m - k_init + config.rounds - 1) / std::max<std::size_t>(1, config.rounds));
  result.init_count = k_init;
  result.batch_size = k_add;

  std::vector<Index> active = farthest_point_sample(pts, k_init, config.seed);
  auto targets_of = [&](std::span<const Index> idx) {
    Eigen::VectorXd t(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) t[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(idx[i])];
    return t;
  };
  GpState state(kernel, result.fit.noise, active, targets_of(active));

  std::vector<char> in_active(w, 0);
  for (Index i : active) in_active[i] = 1;
  std::vector<Index> remainder;
  remainder.reserve(w - k_init);
  for (Index i = 0; i < w; ++i)
    if (!in_active[i]) remainder.push_back(i);

  std::vector<Index> pool(w);
  std::iota(pool.begin(), pool.end(), Index{0});
  IncrementalPosterior posterior(state, pool, m);

  std::size_t iteration = 0;
  while (active.size() < m) {
    Posterior post = posterior.predict(remainder);
    Eigen::VectorXd scores = selection_scores(post, targets_of(remainder));
    std::vector<Index> batch = select_batch(scores, remainder, std::min(k_add, m - active.size()));
    if (config.observer) config.observer(SelectionSnapshot{iteration, &active, &remainder, &scores, &batch});

    state.extend(batch, targets_of(batch));
    posterior.sync(state);
    for (Index i : batch) in_active[i] = 1;
    active.insert(active.end(), batch.begin(), batch.end());
    std::erase_if(remainder, [&](Index i) { return in_active[i] != 0; });
    ++iteration;
  }
  result.iterations = iteration;
  result.timings.selection = seconds_since(t0);

  result.selection_order.reserve(m);
  for (Index i : active) result.selection_order.push_back(working[i]);
  result.indices = result.selection_order;
  std::sort(result.indices.begin(), result.indices.end());
  result.cloud = cloud.select(result.indices);
  return result;
}

/// Convenience overload computing the variation field with default settings.
inline SimplifyResult simplify(const PointCloud& cloud, const SimplifyConfig& config,
                               const NeighborhoodParams& params = {}) {
  return simplify(cloud, surface_variation_field(cloud, params), config);
}

}  // namespace gpsimp
