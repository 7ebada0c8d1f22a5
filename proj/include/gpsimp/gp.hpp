#pragma once

// Exact zero-mean GP regression over an indexed input set, with a Cholesky
// factor that can be extended block by block.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "gpsimp/error.hpp"
#include "gpsimp/kernel.hpp"

namespace gpsimp {

/// Relative diagonal jitter: 1e-6 * sigma^2 is added to K + sigma_y^2 I.
inline constexpr double kJitterFactor = 1e-6;

struct Posterior {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
  std::optional<Eigen::MatrixXd> covariance;
};

/// Training data, hyperparameters and the factor L L^T = K + (sigma_y^2 + jitter) I.
///
/// Single writer: mutators invalidate the factor until refactor() runs, and
/// every query on a stale state throws FactorStale.
class GpState {
 public:
  GpState(Kernel kernel, double noise, std::vector<Index> inputs, Eigen::VectorXd targets)
      : kernel_(std::move(kernel)), noise_(noise), inputs_(std::move(inputs)), targets_(std::move(targets)) {
    if (!(noise_ >= 0.0) || !std::isfinite(noise_))
      throw Error(ErrorKind::InvalidArgument, "noise variance must be finite and non-negative");
    if (static_cast<std::size_t>(targets_.size()) != inputs_.size())
      throw Error(ErrorKind::LengthMismatch, "inputs and targets differ in length");
    if (!targets_.allFinite()) throw Error(ErrorKind::InvalidArgument, "targets must be finite");
    refactor();
  }

  const Kernel& kernel() const noexcept { return kernel_; }
  double noise() const noexcept { return noise_; }
  double jitter() const noexcept { return kJitterFactor * kernel_.spec().variance; }
  const std::vector<Index>& inputs() const noexcept { return inputs_; }
  const Eigen::VectorXd& targets() const noexcept { return targets_; }
  std::size_t size() const noexcept { return inputs_.size(); }
  bool stale() const noexcept { return stale_; }

  /// Lower-triangular Cholesky factor.
  const Eigen::MatrixXd& factor() const {
    require_fresh();
    return factor_;
  }
  /// (K + sigma_y^2 I)^{-1} y, with the jitter included.
  const Eigen::VectorXd& alpha() const {
    require_fresh();
    return alpha_;
  }
  /// Per-row diagonal additions beyond K (noise plus jitter, larger on rows
  /// that needed a jitter retry).
  const Eigen::VectorXd& diagonal_shift() const noexcept { return diag_shift_; }

  void set_kernel(Kernel kernel) {
    kernel_ = std::move(kernel);
    stale_ = true;
  }
  void set_noise(double noise) {
    if (!(noise >= 0.0) || !std::isfinite(noise))
      throw Error(ErrorKind::InvalidArgument, "noise variance must be finite and non-negative");
    noise_ = noise;
    stale_ = true;
  }
  void set_targets(Eigen::VectorXd targets) {
    if (static_cast<std::size_t>(targets.size()) != inputs_.size())
      throw Error(ErrorKind::LengthMismatch, "targets must match the active inputs");
    targets_ = std::move(targets);
    stale_ = true;
  }

  /// Refactors from scratch; one jitter retry at 10x before failing.
  void refactor() {
    const auto m = static_cast<Eigen::Index>(inputs_.size());
    Eigen::MatrixXd k = kernel_.matrix(inputs_);
    for (double factor : {1.0, 10.0}) {
      diag_shift_ = Eigen::VectorXd::Constant(m, noise_ + factor * jitter());
      Eigen::MatrixXd a = k;
      a.diagonal() += diag_shift_;
      Eigen::LLT<Eigen::MatrixXd> llt(a);
      if (llt.info() == Eigen::Success) {
        factor_ = llt.matrixL();
        alpha_ = llt.solve(targets_);
        stale_ = false;
        return;
      }
    }
    throw Error(ErrorKind::IndefiniteBlock, "kernel matrix is not positive definite even with 10x jitter");
  }

  /// Appends inputs by a block Cholesky update (no refactorisation).
  void extend(std::span<const Index> new_inputs, const Eigen::VectorXd& new_targets) {
    require_fresh();
    if (static_cast<std::size_t>(new_targets.size()) != new_inputs.size())
      throw Error(ErrorKind::LengthMismatch, "new inputs and targets differ in length");
    if (new_inputs.empty()) return;
    if (!new_targets.allFinite()) throw Error(ErrorKind::InvalidArgument, "targets must be finite");
    for (Index i : new_inputs)
      if (std::find(inputs_.begin(), inputs_.end(), i) != inputs_.end())
        throw Error(ErrorKind::InvalidArgument, "input " + std::to_string(i) + " is already active");

    const auto m = static_cast<Eigen::Index>(inputs_.size());
    const auto b = static_cast<Eigen::Index>(new_inputs.size());
    Eigen::MatrixXd k_new_old = kernel_.matrix(new_inputs, inputs_);  // b x m
    Eigen::MatrixXd k_new = kernel_.matrix(new_inputs);               // b x b

    // L21 = K21 L11^{-T}; Schur complement S = K22 + shift - L21 L21^T
    Eigen::MatrixXd l21 = k_new_old;
    if (m > 0) l21 = factor_.triangularView<Eigen::Lower>().solve(k_new_old.transpose()).transpose();
    Eigen::MatrixXd schur = k_new;
    if (m > 0) schur.noalias() -= l21 * l21.transpose();

    Eigen::VectorXd shift;
    Eigen::MatrixXd l22;
    bool ok = false;
    for (double factor : {1.0, 10.0}) {
      shift = Eigen::VectorXd::Constant(b, noise_ + factor * jitter());
      Eigen::MatrixXd s = schur;
      s.diagonal() += shift;
      Eigen::LLT<Eigen::MatrixXd> llt(s);
      if (llt.info() == Eigen::Success) {
        l22 = llt.matrixL();
        ok = true;
        break;
      }
    }
    if (!ok) throw Error(ErrorKind::IndefiniteBlock, "Schur complement not positive definite even with 10x jitter");

    Eigen::MatrixXd grown = Eigen::MatrixXd::Zero(m + b, m + b);
    grown.topLeftCorner(m, m) = factor_;
    grown.bottomLeftCorner(b, m) = l21;
    grown.bottomRightCorner(b, b) = l22;
    factor_ = std::move(grown);

    inputs_.insert(inputs_.end(), new_inputs.begin(), new_inputs.end());
    Eigen::VectorXd y(m + b);
    y << targets_, new_targets;
    targets_ = std::move(y);
    Eigen::VectorXd ds(m + b);
    ds << diag_shift_, shift;
    diag_shift_ = std::move(ds);
    recompute_alpha();
  }

  void require_fresh() const {
    if (stale_) throw Error(ErrorKind::FactorStale, "GP state changed since the last factorisation");
  }

 private:
  void recompute_alpha() {
    alpha_ = factor_.triangularView<Eigen::Lower>().solve(targets_);
    factor_.triangularView<Eigen::Lower>().transpose().solveInPlace(alpha_);
  }

  Kernel kernel_;
  double noise_;
  std::vector<Index> inputs_;
  Eigen::VectorXd targets_;
  Eigen::MatrixXd factor_;
  Eigen::VectorXd alpha_;
  Eigen::VectorXd diag_shift_;
  bool stale_ = true;
};

/// Returns a copy of `state` extended by the given inputs.
inline GpState extend_active_set(GpState state, std::span<const Index> new_inputs, const Eigen::VectorXd& new_targets) {
  state.extend(new_inputs, new_targets);
  return state;
}

/// Posterior mean and variance (optionally the full covariance) at `queries`.
inline Posterior posterior_predict(const GpState& state, std::span<const Index> queries, bool want_full_cov = false) {
  state.require_fresh();
  if (queries.empty()) throw Error(ErrorKind::EmptyQuery, "no query inputs");
  const auto q = static_cast<Eigen::Index>(queries.size());
  const Kernel& kernel = state.kernel();
  Posterior post;
  Eigen::VectorXd prior(q);
  for (Eigen::Index i = 0; i < q; ++i) prior[i] = kernel.prior_variance(queries[static_cast<std::size_t>(i)]);

  if (state.size() == 0) {
    post.mean = Eigen::VectorXd::Zero(q);
    post.variance = prior;
    if (want_full_cov) post.covariance = kernel.matrix(queries);
    return post;
  }
  Eigen::MatrixXd k_star = kernel.matrix(state.inputs(), queries);  // m x q
  post.mean = k_star.transpose() * state.alpha();
  Eigen::MatrixXd v = state.factor().triangularView<Eigen::Lower>().solve(k_star);
  post.variance = (prior - v.colwise().squaredNorm().transpose()).cwiseMax(0.0);
  if (want_full_cov) {
    Eigen::MatrixXd cov = kernel.matrix(queries);
    cov.noalias() -= v.transpose() * v;
    cov.diagonal() = post.variance;
    post.covariance = std::move(cov);
  }
  return post;
}

/// log p(y | X) = -1/2 y^T alpha - sum log diag(L) - m/2 log(2 pi).
inline double log_marginal_likelihood(const GpState& state) {
  state.require_fresh();
  if (state.size() == 0) throw Error(ErrorKind::InvalidArgument, "likelihood needs at least one observation");
  const double m = static_cast<double>(state.size());
  return -0.5 * state.targets().dot(state.alpha()) - state.factor().diagonal().array().log().sum() -
         0.5 * m * std::log(2.0 * std::numbers::pi);
}

/// Gradient of the log marginal likelihood with respect to
/// (log sigma^2, log kappa, log sigma_y^2); nu is held fixed.
///
/// Uses 1/2 tr((alpha alpha^T - A^{-1}) dA/dtheta) with A = K + (sigma_y^2 +
/// jitter) I. The jitter scales with sigma^2 and is differentiated with it.
inline Eigen::Vector3d lml_gradient(const GpState& state) {
  state.require_fresh();
  if (state.size() == 0) throw Error(ErrorKind::InvalidArgument, "gradient needs at least one observation");
  const auto m = static_cast<Eigen::Index>(state.size());
  const Kernel& kernel = state.kernel();
  Eigen::MatrixXd a_inv = Eigen::MatrixXd::Identity(m, m);
  state.factor().triangularView<Eigen::Lower>().solveInPlace(a_inv);
  state.factor().triangularView<Eigen::Lower>().transpose().solveInPlace(a_inv);
  Eigen::MatrixXd inner = state.alpha() * state.alpha().transpose() - a_inv;

  Eigen::MatrixXd k = kernel.matrix(state.inputs());
  Eigen::MatrixXd dk_var = k;  // dK/dlog sigma^2 = K (plus the jitter term below)
  dk_var.diagonal().array() += state.jitter();
  Eigen::MatrixXd dk_len = kernel.dlog_lengthscale(state.inputs());

  Eigen::Vector3d g;
  g[0] = 0.5 * inner.cwiseProduct(dk_var).sum();
  g[1] = 0.5 * inner.cwiseProduct(dk_len).sum();
  g[2] = 0.5 * state.noise() * inner.trace();
  return g;
}

/// Posterior over a fixed candidate pool, updated as the active set grows.
///
/// Keeps V = L^{-1} K(active, pool) column-major by pool entry and
/// z = L^{-1} y. When the factor gains rows [m0, m1) only the new rows of V
/// and z are solved for, so growing the active set to M costs O(M^2 P) in
/// total rather than per step.
class IncrementalPosterior {
 public:
  IncrementalPosterior(const GpState& state, std::vector<Index> pool, std::size_t capacity = 0)
      : pool_(std::move(pool)) {
    const auto p = static_cast<Eigen::Index>(pool_.size());
    mean_ = Eigen::VectorXd::Zero(p);
    variance_.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) variance_[j] = state.kernel().prior_variance(pool_[static_cast<std::size_t>(j)]);
    vt_.resize(p, static_cast<Eigen::Index>(std::max(capacity, state.size())));
    sync(state);
  }

  const std::vector<Index>& pool() const noexcept { return pool_; }
  std::size_t rows() const noexcept { return static_cast<std::size_t>(rows_); }

  /// Absorbs factor rows added to `state` since the last sync. `state` must
  /// be the same GP (same kernel, same leading inputs).
  void sync(const GpState& state) {
    const auto m1 = static_cast<Eigen::Index>(state.size());
    const Eigen::Index m0 = rows_;
    if (m1 < m0) throw Error(ErrorKind::InvalidArgument, "active set shrank");
    if (m1 == m0) return;
    const Eigen::MatrixXd& l = state.factor();
    const Eigen::Index b = m1 - m0;
    if (vt_.cols() < m1) vt_.conservativeResize(Eigen::NoChange, std::max(m1, 2 * vt_.cols()));

    std::span<const Index> new_inputs(state.inputs().data() + m0, static_cast<std::size_t>(b));
    Eigen::MatrixXd rhs = state.kernel().matrix(pool_, new_inputs);  // P x b
    Eigen::VectorXd zrhs = state.targets().segment(m0, b);
    if (m0 > 0) {
      rhs.noalias() -= vt_.leftCols(m0) * l.block(m0, 0, b, m0).transpose();
      zrhs.noalias() -= l.block(m0, 0, b, m0) * z_;
    }
    auto l22 = l.block(m0, m0, b, b).triangularView<Eigen::Lower>();
    Eigen::MatrixXd rhs_t = rhs.transpose();
    l22.solveInPlace(rhs_t);  // (rhs * L22^{-T})^T
    rhs = rhs_t.transpose();
    l22.solveInPlace(zrhs);

    vt_.middleCols(m0, b) = rhs;
    mean_.noalias() += rhs * zrhs;
    variance_ -= rhs.rowwise().squaredNorm();
    Eigen::VectorXd z(m1);
    z << z_, zrhs;
    z_ = std::move(z);
    rows_ = m1;
  }

  /// Posterior at the given pool positions (indices into pool()).
  Posterior predict(std::span<const std::size_t> positions) const {
    Posterior post;
    const auto q = static_cast<Eigen::Index>(positions.size());
    post.mean.resize(q);
    post.variance.resize(q);
    for (Eigen::Index i = 0; i < q; ++i) {
      const auto j = static_cast<Eigen::Index>(positions[static_cast<std::size_t>(i)]);
      post.mean[i] = mean_[j];
      post.variance[i] = std::max(0.0, variance_[j]);
    }
    return post;
  }

 private:
  std::vector<Index> pool_;
  Eigen::MatrixXd vt_;  // P x capacity; first rows_ columns valid
  Eigen::VectorXd z_;
  Eigen::VectorXd mean_;
  Eigen::VectorXd variance_;
  Eigen::Index rows_ = 0;
};

}  // namespace gpsimp
