#pragma once

// Type-II maximum likelihood for (sigma^2, kappa, sigma_y^2), with nu picked
// from a small grid.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "gpsimp/gp.hpp"
#include "gpsimp/kernel.hpp"

namespace gpsimp {

struct OptimizerOptions {
  std::size_t budget = 100;                     // likelihood evaluations per nu
  std::vector<double> nu_grid = {0.5, 1.5, 2.5};
  std::optional<double> initial_lengthscale;    // default: scale-aware guess
  double gradient_tolerance = 1e-3;             // stop when ||grad||_inf falls below
  double initial_step = 0.1;                    // first move, in log units
  double log_range = 12.0;                      // each log-parameter stays within init +- range
};

struct HyperparameterFit {
  KernelSpec spec;
  double noise = 0.0;
  double log_likelihood = -std::numeric_limits<double>::infinity();
  double initial_log_likelihood = -std::numeric_limits<double>::infinity();
  Eigen::Vector3d gradient = Eigen::Vector3d::Zero();
  std::vector<double> trace;  // LML of accepted iterates for the chosen nu
  std::size_t evaluations = 0;
};

namespace detail {

inline double sample_variance(const Eigen::VectorXd& y) {
  if (y.size() < 2) return 0.0;
  const double mean = y.mean();
  return (y.array() - mean).square().sum() / static_cast<double>(y.size() - 1);
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

/// Default kappa: 10% of the input bounding-box diagonal (Euclidean), or the
/// lengthscale whose spectral shift 2 nu / kappa^2 equals the median basis
/// eigenvalue (manifold).
inline double default_lengthscale(const Kernel& kernel, double nu) {
  if (const auto* basis = kernel.basis()) {
    std::vector<double> ev(basis->eigenvalues.data(), basis->eigenvalues.data() + basis->eigenvalues.size());
    const double med = median_of(ev);
    return med > 0.0 ? std::sqrt(2.0 * nu / med) : 1.0;
  }
  const double diag = bounding_box(*kernel.points()).diagonal();
  return diag > 0.0 ? 0.1 * diag : 1.0;
}

struct Evaluation {
  bool ok = false;
  double lml = -std::numeric_limits<double>::infinity();
  Eigen::Vector3d grad = Eigen::Vector3d::Zero();
};

inline Evaluation evaluate(const Kernel& base, KernelSpec spec, const Eigen::Vector3d& theta,
                           const std::vector<Index>& inputs, const Eigen::VectorXd& y, bool with_gradient) {
  Evaluation e;
  spec.variance = std::exp(theta[0]);
  spec.lengthscale = std::exp(theta[1]);
  try {
    GpState state(base.with_spec(spec), std::exp(theta[2]), inputs, y);
    e.lml = log_marginal_likelihood(state);
    if (!std::isfinite(e.lml)) return e;
    if (with_gradient) {
      e.grad = lml_gradient(state);
      if (!e.grad.allFinite()) return e;
    }
    e.ok = true;
  } catch (const Error&) {
    e.ok = false;
  }
  return e;
}

}  // namespace detail

/// Maximises the log marginal likelihood of (inputs, y) under `kernel`'s
/// family. Per nu in the grid: gradient ascent in log space with a
/// Barzilai-Borwein step guess and halving backtracking; only improving
/// steps are accepted, so the trace is monotone. Returns the best
/// configuration seen over all nu.
inline HyperparameterFit optimize_hyperparams(const Kernel& kernel, const std::vector<Index>& inputs,
                                              const Eigen::VectorXd& y, const OptimizerOptions& opt = {}) {
  if (inputs.empty()) throw Error(ErrorKind::InvalidArgument, "hyperparameter fit needs data");
  if (static_cast<std::size_t>(y.size()) != inputs.size())
    throw Error(ErrorKind::LengthMismatch, "inputs and targets differ in length");

  const double var_y = std::max(detail::sample_variance(y), 1e-10);
  HyperparameterFit best;
  bool any = false;

  for (double nu : opt.nu_grid) {
    KernelSpec spec = kernel.spec();
    spec.smoothness = nu;
    const double kappa0 = opt.initial_lengthscale.value_or(detail::default_lengthscale(kernel, nu));
    const Eigen::Vector3d theta0(std::log(var_y), std::log(kappa0), std::log(1e-2 * var_y));
    const Eigen::Vector3d lo = theta0.array() - opt.log_range;
    const Eigen::Vector3d hi = theta0.array() + opt.log_range;

    Eigen::Vector3d theta = theta0;
    detail::Evaluation cur = detail::evaluate(kernel, spec, theta, inputs, y, true);
    std::size_t evals = 1;
    if (!cur.ok) {
      if (opt.nu_grid.size() == 1)
        throw Error(ErrorKind::NonFiniteObjective, "likelihood not finite at the initial hyperparameters");
      continue;
    }
    std::vector<double> trace{cur.lml};
    const double initial_lml = cur.lml;
    double step = opt.initial_step / std::max(cur.grad.cwiseAbs().maxCoeff(), 1e-12);

    while (evals < opt.budget && cur.grad.cwiseAbs().maxCoeff() > opt.gradient_tolerance) {
      Eigen::Vector3d cand = (theta + step * cur.grad).cwiseMax(lo).cwiseMin(hi);
      if ((cand - theta).cwiseAbs().maxCoeff() < 1e-12) break;
      detail::Evaluation next = detail::evaluate(kernel, spec, cand, inputs, y, true);
      ++evals;
      if (next.ok && next.lml > cur.lml) {
        const Eigen::Vector3d s = cand - theta;
        const Eigen::Vector3d dg = cur.grad - next.grad;  // curvature of -LML along s
        const double sy = s.dot(dg);
        step = sy > 0.0 ? s.squaredNorm() / sy : 2.0 * step;
        theta = cand;
        cur = next;
        trace.push_back(cur.lml);
      } else {
        step *= 0.25;
      }
      if (step < 1e-14) break;
    }

    if (!any || cur.lml > best.log_likelihood) {
      any = true;
      best.spec = spec;
      best.spec.variance = std::exp(theta[0]);
      best.spec.lengthscale = std::exp(theta[1]);
      best.noise = std::exp(theta[2]);
      best.log_likelihood = cur.lml;
      best.initial_log_likelihood = initial_lml;
      best.gradient = cur.grad;
      best.trace = std::move(trace);
    }
    best.evaluations += evals;
  }
  if (!any) throw Error(ErrorKind::NonFiniteObjective, "likelihood not finite for any smoothness on the grid");
  return best;
}

}  // namespace gpsimp
