#pragma once

// Matérn covariance functions: the Euclidean closed forms at half-integer
// smoothness and the truncated spectral form on a graph Laplacian basis.

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gpsimp/cloud.hpp"
#include "gpsimp/error.hpp"
#include "gpsimp/laplacian.hpp"

namespace gpsimp {

enum class KernelFamily { EuclideanMatern, ManifoldMatern };

inline std::string to_string(KernelFamily f) {
  return f == KernelFamily::EuclideanMatern ? "euclidean" : "manifold";
}

struct KernelSpec {
  KernelFamily family = KernelFamily::ManifoldMatern;
  double variance = 1.0;     // sigma^2
  double lengthscale = 1.0;  // kappa
  double smoothness = 1.5;   // nu
  // manifold family only
  std::size_t eigenpairs = 500;
  std::size_t graph_neighbors = 10;
  double manifold_dim = 2.0;

  void validate() const {
    if (!(variance > 0.0) || !std::isfinite(variance))
      throw Error(ErrorKind::InvalidArgument, "kernel variance must be positive");
    if (!(lengthscale > 0.0) || !std::isfinite(lengthscale))
      throw Error(ErrorKind::InvalidArgument, "kernel lengthscale must be positive");
    if (!(smoothness > 0.0) || !std::isfinite(smoothness))
      throw Error(ErrorKind::InvalidArgument, "kernel smoothness must be positive");
    if (family == KernelFamily::EuclideanMatern && smoothness != 0.5 && smoothness != 1.5 && smoothness != 2.5)
      throw Error(ErrorKind::UnsupportedNu, "Euclidean Matérn supports nu in {1/2, 3/2, 5/2}, got " +
                                                std::to_string(smoothness));
    if (family == KernelFamily::ManifoldMatern) {
      if (eigenpairs < 1) throw Error(ErrorKind::InvalidArgument, "eigenpair count must be at least 1");
      if (graph_neighbors < 3) throw Error(ErrorKind::InvalidArgument, "graph neighbour count must be at least 3");
      if (!(manifold_dim >= 1.0)) throw Error(ErrorKind::InvalidArgument, "manifold dimension must be at least 1");
    }
  }
};

/// Half-integer Matérn as a function of distance r.
inline double matern_half_integer(double variance, double lengthscale, double nu, double r) {
  if (nu == 0.5) return variance * std::exp(-r / lengthscale);
  if (nu == 1.5) {
    const double a = std::sqrt(3.0) * r / lengthscale;
    return variance * (1.0 + a) * std::exp(-a);
  }
  if (nu == 2.5) {
    const double a = std::sqrt(5.0) * r / lengthscale;
    return variance * (1.0 + a + a * a / 3.0) * std::exp(-a);
  }
  throw Error(ErrorKind::UnsupportedNu, "Euclidean Matérn supports nu in {1/2, 3/2, 5/2}");
}

/// d k / d log(kappa) of the half-integer Matérn.
inline double matern_half_integer_dlog_lengthscale(double variance, double lengthscale, double nu, double r) {
  if (nu == 0.5) {
    const double a = r / lengthscale;
    return variance * a * std::exp(-a);
  }
  if (nu == 1.5) {
    const double a = std::sqrt(3.0) * r / lengthscale;
    return variance * a * a * std::exp(-a);
  }
  if (nu == 2.5) {
    const double a = std::sqrt(5.0) * r / lengthscale;
    return variance * a * a * (1.0 + a) / 3.0 * std::exp(-a);
  }
  throw Error(ErrorKind::UnsupportedNu, "Euclidean Matérn supports nu in {1/2, 3/2, 5/2}");
}

inline double matern_euclidean(const KernelSpec& spec, const Point3& x, const Point3& y) {
  if (spec.family != KernelFamily::EuclideanMatern)
    throw Error(ErrorKind::InvalidArgument, "matern_euclidean needs the Euclidean family");
  return matern_half_integer(spec.variance, spec.lengthscale, spec.smoothness, (x - y).norm());
}

/// Per-eigenpair weights of the truncated spectral Matérn, scaled so that the
/// mean prior variance over all basis nodes equals sigma^2:
///   k(i, j) = sum_n weights[n] f_n(i) f_n(j),
///   weights[n] = (sigma^2 / C) (2 nu / kappa^2 + lambda_n)^(-nu - d/2),
///   C = (1 / #nodes) sum_n (2 nu / kappa^2 + lambda_n)^(-nu - d/2).
/// The second relation holds because every f_n has unit norm.
inline Eigen::VectorXd manifold_weights(const KernelSpec& spec, const LaplacianBasis& basis) {
  const Eigen::Index count = basis.eigenvalues.size();
  const double shift = 2.0 * spec.smoothness / (spec.lengthscale * spec.lengthscale);
  const double expo = -spec.smoothness - spec.manifold_dim / 2.0;
  Eigen::VectorXd logw(count);
  for (Eigen::Index n = 0; n < count; ++n) logw[n] = expo * std::log(shift + basis.eigenvalues[n]);
  const double top = logw.maxCoeff();
  Eigen::VectorXd w = (logw.array() - top).exp();
  return w * (spec.variance * static_cast<double>(basis.node_count()) / w.sum());
}

/// The normalising constant C (in the unscaled form of the weights).
inline double manifold_normalizer(const KernelSpec& spec, const LaplacianBasis& basis) {
  const double shift = 2.0 * spec.smoothness / (spec.lengthscale * spec.lengthscale);
  const double expo = -spec.smoothness - spec.manifold_dim / 2.0;
  double sum = 0.0;
  for (Eigen::Index n = 0; n < basis.eigenvalues.size(); ++n) sum += std::pow(shift + basis.eigenvalues[n], expo);
  return sum / static_cast<double>(basis.node_count());
}

/// d weights / d log(kappa), with the normaliser held to its definition.
inline Eigen::VectorXd manifold_weights_dlog_lengthscale(const KernelSpec& spec, const LaplacianBasis& basis) {
  const double kappa2 = spec.lengthscale * spec.lengthscale;
  const double shift = 2.0 * spec.smoothness / kappa2;
  const double p = spec.smoothness + spec.manifold_dim / 2.0;
  Eigen::VectorXd w = manifold_weights(spec, basis);
  // d log g_n / d log kappa = p * (4 nu / kappa^2) / (shift + lambda_n)
  Eigen::VectorXd dlog(w.size());
  for (Eigen::Index n = 0; n < w.size(); ++n)
    dlog[n] = p * (4.0 * spec.smoothness / kappa2) / (shift + basis.eigenvalues[n]);
  const double mean_dlog = w.dot(dlog) / w.sum();
  return w.cwiseProduct((dlog.array() - mean_dlog).matrix());
}

inline double matern_manifold(const KernelSpec& spec, const LaplacianBasis& basis, Index i, Index j) {
  if (spec.family != KernelFamily::ManifoldMatern)
    throw Error(ErrorKind::InvalidArgument, "matern_manifold needs the manifold family");
  const auto nodes = basis.node_count();
  if (i >= nodes || j >= nodes)
    throw Error(ErrorKind::NodeNotInBasis, "node index outside the Laplacian basis");
  Eigen::VectorXd w = manifold_weights(spec, basis);
  const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
  return (basis.eigenvectors.row(ii).transpose().cwiseProduct(w)).dot(basis.eigenvectors.row(jj).transpose());
}

/// Covariance over a fixed, indexed input set.
///
/// Euclidean kernels hold the coordinates of the inputs; manifold kernels hold
/// a Laplacian basis whose nodes are the inputs. Either way the GP layer only
/// sees input indices.
class Kernel {
 public:
  static Kernel euclidean(const KernelSpec& spec, std::shared_ptr<const std::vector<Point3>> points) {
    if (spec.family != KernelFamily::EuclideanMatern)
      throw Error(ErrorKind::InvalidArgument, "kernel spec is not of the Euclidean family");
    spec.validate();
    Kernel k;
    k.spec_ = spec;
    k.points_ = std::move(points);
    return k;
  }

  static Kernel manifold(const KernelSpec& spec, std::shared_ptr<const LaplacianBasis> basis) {
    if (spec.family != KernelFamily::ManifoldMatern)
      throw Error(ErrorKind::InvalidArgument, "kernel spec is not of the manifold family");
    spec.validate();
    Kernel k;
    k.spec_ = spec;
    k.basis_ = std::move(basis);
    k.weights_ = manifold_weights(spec, *k.basis_);
    return k;
  }

  const KernelSpec& spec() const noexcept { return spec_; }
  const LaplacianBasis* basis() const noexcept { return basis_.get(); }
  const std::vector<Point3>* points() const noexcept { return points_.get(); }

  std::size_t input_count() const noexcept { return basis_ ? basis_->node_count() : points_->size(); }

  /// Same inputs, different hyperparameters.
  Kernel with_spec(const KernelSpec& spec) const {
    return basis_ ? manifold(spec, basis_) : euclidean(spec, points_);
  }

  double operator()(Index i, Index j) const {
    check(i);
    check(j);
    if (basis_) {
      const auto& f = basis_->eigenvectors;
      return (f.row(static_cast<Eigen::Index>(i)).transpose().cwiseProduct(weights_))
          .dot(f.row(static_cast<Eigen::Index>(j)).transpose());
    }
    return matern_half_integer(spec_.variance, spec_.lengthscale, spec_.smoothness,
                               ((*points_)[i] - (*points_)[j]).norm());
  }

  /// k(i, i).
  double prior_variance(Index i) const {
    if (!basis_) {
      check(i);
      return spec_.variance;
    }
    return (*this)(i, i);
  }

  /// Kernel matrix K[r, c] = k(rows[r], cols[c]).
  Eigen::MatrixXd matrix(std::span<const Index> rows, std::span<const Index> cols) const {
    for (Index i : rows) check(i);
    for (Index i : cols) check(i);
    const auto nr = static_cast<Eigen::Index>(rows.size());
    const auto nc = static_cast<Eigen::Index>(cols.size());
    if (basis_) {
      Eigen::MatrixXd fr = gather(rows);
      Eigen::MatrixXd fc = gather(cols);
      Eigen::MatrixXd out = (fr * weights_.asDiagonal()) * fc.transpose();
      if (same(rows, cols)) out = 0.5 * (out + out.transpose()).eval();
      return out;
    }
    Eigen::MatrixXd out(nr, nc);
    const auto& pts = *points_;
    if (same(rows, cols)) {
      for (Eigen::Index c = 0; c < nc; ++c) {
        out(c, c) = spec_.variance;
        for (Eigen::Index r = c + 1; r < nr; ++r)
          out(r, c) = out(c, r) = matern_half_integer(spec_.variance, spec_.lengthscale, spec_.smoothness,
                                                      (pts[rows[r]] - pts[cols[c]]).norm());
      }
      return out;
    }
#pragma omp parallel for schedule(static)
    for (Eigen::Index c = 0; c < nc; ++c)
      for (Eigen::Index r = 0; r < nr; ++r)
        out(r, c) = matern_half_integer(spec_.variance, spec_.lengthscale, spec_.smoothness,
                                        (pts[rows[r]] - pts[cols[c]]).norm());
    return out;
  }

  Eigen::MatrixXd matrix(std::span<const Index> idx) const { return matrix(idx, idx); }

  /// d K / d log(kappa) over idx x idx.
  Eigen::MatrixXd dlog_lengthscale(std::span<const Index> idx) const {
    for (Index i : idx) check(i);
    const auto n = static_cast<Eigen::Index>(idx.size());
    if (basis_) {
      Eigen::VectorXd dw = manifold_weights_dlog_lengthscale(spec_, *basis_);
      Eigen::MatrixXd f = gather(idx);
      Eigen::MatrixXd out = (f * dw.asDiagonal()) * f.transpose();
      return 0.5 * (out + out.transpose());
    }
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
    const auto& pts = *points_;
    for (Eigen::Index c = 0; c < n; ++c)
      for (Eigen::Index r = c + 1; r < n; ++r)
        out(r, c) = out(c, r) = matern_half_integer_dlog_lengthscale(spec_.variance, spec_.lengthscale,
                                                                     spec_.smoothness, (pts[idx[r]] - pts[idx[c]]).norm());
    return out;
  }

 private:
  Kernel() = default;

  void check(Index i) const {
    if (i >= input_count())
      throw Error(basis_ ? ErrorKind::NodeNotInBasis : ErrorKind::InvalidArgument,
                  "kernel input " + std::to_string(i) + " out of range");
  }

  static bool same(std::span<const Index> a, std::span<const Index> b) {
    return a.size() == b.size() && (a.data() == b.data() || std::equal(a.begin(), a.end(), b.begin()));
  }

  Eigen::MatrixXd gather(std::span<const Index> idx) const {
    const auto& f = basis_->eigenvectors;
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), f.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = f.row(static_cast<Eigen::Index>(idx[r]));
    return out;
  }

  KernelSpec spec_;
  std::shared_ptr<const std::vector<Point3>> points_;
  std::shared_ptr<const LaplacianBasis> basis_;
  Eigen::VectorXd weights_;
};

/// Kernel matrix between explicit coordinate lists (Euclidean family).
inline Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, std::span<const Point3> rows, std::span<const Point3> cols) {
  spec.validate();
  if (spec.family != KernelFamily::EuclideanMatern)
    throw Error(ErrorKind::InvalidArgument, "coordinate kernel matrices need the Euclidean family");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c)
    for (std::size_t r = 0; r < rows.size(); ++r)
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = matern_euclidean(spec, rows[r], cols[c]);
  return out;
}

/// Kernel matrix between basis nodes (manifold family).
inline Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const LaplacianBasis& basis, std::span<const Index> rows,
                                     std::span<const Index> cols) {
  auto shared = std::shared_ptr<const LaplacianBasis>(&basis, [](const LaplacianBasis*) {});
  return Kernel::manifold(spec, shared).matrix(rows, cols);
}

}  // namespace gpsimp
