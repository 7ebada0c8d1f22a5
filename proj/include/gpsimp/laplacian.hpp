#pragma once

// Graph Laplacian of a kNN graph and its lowest eigenpairs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "gpsimp/cloud.hpp"
#include "gpsimp/error.hpp"
#include "gpsimp/spatial.hpp"

namespace gpsimp {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct GraphLaplacian {
  SparseMatrix matrix;     // I - D^{-1/2} W D^{-1/2}
  Eigen::VectorXd degree;  // row sums of W
  double bandwidth = 0.0;  // Gaussian edge-weight bandwidth h
};

/// Symmetric normalised Laplacian of the symmetrised k-nearest-neighbour
/// graph with weights exp(-|xi - xj|^2 / (2 h^2)), h the mean kNN distance.
inline GraphLaplacian build_graph_laplacian(const std::vector<Point3>& points, std::size_t k_graph) {
  const std::size_t n = points.size();
  if (k_graph < 1) throw Error(ErrorKind::InvalidArgument, "graph neighbour count must be positive");
  if (n < k_graph + 1)
    throw Error(ErrorKind::GraphTooSmall,
                std::to_string(n) + " nodes cannot carry a " + std::to_string(k_graph) + "-NN graph");

  SpatialIndex index(points);
  std::vector<std::vector<std::pair<double, Index>>> knn(n);
  double dist_sum = 0.0;
  for (Index i = 0; i < n; ++i) {
    auto res = index.knn_query_with_distances(points[i], k_graph + 1);
    // drop the query point itself (or one coincident copy of it)
    auto self = std::find_if(res.begin(), res.end(), [&](const auto& e) { return e.second == i; });
    if (self != res.end())
      res.erase(self);
    else
      res.pop_back();
    for (const auto& e : res) dist_sum += std::sqrt(e.first);
    knn[i] = std::move(res);
  }
  double h = dist_sum / static_cast<double>(n * k_graph);
  if (!(h > 0.0)) h = 1.0;  // fully coincident points: every weight becomes 1

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(2 * n * k_graph);
  for (Index i = 0; i < n; ++i) {
    for (const auto& [d2, j] : knn[i]) {
      const double w = std::exp(-d2 / (2.0 * h * h));
      trip.emplace_back(static_cast<int>(i), static_cast<int>(j), w);
      trip.emplace_back(static_cast<int>(j), static_cast<int>(i), w);
    }
  }
  SparseMatrix w(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  // mutual neighbours appear twice; keep one copy of the weight
  w.setFromTriplets(trip.begin(), trip.end(), [](double a, double) { return a; });

  GraphLaplacian out;
  out.bandwidth = h;
  out.degree = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (int c = 0; c < w.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(w, c); it; ++it) out.degree[it.row()] += it.value();
  Eigen::VectorXd inv_sqrt = out.degree.cwiseSqrt().cwiseInverse();

  std::vector<Eigen::Triplet<double>> lt;
  lt.reserve(w.nonZeros() + n);
  for (Index i = 0; i < n; ++i) lt.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
  for (int c = 0; c < w.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(w, c); it; ++it)
      lt.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                      -it.value() * inv_sqrt[it.row()] * inv_sqrt[it.col()]);
  out.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  out.matrix.setFromTriplets(lt.begin(), lt.end());
  out.matrix.makeCompressed();
  return out;
}

/// Lowest eigenpairs of a graph Laplacian.
///
/// `nodes` names the working-set points the rows refer to. Eigenvectors are
/// orthonormal in the Euclidean inner product and sign-normalised so that
/// their first clearly nonzero entry is positive.
struct LaplacianBasis {
  std::vector<Index> nodes;
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // nodes x count
  double max_residual = 0.0;     // max ||L f - lambda f|| over returned pairs

  std::size_t node_count() const noexcept { return static_cast<std::size_t>(eigenvectors.rows()); }
  std::size_t count() const noexcept { return static_cast<std::size_t>(eigenvalues.size()); }
};

enum class EigenMethod { Automatic, Dense, ShiftInvertLanczos };

struct EigenSolverOptions {
  EigenMethod method = EigenMethod::Automatic;
  std::size_t dense_threshold = 1500;  // Automatic goes dense at or below this size
  double tolerance = 1e-9;             // residual target for the iterative path
  double shift = 1e-3;                 // factorise L + shift*I
  std::size_t block_size = 8;
  std::uint64_t seed = 0x5eed;
};

namespace detail {

inline void fix_signs(Eigen::MatrixXd& vecs) {
  for (Eigen::Index c = 0; c < vecs.cols(); ++c) {
    const double scale = vecs.col(c).cwiseAbs().maxCoeff();
    for (Eigen::Index r = 0; r < vecs.rows(); ++r) {
      if (std::abs(vecs(r, c)) > 1e-8 * scale) {
        if (vecs(r, c) < 0.0) vecs.col(c) = -vecs.col(c);
        break;
      }
    }
  }
}

inline double max_pair_residual(const SparseMatrix& lap, const Eigen::VectorXd& vals, const Eigen::MatrixXd& vecs) {
  Eigen::MatrixXd lv = lap * vecs;
  double worst = 0.0;
  for (Eigen::Index c = 0; c < vecs.cols(); ++c)
    worst = std::max(worst, (lv.col(c) - vals[c] * vecs.col(c)).norm());
  return worst;
}

inline void dense_eigenpairs(const SparseMatrix& lap, std::size_t count, Eigen::VectorXd& vals,
                             Eigen::MatrixXd& vecs) {
  Eigen::MatrixXd dense = Eigen::MatrixXd(lap);
  dense = 0.5 * (dense + dense.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense);
  if (es.info() != Eigen::Success) throw Error(ErrorKind::ConvergenceFailure, "dense eigen-solver failed");
  const auto k = static_cast<Eigen::Index>(count);
  vals = es.eigenvalues().head(k);
  vecs = es.eigenvectors().leftCols(k);
}

// Block Krylov iteration on (L + shift I)^{-1} with full two-pass
// re-orthogonalisation. The projected matrix is accumulated column by column
// and symmetrised before each Rayleigh-Ritz step.
inline void lanczos_eigenpairs(const SparseMatrix& lap, std::size_t count, const EigenSolverOptions& opt,
                               Eigen::VectorXd& vals, Eigen::MatrixXd& vecs, double& residual) {
  const Eigen::Index n = lap.rows();
  const auto k = static_cast<Eigen::Index>(count);
  const Eigen::Index b = static_cast<Eigen::Index>(std::max<std::size_t>(1, opt.block_size));

  SparseMatrix shifted = lap;
  for (Eigen::Index i = 0; i < n; ++i) shifted.coeffRef(i, i) += opt.shift;
  Eigen::SimplicialLDLT<SparseMatrix> solver(shifted);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorKind::ConvergenceFailure, "factorisation of the shifted Laplacian failed");

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> gauss;
  auto random_block = [&](Eigen::Index cols) {
    Eigen::MatrixXd m(n, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < n; ++r) m(r, c) = gauss(rng);
    return m;
  };

  const Eigen::Index max_dim = std::min<Eigen::Index>(n, std::max<Eigen::Index>(4 * k + 10 * b, 2 * k + 200));
  Eigen::MatrixXd basis(n, std::min<Eigen::Index>(max_dim + b, n - n % b));
  Eigen::MatrixXd proj = Eigen::MatrixXd::Zero(basis.cols(), basis.cols());

  // Block classical Gram-Schmidt; the second pass runs only when a column
  // lost most of its norm in the first (Daniel-Gragg-Kaufman-Stewart test).
  auto orthogonalize = [&](Eigen::MatrixXd& w, Eigen::Index filled, Eigen::Index col_offset, bool record) {
    if (filled == 0) return;
    for (int pass = 0; pass < 2; ++pass) {
      const Eigen::VectorXd before = w.colwise().norm().transpose();
      Eigen::MatrixXd h = basis.leftCols(filled).transpose() * w;
      w.noalias() -= basis.leftCols(filled) * h;
      if (record) proj.block(0, col_offset, filled, w.cols()) += h;
      const Eigen::VectorXd after = w.colwise().norm().transpose();
      if ((after.array() >= 0.7071 * before.array()).all()) break;
    }
  };

  // Orthonormalises `w` (n x b) into the basis at column `filled`. When
  // `from_col` >= 0 the triangular factor is recorded as the coupling of the
  // new block to the block starting at `from_col`.
  auto append_block = [&](const Eigen::MatrixXd& w, Eigen::Index filled, Eigen::Index from_col) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(w);
    Eigen::MatrixXd r = qr.matrixQR().topRows(b).triangularView<Eigen::Upper>();
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, b);
    const double scale = std::max(1.0, r.cwiseAbs().maxCoeff());
    for (Eigen::Index c = 0; c < b; ++c) {
      if (std::abs(r(c, c)) < 1e-10 * scale) {
        // Krylov space exhausted in this direction: continue with a fresh
        // random vector orthogonal to everything so far.
        Eigen::MatrixXd fresh = random_block(1);
        for (int pass = 0; pass < 2; ++pass) {
          if (filled > 0) fresh -= basis.leftCols(filled) * (basis.leftCols(filled).transpose() * fresh);
          if (c > 0) fresh -= q.leftCols(c) * (q.leftCols(c).transpose() * fresh);
        }
        q.col(c) = fresh.normalized();
        r.row(c).setZero();
      }
    }
    basis.middleCols(filled, b) = q;
    if (from_col >= 0) proj.block(filled, from_col, b, b) = r;
  };

  Eigen::MatrixXd start = random_block(b);
  orthogonalize(start, 0, 0, false);
  append_block(start, 0, -1);
  Eigen::Index filled = b;

  Eigen::Index next_check = std::min(max_dim, k + std::max<Eigen::Index>(2 * b, k / 2));
  Eigen::Index applied = 0;  // columns whose images have been processed
  while (true) {
    // expand
    while (filled < next_check && filled + b <= basis.cols()) {
      Eigen::MatrixXd w(n, b);
      for (Eigen::Index c = 0; c < b; ++c) w.col(c) = solver.solve(basis.col(applied + c));
      orthogonalize(w, filled, applied, true);
      append_block(w, filled, applied);
      applied += b;
      filled += b;
    }

    const Eigen::Index m = applied;
    Eigen::MatrixXd t = proj.topLeftCorner(m, m);
    t = 0.5 * (t + t.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    // largest Ritz values of the inverse are the smallest of L
    Eigen::MatrixXd y = es.eigenvectors().rightCols(k).rowwise().reverse();
    const bool last = filled + b > basis.cols() || next_check >= max_dim;
    if (!last) {
      // Residual of the inverse operator from the coupling to the next
      // block, mapped back to L: |L x - lambda x| <= (lambda + shift) |L + shift I| |r|.
      const Eigen::MatrixXd r = proj.block(m, m - b, b, b) * y.bottomRows(b);
      const Eigen::VectorXd theta = es.eigenvalues().tail(k).reverse();
      double estimate = 0.0;
      for (Eigen::Index c = 0; c < k; ++c)
        estimate = std::max(estimate, (2.0 + opt.shift) * r.col(c).norm() / theta[c]);
      if (estimate > 0.1 * opt.tolerance) {
        next_check = std::min(max_dim, next_check + std::max<Eigen::Index>(2 * b, k / 4));
        continue;
      }
    }
    vecs = basis.leftCols(m) * y;
    vecs.colwise().normalize();
    Eigen::MatrixXd lv = lap * vecs;
    vals.resize(k);
    residual = 0.0;
    for (Eigen::Index c = 0; c < k; ++c) {
      vals[c] = vecs.col(c).dot(lv.col(c));
      residual = std::max(residual, (lv.col(c) - vals[c] * vecs.col(c)).norm());
    }
    if (residual <= opt.tolerance || last) break;
    next_check = std::min(max_dim, next_check + std::max<Eigen::Index>(2 * b, k / 4));
  }
  if (residual > std::max(opt.tolerance, 1e-6))
    throw Error(ErrorKind::ConvergenceFailure,
                "Lanczos stopped with residual " + std::to_string(residual) + " after " + std::to_string(filled) +
                    " basis vectors");

  // Ritz values come back in order already, but a Rayleigh quotient can swap
  // near-degenerate neighbours
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) perm[static_cast<std::size_t>(i)] = i;
  std::stable_sort(perm.begin(), perm.end(), [&](Eigen::Index a, Eigen::Index c) { return vals[a] < vals[c]; });
  Eigen::VectorXd sv(k);
  Eigen::MatrixXd svec(n, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    sv[i] = vals[perm[static_cast<std::size_t>(i)]];
    svec.col(i) = vecs.col(perm[static_cast<std::size_t>(i)]);
  }
  vals = std::move(sv);
  vecs = std::move(svec);
}

}  // namespace detail

/// The `count` smallest eigenpairs of a symmetric Laplacian, ascending.
inline LaplacianBasis laplacian_eigenpairs(const SparseMatrix& lap, std::size_t count,
                                           const EigenSolverOptions& opt = {}) {
  const auto n = static_cast<std::size_t>(lap.rows());
  if (count < 1 || count > n)
    throw Error(ErrorKind::KOutOfRange,
                "eigenpair count " + std::to_string(count) + " outside [1, " + std::to_string(n) + "]");
  LaplacianBasis basis;
  basis.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) basis.nodes[i] = i;

  bool dense = opt.method == EigenMethod::Dense ||
               (opt.method == EigenMethod::Automatic && (n <= opt.dense_threshold || 3 * count >= n));
  if (dense) {
    detail::dense_eigenpairs(lap, count, basis.eigenvalues, basis.eigenvectors);
  } else {
    double res = 0.0;
    detail::lanczos_eigenpairs(lap, count, opt, basis.eigenvalues, basis.eigenvectors, res);
  }
  basis.eigenvalues = basis.eigenvalues.cwiseMax(0.0);
  detail::fix_signs(basis.eigenvectors);
  basis.max_residual = detail::max_pair_residual(lap, basis.eigenvalues, basis.eigenvectors);
  return basis;
}

}  // namespace gpsimp
