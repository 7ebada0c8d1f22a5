#include <gtest/gtest.h>

#include "gpsimp/laplacian.hpp"
#include "gpsimp/synthetic.hpp"
#include "oracles.hpp"

using namespace gpsimp;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no gpsimp::Error thrown";
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST(GraphLaplacianTest, TwoNodes) {
  GraphLaplacian lap = build_graph_laplacian({Point3(0, 0, 0), Point3(1, 0, 0)}, 1);
  Eigen::MatrixXd l(lap.matrix);
  EXPECT_NEAR(l(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(l(0, 1), -1.0, 1e-15);
  LaplacianBasis b = laplacian_eigenpairs(lap.matrix, 2);
  EXPECT_NEAR(b.eigenvalues[0], 0.0, 1e-14);
  EXPECT_NEAR(b.eigenvalues[1], 2.0, 1e-14);
}

TEST(GraphLaplacianTest, PathOfThree) {
  // equally spaced points, k = 1: edges 0-1 and 1-2 with equal weight, so the
  // normalised Laplacian is that of the unweighted path, spectrum {0, 1, 2}
  GraphLaplacian lap = build_graph_laplacian({Point3(0, 0, 0), Point3(1, 0, 0), Point3(2, 0, 0)}, 1);
  LaplacianBasis b = laplacian_eigenpairs(lap.matrix, 3);
  EXPECT_NEAR(b.eigenvalues[0], 0.0, 1e-14);
  EXPECT_NEAR(b.eigenvalues[1], 1.0, 1e-14);
  EXPECT_NEAR(b.eigenvalues[2], 2.0, 1e-14);
}

TEST(GraphLaplacianTest, StructureOnRandomCloud) {
  auto pts = oracle::random_points(300, 4);
  GraphLaplacian lap = build_graph_laplacian(pts, 10);
  Eigen::MatrixXd l(lap.matrix);
  EXPECT_LE((l - l.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  // D^{1/2} 1 spans the null space
  Eigen::VectorXd s = lap.degree.cwiseSqrt();
  EXPECT_LE((l * s).norm(), 1e-12 * s.norm());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(l);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
  EXPECT_LE(es.eigenvalues().maxCoeff(), 2.0 + 1e-12);
  EXPECT_GT(lap.bandwidth, 0.0);
}

TEST(GraphLaplacianTest, Errors) {
  auto pts = oracle::random_points(5, 1);
  EXPECT_EQ(kind_of([&] { build_graph_laplacian(pts, 5); }), ErrorKind::GraphTooSmall);
  GraphLaplacian lap = build_graph_laplacian(pts, 2);
  EXPECT_EQ(kind_of([&] { laplacian_eigenpairs(lap.matrix, 6); }), ErrorKind::KOutOfRange);
}

TEST(EigenpairsTest, DenseOrthonormalAndSignFixed) {
  auto pts = oracle::random_points(200, 3);
  GraphLaplacian lap = build_graph_laplacian(pts, 10);
  LaplacianBasis b = laplacian_eigenpairs(lap.matrix, 50);
  ASSERT_EQ(b.count(), 50u);
  EXPECT_LE(b.max_residual, 1e-10);
  Eigen::MatrixXd gram = b.eigenvectors.transpose() * b.eigenvectors;
  EXPECT_LE((gram - Eigen::MatrixXd::Identity(50, 50)).cwiseAbs().maxCoeff(), 1e-10);
  for (Eigen::Index c = 0; c < 50; ++c) {
    Eigen::Index r = 0;
    while (std::abs(b.eigenvectors(r, c)) < 1e-12) ++r;
    EXPECT_GT(b.eigenvectors(r, c), 0.0);
  }
  for (Eigen::Index c = 1; c < 50; ++c) EXPECT_LE(b.eigenvalues[c - 1], b.eigenvalues[c]);
  LaplacianBasis again = laplacian_eigenpairs(lap.matrix, 50);
  EXPECT_EQ(again.eigenvalues, b.eigenvalues);
  EXPECT_EQ(again.eigenvectors, b.eigenvectors);
}

TEST(EigenpairsTest, KrylovAgreesWithDense) {
  PointCloud c = generate_synthetic(Shape::SpikedPlane, 1200, 0.0, 9);
  GraphLaplacian lap = build_graph_laplacian(c.points(), 10);
  EigenSolverOptions dense;
  dense.method = EigenMethod::Dense;
  EigenSolverOptions krylov;
  krylov.method = EigenMethod::ShiftInvertLanczos;
  LaplacianBasis a = laplacian_eigenpairs(lap.matrix, 60, dense);
  LaplacianBasis b = laplacian_eigenpairs(lap.matrix, 60, krylov);
  EXPECT_LE(b.max_residual, 1e-8);
  for (Eigen::Index i = 0; i < 60; ++i) EXPECT_NEAR(a.eigenvalues[i], b.eigenvalues[i], 1e-9);
  // compare spectral projectors rather than vectors (robust to near-degeneracy)
  Eigen::MatrixXd pa = a.eigenvectors.leftCols(50) * a.eigenvectors.leftCols(50).transpose();
  Eigen::MatrixXd pb = b.eigenvectors.leftCols(50) * b.eigenvectors.leftCols(50).transpose();
  if (a.eigenvalues[50] - a.eigenvalues[49] > 1e-6) EXPECT_LE((pa - pb).norm(), 1e-6);
}

TEST(EigenpairsTest, KrylovIsDeterministic) {
  PointCloud c = generate_synthetic(Shape::CubeSurface, 2500, 0.0, 1);
  GraphLaplacian lap = build_graph_laplacian(c.points(), 10);
  LaplacianBasis a = laplacian_eigenpairs(lap.matrix, 40);
  LaplacianBasis b = laplacian_eigenpairs(lap.matrix, 40);
  EXPECT_EQ(a.eigenvalues, b.eigenvalues);
  EXPECT_EQ(a.eigenvectors, b.eigenvectors);
  EXPECT_LE(a.max_residual, 1e-8);
}
