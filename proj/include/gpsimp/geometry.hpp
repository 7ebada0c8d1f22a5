#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "gpsimp/cloud.hpp"
#include "gpsimp/error.hpp"
#include "gpsimp/spatial.hpp"

namespace gpsimp {

struct NeighborhoodParams {
  std::size_t neighbor_count = 25;   // approximate neighbours per radius ball
  std::optional<double> radius;      // explicit radius; estimated when empty
  std::size_t min_neighbors = 4;     // kNN fallback size for sparse balls
};

/// Principal axes of a neighbourhood, eigenvalues ascending.
struct LocalFrame {
  Eigen::Vector3d eigenvalues = Eigen::Vector3d::Zero();
  Eigen::Matrix3d eigenvectors = Eigen::Matrix3d::Identity();  // column j pairs with eigenvalue j
  Point3 centroid = Point3::Zero();
  std::size_t neighbor_count = 0;
};

struct VariationField {
  std::vector<double> values;
  NeighborhoodParams params;  // radius always resolved
};

/// Neighbourhood radius from the bounding box and a target neighbour count.
///
/// Models each point as owning a disc of area V^(2/3)/N and returns the
/// radius of the disc holding `k` such areas: r = sqrt(k V^(2/3) / (pi N)).
/// A flat box (V = 0) falls back to r = d k / N with d the box diagonal.
inline double estimate_radius(const std::vector<Point3>& points, std::size_t k) {
  const std::size_t n = points.size();
  if (n < 4) throw Error(ErrorKind::InvalidArgument, "radius estimation needs at least 4 points");
  if (k < 4) throw Error(ErrorKind::InvalidArgument, "neighbour count must be at least 4");
  BoundingBox box = bounding_box(points);
  const double volume = box.volume();
  if (volume > 0.0) {
    const double area_per_point = std::cbrt(volume * volume) / static_cast<double>(n);
    return std::sqrt(static_cast<double>(k) * area_per_point / std::numbers::pi);
  }
  const double diag = box.diagonal();
  if (diag == 0.0) throw Error(ErrorKind::CoincidentPoints, "all points coincide");
  return diag * static_cast<double>(k) / static_cast<double>(n);
}

inline double estimate_radius(const PointCloud& cloud, std::size_t k) { return estimate_radius(cloud.points(), k); }

/// Symmetric 3x3 eigen-decomposition, ascending, negatives clamped to zero.
inline void symmetric_eigen3(const Eigen::Matrix3d& cov, Eigen::Vector3d& values, Eigen::Matrix3d& vectors) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  values = es.eigenvalues().cwiseMax(0.0);
  vectors = es.eigenvectors();
}

/// Frame of an explicit neighbour set (unnormalised scatter matrix).
inline LocalFrame frame_from_neighbors(const std::vector<Point3>& points, const std::vector<Index>& neighbors) {
  LocalFrame frame;
  frame.neighbor_count = neighbors.size();
  if (neighbors.empty()) return frame;
  Point3 c = Point3::Zero();
  for (Index j : neighbors) c += points[j];
  c /= static_cast<double>(neighbors.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (Index j : neighbors) {
    const Point3 d = points[j] - c;
    cov.noalias() += d * d.transpose();
  }
  frame.centroid = c;
  symmetric_eigen3(cov, frame.eigenvalues, frame.eigenvectors);
  return frame;
}

/// Local frame of point `i`: radius neighbourhood, or the `min_neighbors`
/// nearest points when the ball is under-populated.
inline LocalFrame local_frame(const SpatialIndex& index, Index i, double radius, std::size_t min_neighbors) {
  const Point3& p = index.point(i);
  std::vector<Index> nb = index.radius_query(p, radius);
  if (nb.size() < min_neighbors) nb = index.knn_query(p, std::min(min_neighbors, index.size()));
  return frame_from_neighbors(index.points(), nb);
}

inline double surface_variation(const LocalFrame& frame) {
  const double trace = frame.eigenvalues.sum();
  if (!(trace > 0.0)) return 0.0;
  return frame.eigenvalues[0] / trace;
}

inline Eigen::Vector3d estimate_normal(const LocalFrame& frame) { return frame.eigenvectors.col(0).normalized(); }

/// Surface variation lambda0 / (lambda0 + lambda1 + lambda2) at every point.
inline VariationField surface_variation_field(const std::vector<Point3>& points, NeighborhoodParams params = {}) {
  if (points.size() < 4) throw Error(ErrorKind::InvalidArgument, "surface variation needs at least 4 points");
  if (params.min_neighbors < 4) throw Error(ErrorKind::InvalidArgument, "min_neighbors must be at least 4");
  const double radius = params.radius ? *params.radius : estimate_radius(points, params.neighbor_count);
  if (!(radius > 0.0)) throw Error(ErrorKind::NonPositiveRadius, "neighbourhood radius must be positive");
  params.radius = radius;

  SpatialIndex index(points);
  VariationField field;
  field.params = params;
  field.values.assign(points.size(), 0.0);
  const auto n = static_cast<std::ptrdiff_t>(points.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    LocalFrame f = local_frame(index, static_cast<Index>(i), radius, params.min_neighbors);
    field.values[i] = surface_variation(f);
  }
  return field;
}

inline VariationField surface_variation_field(const PointCloud& cloud, NeighborhoodParams params = {}) {
  return surface_variation_field(cloud.points(), params);
}

}  // namespace gpsimp
