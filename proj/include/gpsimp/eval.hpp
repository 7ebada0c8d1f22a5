#pragma once

// Cloud-level quality measures and point-to-point ICP.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SVD>

#include "gpsimp/cloud.hpp"
#include "gpsimp/error.hpp"
#include "gpsimp/geometry.hpp"
#include "gpsimp/spatial.hpp"

namespace gpsimp {

/// Nearest-neighbour distance statistics between two point sets. The
/// symmetric mean is the larger of the two directional means.
struct HausdorffReport {
  double mean_a_to_b = 0.0;
  double max_a_to_b = 0.0;
  double mean_b_to_a = 0.0;
  double max_b_to_a = 0.0;
  double symmetric_mean = 0.0;
  double symmetric_max = 0.0;
};

/// Distance from each point of `from` to its nearest neighbour in `to`.
inline std::vector<double> directional_distances(const std::vector<Point3>& from, const SpatialIndex& to) {
  std::vector<double> d(from.size());
  const auto n = static_cast<std::ptrdiff_t>(from.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) d[i] = std::sqrt(to.nearest(from[i]).first);
  return d;
}

inline HausdorffReport hausdorff(const PointCloud& a, const PointCloud& b) {
  if (a.empty() || b.empty()) throw Error(ErrorKind::EmptyCloud, "Hausdorff distance needs two non-empty clouds");
  SpatialIndex ia(a), ib(b);
  auto stats = [](const std::vector<double>& d, double& mean, double& max) {
    double sum = 0.0;
    max = 0.0;
    for (double v : d) {
      sum += v;
      max = std::max(max, v);
    }
    mean = sum / static_cast<double>(d.size());
  };
  HausdorffReport r;
  stats(directional_distances(a.points(), ib), r.mean_a_to_b, r.max_a_to_b);
  stats(directional_distances(b.points(), ia), r.mean_b_to_a, r.max_b_to_a);
  r.symmetric_mean = std::max(r.mean_a_to_b, r.mean_b_to_a);
  r.symmetric_max = std::max(r.max_a_to_b, r.max_b_to_a);
  return r;
}

/// Mean surface variation of a cloud, the radius re-estimated for its own
/// density unless `params` fixes one.
inline double mean_surface_variation(const PointCloud& cloud, const NeighborhoodParams& params = {}) {
  VariationField field = surface_variation_field(cloud, params);
  double sum = 0.0;
  for (double v : field.values) sum += v;
  return sum / static_cast<double>(field.values.size());
}

struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Point3 apply(const Point3& p) const { return rotation * p + translation; }

  /// this ∘ other (other applied first).
  RigidTransform compose(const RigidTransform& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
  }

  RigidTransform inverse() const { return {rotation.transpose(), -(rotation.transpose() * translation)}; }

  static RigidTransform about_z(double angle, const Eigen::Vector3d& translation = Eigen::Vector3d::Zero()) {
    RigidTransform t;
    t.rotation = Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    t.translation = translation;
    return t;
  }
};

inline PointCloud transform_cloud(const PointCloud& cloud, const RigidTransform& t) {
  std::vector<Point3> pts;
  pts.reserve(cloud.size());
  for (const auto& p : cloud.points()) pts.push_back(t.apply(p));
  return PointCloud(std::move(pts), cloud.attributes());
}

/// Angle of the rotation taking `a` to `b`.
inline double rotation_angle_between(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  const double c = ((a.transpose() * b).trace() - 1.0) / 2.0;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

/// Least-squares rigid transform taking `src[i]` onto `dst[i]` (Kabsch).
/// Returns false when the cross-covariance has rank below 2.
inline bool kabsch(const std::vector<Point3>& src, const std::vector<Point3>& dst, RigidTransform& out) {
  const std::size_t n = src.size();
  if (n == 0 || dst.size() != n) return false;
  Point3 cs = Point3::Zero(), cd = Point3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= static_cast<double>(n);
  cd /= static_cast<double>(n);
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < n; ++i) h.noalias() += (src[i] - cs) * (dst[i] - cd).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (!(sv[0] > 0.0) || sv[1] <= 1e-12 * sv[0]) return false;
  Eigen::Matrix3d fix = Eigen::Matrix3d::Identity();
  // reflection guard
  fix(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  out.rotation = svd.matrixV() * fix * svd.matrixU().transpose();
  out.translation = cd - out.rotation * cs;
  return true;
}

struct IcpResult {
  RigidTransform transform;
  double inlier_rmse = 0.0;       // over correspondences within 3x the median distance
  double rmse = 0.0;              // over all correspondences
  std::size_t iterations = 0;
  bool converged = false;
  bool degenerate = false;        // rank-deficient correspondences; transform is the init
  std::vector<double> rmse_trace;
};

/// Point-to-point ICP moving `source` onto `target`, starting from `init`.
/// Stops when the RMSE improves by less than `tol` or after `max_iter`
/// transform updates.
inline IcpResult icp_point_to_point(const PointCloud& source, const PointCloud& target, const RigidTransform& init = {},
                                    std::size_t max_iter = 50, double tol = 1e-8) {
  if (source.empty() || target.empty()) throw Error(ErrorKind::EmptyCloud, "ICP needs two non-empty clouds");
  SpatialIndex index(target);
  const std::size_t n = source.size();
  std::vector<Point3> moved(n), matched(n);
  std::vector<double> dist(n);

  auto correspond = [&](const RigidTransform& t) {
    const auto nn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < nn; ++i) {
      moved[i] = t.apply(source[static_cast<Index>(i)]);
      auto [d2, j] = index.nearest(moved[i]);
      matched[i] = target[j];
      dist[i] = std::sqrt(d2);
    }
    double sum = 0.0;
    for (double d : dist) sum += d * d;
    return std::sqrt(sum / static_cast<double>(n));
  };

  IcpResult res;
  res.transform = init;
  double rmse = correspond(res.transform);
  res.rmse_trace.push_back(rmse);
  for (std::size_t it = 0; it < max_iter; ++it) {
    RigidTransform step;
    if (!kabsch(moved, matched, step)) {
      if (it == 0) {
        res.degenerate = true;
        res.transform = init;
        rmse = correspond(init);
      }
      break;
    }
    RigidTransform next = step.compose(res.transform);
    double next_rmse = correspond(next);
    if (next_rmse > rmse) {  // cannot happen in exact arithmetic; keep the better pose
      correspond(res.transform);
      res.converged = true;
      break;
    }
    res.transform = next;
    res.iterations = it + 1;
    res.rmse_trace.push_back(next_rmse);
    const double gain = rmse - next_rmse;
    rmse = next_rmse;
    if (gain < tol) {
      res.converged = true;
      break;
    }
  }
  res.rmse = rmse;

  std::vector<double> sorted = dist;
  auto mid = sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2);
  std::nth_element(sorted.begin(), mid, sorted.end());
  const double threshold = 3.0 * *mid;
  double sum = 0.0;
  std::size_t count = 0;
  for (double d : dist) {
    if (d <= threshold) {
      sum += d * d;
      ++count;
    }
  }
  res.inlier_rmse = count ? std::sqrt(sum / static_cast<double>(count)) : 0.0;
  return res;
}

}  // namespace gpsimp
