#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gpsimp/error.hpp"

namespace gpsimp {

using Point3 = Eigen::Vector3d;
using Index = std::size_t;

/// Named per-point scalar field.
struct Attribute {
  std::string name;
  std::vector<double> values;
};

/// Ordered 3D point set with optional named scalar fields stored column-wise.
///
/// Construction validates that every coordinate is finite and that each
/// attribute has exactly one value per point. Instances are not mutated by
/// any library operation and may be shared across threads for reading.
class PointCloud {
 public:
  PointCloud() = default;

  explicit PointCloud(std::vector<Point3> points, std::vector<Attribute> attributes = {})
      : points_(std::move(points)), attributes_(std::move(attributes)) {
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (!points_[i].allFinite())
        throw Error(ErrorKind::NonFiniteCoordinate, "point " + std::to_string(i) + " is not finite");
    }
    for (const auto& attr : attributes_) {
      if (attr.values.size() != points_.size())
        throw Error(ErrorKind::LengthMismatch,
                    "attribute '" + attr.name + "' has " + std::to_string(attr.values.size()) +
                        " values for " + std::to_string(points_.size()) + " points");
    }
  }

  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }

  const Point3& operator[](Index i) const { return points_[i]; }
  const std::vector<Point3>& points() const noexcept { return points_; }
  const std::vector<Attribute>& attributes() const noexcept { return attributes_; }

  const Attribute* find_attribute(const std::string& name) const {
    for (const auto& a : attributes_)
      if (a.name == name) return &a;
    return nullptr;
  }

  /// Copy of this cloud with `attr` added (or replaced, if the name exists).
  PointCloud with_attribute(Attribute attr) const {
    std::vector<Attribute> attrs = attributes_;
    bool replaced = false;
    for (auto& a : attrs) {
      if (a.name == attr.name) {
        a = attr;
        replaced = true;
      }
    }
    if (!replaced) attrs.push_back(std::move(attr));
    return PointCloud(points_, std::move(attrs));
  }

  /// Sub-cloud made of the listed points (attributes follow along).
  PointCloud select(const std::vector<Index>& indices) const {
    std::vector<Point3> pts;
    pts.reserve(indices.size());
    for (Index i : indices) pts.push_back(points_.at(i));
    std::vector<Attribute> attrs;
    for (const auto& a : attributes_) {
      Attribute sub{a.name, {}};
      sub.values.reserve(indices.size());
      for (Index i : indices) sub.values.push_back(a.values[i]);
      attrs.push_back(std::move(sub));
    }
    return PointCloud(std::move(pts), std::move(attrs));
  }

 private:
  std::vector<Point3> points_;
  std::vector<Attribute> attributes_;
};

struct BoundingBox {
  Point3 min_corner = Point3::Zero();
  Point3 max_corner = Point3::Zero();

  Point3 extent() const { return max_corner - min_corner; }
  double volume() const { return extent().prod(); }
  double diagonal() const { return extent().norm(); }
};

inline BoundingBox bounding_box(const std::vector<Point3>& points) {
  if (points.empty()) throw Error(ErrorKind::EmptyCloud, "bounding box of an empty cloud");
  BoundingBox box{points.front(), points.front()};
  for (const auto& p : points) {
    box.min_corner = box.min_corner.cwiseMin(p);
    box.max_corner = box.max_corner.cwiseMax(p);
  }
  return box;
}

inline BoundingBox bounding_box(const PointCloud& cloud) { return bounding_box(cloud.points()); }

}  // namespace gpsimp
