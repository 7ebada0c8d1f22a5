#pragma once

// Synthetic test shapes sampled uniformly by area.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "gpsimp/cloud.hpp"
#include "gpsimp/error.hpp"

namespace gpsimp {

enum class Shape { CubeSurface, SphereSurface, SpikedPlane };

inline Shape parse_shape(const std::string& name) {
  if (name == "cube" || name == "cube_surface") return Shape::CubeSurface;
  if (name == "sphere" || name == "sphere_surface") return Shape::SphereSurface;
  if (name == "spiked-plane" || name == "spiked_plane") return Shape::SpikedPlane;
  throw Error(ErrorKind::InvalidArgument, "unknown shape '" + name + "'");
}

/// Spiked plane geometry: the square [-1, 1]^2 at z = 0 with a cone of base
/// radius kSpikeRadius and height kSpikeHeight standing at the origin.
inline constexpr double kSpikeRadius = 0.1;
inline constexpr double kSpikeHeight = 0.35;

/// Diagonal of the noise-free shape's bounding box.
inline double shape_diagonal(Shape shape) {
  switch (shape) {
    case Shape::CubeSurface: return std::sqrt(3.0);
    case Shape::SphereSurface: return 2.0 * std::sqrt(3.0);
    case Shape::SpikedPlane: return std::sqrt(8.0 + kSpikeHeight * kSpikeHeight);
  }
  return 1.0;
}

/// True when `p` (noise-free) lies on the cone of the spiked plane.
inline bool on_spike(const Point3& p) { return p.z() > 0.0 || std::hypot(p.x(), p.y()) < kSpikeRadius; }

/// `n` points on the shape's surface with isotropic Gaussian noise of
/// standard deviation `noise_sigma * d` (d the bounding-box diagonal).
///   cube:         surface of [0, 1]^3
///   sphere:       unit sphere
///   spiked plane: see kSpikeRadius / kSpikeHeight
inline PointCloud generate_synthetic(Shape shape, std::size_t n, double noise_sigma, std::uint64_t seed) {
  if (n < 8) throw Error(ErrorKind::InvalidArgument, "synthetic shapes need at least 8 points");
  if (!(noise_sigma >= 0.0)) throw Error(ErrorKind::InvalidArgument, "noise must be non-negative");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double slant = std::hypot(kSpikeRadius, kSpikeHeight);
  const double cone_area = std::numbers::pi * kSpikeRadius * slant;
  const double flat_area = 4.0 - std::numbers::pi * kSpikeRadius * kSpikeRadius;
  const double cone_fraction = cone_area / (cone_area + flat_area);

  std::vector<Point3> pts;
  pts.reserve(n);
  while (pts.size() < n) {
    Point3 p;
    switch (shape) {
      case Shape::CubeSurface: {
        const int face = static_cast<int>(unit(rng) * 6.0) % 6;
        const double u = unit(rng), v = unit(rng);
        const double side = face % 2 == 0 ? 0.0 : 1.0;
        if (face < 2)
          p = {side, u, v};
        else if (face < 4)
          p = {u, side, v};
        else
          p = {u, v, side};
        break;
      }
      case Shape::SphereSurface: {
        Point3 g(gauss(rng), gauss(rng), gauss(rng));
        const double len = g.norm();
        if (len < 1e-12) continue;
        p = g / len;
        break;
      }
      case Shape::SpikedPlane: {
        if (unit(rng) < cone_fraction) {
          // uniform on the lateral surface: radius from apex ~ sqrt(u)
          const double t = std::sqrt(unit(rng));
          const double phi = 2.0 * std::numbers::pi * unit(rng);
          const double r = kSpikeRadius * t;
          p = {r * std::cos(phi), r * std::sin(phi), kSpikeHeight * (1.0 - t)};
        } else {
          do {
            p = {2.0 * unit(rng) - 1.0, 2.0 * unit(rng) - 1.0, 0.0};
          } while (std::hypot(p.x(), p.y()) < kSpikeRadius);
        }
        break;
      }
    }
    pts.push_back(p);
  }
  if (noise_sigma > 0.0) {
    const double s = noise_sigma * shape_diagonal(shape);
    for (auto& p : pts) p += s * Point3(gauss(rng), gauss(rng), gauss(rng));
  }
  return PointCloud(std::move(pts));
}

}  // namespace gpsimp
