#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <random>
#include <utility>
#include <vector>

#include "gpsimp/cloud.hpp"
#include "gpsimp/error.hpp"

namespace gpsimp {

inline double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

/// Exact KD-tree over a point set for radius and k-nearest-neighbour queries.
///
/// The tree keeps its own copy of the coordinates and a permutation of point
/// indices; all query results are indices into the original ordering.
class SpatialIndex {
 public:
  static constexpr std::size_t kLeafSize = 16;

  explicit SpatialIndex(std::vector<Point3> points) : points_(std::move(points)) {
    if (points_.empty()) throw Error(ErrorKind::EmptyCloud, "cannot index an empty cloud");
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), Index{0});
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, points_.size());
  }

  explicit SpatialIndex(const PointCloud& cloud) : SpatialIndex(cloud.points()) {}

  std::size_t size() const noexcept { return points_.size(); }
  const Point3& point(Index i) const { return points_[i]; }
  const std::vector<Point3>& points() const noexcept { return points_; }

  /// All indices within Euclidean distance `radius` of `center` (inclusive),
  /// in ascending index order.
  std::vector<Index> radius_query(const Point3& center, double radius) const {
    if (!(radius > 0.0)) throw Error(ErrorKind::NonPositiveRadius, "radius must be positive");
    std::vector<Index> out;
    radius_recurse(0, center, radius * radius, out);
    std::sort(out.begin(), out.end());
    return out;
  }

  /// The k nearest indices ordered by (distance, index).
  std::vector<Index> knn_query(const Point3& center, std::size_t k) const {
    auto res = knn_query_with_distances(center, k);
    std::vector<Index> out;
    out.reserve(res.size());
    for (const auto& [d2, i] : res) out.push_back(i);
    return out;
  }

  /// Same as knn_query but paired with squared distances.
  std::vector<std::pair<double, Index>> knn_query_with_distances(const Point3& center, std::size_t k) const {
    if (k < 1 || k > points_.size())
      throw Error(ErrorKind::KOutOfRange,
                  "k = " + std::to_string(k) + " outside [1, " + std::to_string(points_.size()) + "]");
    std::priority_queue<std::pair<double, Index>> heap;  // max-heap on (d2, index)
    knn_recurse(0, center, k, heap);
    std::vector<std::pair<double, Index>> out(heap.size());
    for (std::size_t i = out.size(); i-- > 0;) {
      out[i] = heap.top();
      heap.pop();
    }
    return out;
  }

  /// Nearest neighbour (lowest index among exact ties) and its squared distance.
  std::pair<double, Index> nearest(const Point3& center) const {
    std::pair<double, Index> best{std::numeric_limits<double>::infinity(), 0};
    nearest_recurse(0, center, best);
    return best;
  }

 private:
  struct Node {
    std::uint32_t begin = 0, end = 0;  // range in order_
    std::int32_t left = -1, right = -1;
    Point3 lo, hi;  // bounds of the points under this node
  };

  std::int32_t build(std::size_t begin, std::size_t end) {
    auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();
    Point3 lo = points_[order_[begin]], hi = lo;
    for (std::size_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    nodes_[id].begin = static_cast<std::uint32_t>(begin);
    nodes_[id].end = static_cast<std::uint32_t>(end);
    nodes_[id].lo = lo;
    nodes_[id].hi = hi;
    if (end - begin <= kLeafSize) return id;

    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](Index a, Index b) { return points_[a][axis] < points_[b][axis]; });
    std::int32_t l = build(begin, mid);
    std::int32_t r = build(mid, end);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  static double box_distance2(const Node& n, const Point3& q) {
    double d2 = 0.0;
    for (int c = 0; c < 3; ++c) {
      double v = 0.0;
      if (q[c] < n.lo[c])
        v = n.lo[c] - q[c];
      else if (q[c] > n.hi[c])
        v = q[c] - n.hi[c];
      d2 += v * v;
    }
    return d2;
  }

  void radius_recurse(std::int32_t id, const Point3& q, double r2, std::vector<Index>& out) const {
    const Node& n = nodes_[id];
    if (box_distance2(n, q) > r2) return;
    if (n.left < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i)
        if (squared_distance(points_[order_[i]], q) <= r2) out.push_back(order_[i]);
      return;
    }
    radius_recurse(n.left, q, r2, out);
    radius_recurse(n.right, q, r2, out);
  }

  void knn_recurse(std::int32_t id, const Point3& q, std::size_t k,
                   std::priority_queue<std::pair<double, Index>>& heap) const {
    const Node& n = nodes_[id];
    if (heap.size() == k && box_distance2(n, q) > heap.top().first) return;
    if (n.left < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        std::pair<double, Index> cand{squared_distance(points_[order_[i]], q), order_[i]};
        if (heap.size() < k) {
          heap.push(cand);
        } else if (cand < heap.top()) {
          heap.pop();
          heap.push(cand);
        }
      }
      return;
    }
    double dl = box_distance2(nodes_[n.left], q);
    double dr = box_distance2(nodes_[n.right], q);
    if (dl <= dr) {
      knn_recurse(n.left, q, k, heap);
      knn_recurse(n.right, q, k, heap);
    } else {
      knn_recurse(n.right, q, k, heap);
      knn_recurse(n.left, q, k, heap);
    }
  }

  void nearest_recurse(std::int32_t id, const Point3& q, std::pair<double, Index>& best) const {
    const Node& n = nodes_[id];
    if (box_distance2(n, q) > best.first) return;
    if (n.left < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        std::pair<double, Index> cand{squared_distance(points_[order_[i]], q), order_[i]};
        if (cand < best) best = cand;
      }
      return;
    }
    double dl = box_distance2(nodes_[n.left], q);
    double dr = box_distance2(nodes_[n.right], q);
    if (dl <= dr) {
      nearest_recurse(n.left, q, best);
      nearest_recurse(n.right, q, best);
    } else {
      nearest_recurse(n.right, q, best);
      nearest_recurse(n.left, q, best);
    }
  }

  std::vector<Point3> points_;
  std::vector<Index> order_;
  std::vector<Node> nodes_;
};

/// Farthest point sampling.
///
/// The first pick is the point farthest from the centroid; `seed` only
/// decides between points at exactly the same distance. Every later pick
/// maximises the distance to the already selected set, ties going to the
/// lowest index.
inline std::vector<Index> farthest_point_sample(const std::vector<Point3>& points, std::size_t k,
                                                std::uint64_t seed = 0) {
  const std::size_t n = points.size();
  if (k < 1 || k > n)
    throw Error(ErrorKind::KOutOfRange, "FPS count " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");

  Point3 centroid = Point3::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(n);

  double far = -1.0;
  std::vector<Index> ties;
  for (Index i = 0; i < n; ++i) {
    double d2 = squared_distance(points[i], centroid);
    if (d2 > far) {
      far = d2;
      ties.assign(1, i);
    } else if (d2 == far) {
      ties.push_back(i);
    }
  }
  std::mt19937_64 rng(seed);
  Index first = ties.size() == 1 ? ties.front() : ties[std::uniform_int_distribution<std::size_t>(0, ties.size() - 1)(rng)];

  std::vector<Index> selected;
  selected.reserve(k);
  std::vector<double> mind2(n, std::numeric_limits<double>::infinity());
  std::vector<char> taken(n, 0);
  Index next = first;
  for (std::size_t s = 0; s < k; ++s) {
    selected.push_back(next);
    taken[next] = 1;
    const Point3 p = points[next];
    double best = -1.0;
    Index best_i = 0;
    for (Index i = 0; i < n; ++i) {
      double d2 = squared_distance(points[i], p);
      if (d2 < mind2[i]) mind2[i] = d2;
      if (!taken[i] && mind2[i] > best) {
        best = mind2[i];
        best_i = i;
      }
    }
    next = best_i;
  }
  return selected;
}

inline std::vector<Index> farthest_point_sample(const PointCloud& cloud, std::size_t k, std::uint64_t seed = 0) {
  return farthest_point_sample(cloud.points(), k, seed);
}

}  // namespace gpsimp
