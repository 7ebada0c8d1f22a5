#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "gpsimp/spatial.hpp"
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

// max over the cloud of the distance to the nearest selected point
double covering_radius(const std::vector<Point3>& pts, const std::vector<Index>& sel, std::size_t k) {
  std::vector<Point3> s;
  for (std::size_t i = 0; i < k; ++i) s.push_back(pts[sel[i]]);
  double r = 0.0;
  for (const auto& p : pts) r = std::max(r, oracle::nearest_brute(s, p));
  return r;
}

}  // namespace

TEST(SpatialIndexTest, MatchesBruteForceOnRandomClouds) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const std::size_t n = 50 + seed * 350;  // up to 1800
    auto pts = oracle::random_points(n, seed);
    // duplicate a few points so that distance ties occur
    for (std::size_t i = 0; i < n / 20; ++i) pts[n - 1 - i] = pts[i];
    SpatialIndex index(pts);
    auto queries = oracle::random_points(30, seed + 100);
    queries.push_back(pts[0]);
    for (const auto& q : queries) {
      for (double r : {0.05, 0.3, 1.0}) {
        std::vector<Index> got = index.radius_query(q, r);
        auto want = oracle::radius_brute(pts, q, r);
        std::sort(got.begin(), got.end());
        std::sort(want.begin(), want.end());
        EXPECT_EQ(got, want);
      }
      for (std::size_t k : {std::size_t{1}, std::size_t{7}, n / 3, n}) {
        EXPECT_EQ(index.knn_query(q, k), oracle::knn_brute(pts, q, k));
      }
      EXPECT_DOUBLE_EQ(std::sqrt(index.nearest(q).first), oracle::nearest_brute(pts, q));
    }
  }
}

TEST(SpatialIndexTest, SinglePoint) {
  SpatialIndex index(std::vector<Point3>{Point3(1, 1, 1)});
  EXPECT_EQ(index.radius_query(Point3(1, 1, 1.5), 0.5), (std::vector<Index>{0}));
  EXPECT_TRUE(index.radius_query(Point3(1, 1, 1.6), 0.5).empty());
}

TEST(SpatialIndexTest, TrivialQueries) {
  std::vector<Point3> pts{Point3(0, 0, 0), Point3(1, 0, 0), Point3(0, 2, 0), Point3(0, 0, 4)};
  SpatialIndex index(pts);
  EXPECT_EQ(index.radius_query(pts[1], 0.5), (std::vector<Index>{1}));
  EXPECT_EQ(index.radius_query(pts[0], 10.0).size(), 4u);
  EXPECT_EQ(index.knn_query(pts[2], 1), (std::vector<Index>{2}));
  EXPECT_EQ(index.knn_query(pts[0], 4), (std::vector<Index>{0, 1, 2, 3}));
}

TEST(SpatialIndexTest, KnnTiesGoToLowerIndex) {
  std::vector<Point3> pts{Point3(1, 0, 0), Point3(-1, 0, 0), Point3(0, 1, 0), Point3(0, 0, 0)};
  SpatialIndex index(pts);
  EXPECT_EQ(index.knn_query(Point3(0, 0, 0), 4), (std::vector<Index>{3, 0, 1, 2}));
}

TEST(SpatialIndexTest, Errors) {
  EXPECT_EQ(kind_of([] { SpatialIndex(std::vector<Point3>{}); }), ErrorKind::EmptyCloud);
  SpatialIndex index(oracle::random_points(10, 1));
  EXPECT_EQ(kind_of([&] { index.radius_query(Point3::Zero(), 0.0); }), ErrorKind::NonPositiveRadius);
  EXPECT_EQ(kind_of([&] { index.knn_query(Point3::Zero(), 0); }), ErrorKind::KOutOfRange);
  EXPECT_EQ(kind_of([&] { index.knn_query(Point3::Zero(), 11); }), ErrorKind::KOutOfRange);
}

TEST(FarthestPointSample, SquareCornersGiveDiagonal) {
  std::vector<Point3> sq{Point3(0, 0, 0), Point3(1, 0, 0), Point3(0, 1, 0), Point3(1, 1, 0)};
  auto sel = farthest_point_sample(sq, 2, 0);
  ASSERT_EQ(sel.size(), 2u);
  EXPECT_DOUBLE_EQ((sq[sel[0]] - sq[sel[1]]).norm(), std::sqrt(2.0));
}

TEST(FarthestPointSample, FirstPointIsFarthestFromCentroid) {
  auto pts = oracle::random_points(500, 9);
  Point3 c = Point3::Zero();
  for (const auto& p : pts) c += p;
  c /= 500.0;
  std::size_t far = 0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if ((pts[i] - c).squaredNorm() > (pts[far] - c).squaredNorm()) far = i;
  EXPECT_EQ(farthest_point_sample(pts, 5, 123)[0], far);
}

TEST(FarthestPointSample, GreedyMaxMinAgainstBruteForce) {
  auto pts = oracle::random_points(300, 4);
  auto sel = farthest_point_sample(pts, 40, 0);
  for (std::size_t s = 1; s < sel.size(); ++s) {
    std::vector<Point3> chosen;
    for (std::size_t t = 0; t < s; ++t) chosen.push_back(pts[sel[t]]);
    double best = -1.0;
    for (const auto& p : pts) best = std::max(best, oracle::nearest_brute(chosen, p));
    EXPECT_DOUBLE_EQ(oracle::nearest_brute(chosen, pts[sel[s]]), best);
  }
}

TEST(FarthestPointSample, PermutationAtKEqualsN) {
  auto pts = oracle::random_points(64, 2);
  pts[10] = pts[20];  // duplicates must still yield distinct indices
  auto sel = farthest_point_sample(pts, 64, 0);
  std::set<Index> uniq(sel.begin(), sel.end());
  EXPECT_EQ(uniq.size(), 64u);
}

TEST(FarthestPointSample, CoveringRadiusNonIncreasingAndDeterministic) {
  auto pts = oracle::random_points(400, 8);
  auto sel = farthest_point_sample(pts, 30, 5);
  double prev = INFINITY;
  for (std::size_t k = 1; k <= 30; ++k) {
    const double r = covering_radius(pts, sel, k);
    EXPECT_LE(r, prev);
    prev = r;
  }
  EXPECT_EQ(sel, farthest_point_sample(pts, 30, 5));
  EXPECT_EQ(kind_of([&] { farthest_point_sample(pts, 0, 0); }), ErrorKind::KOutOfRange);
  EXPECT_EQ(kind_of([&] { farthest_point_sample(pts, 401, 0); }), ErrorKind::KOutOfRange);
}
