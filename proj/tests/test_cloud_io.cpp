#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <random>

#include "gpsimp/cloud_io.hpp"
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

const char* kCanonicalAscii =
    "ply\n"
    "format ascii 1.0\n"
    "element vertex 3\n"
    "property double x\n"
    "property double y\n"
    "property double z\n"
    "end_header\n"
    "0 0 0\n"
    "1.5 -2 0.25\n"
    "0.1 0.2 0.3\n";

// little-endian float32 writer for hand-made binary fixtures
void put_f32(std::string& s, float v) {
  char b[4];
  std::memcpy(b, &v, 4);
  s.append(b, 4);
}

}  // namespace

TEST(ParseXyz, ThreeLines) {
  PointCloud c = parse_cloud("0 0 0\n1 0 0\n0 1 0\n");
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c[0], Point3(0, 0, 0));
  EXPECT_EQ(c[1], Point3(1, 0, 0));
  EXPECT_EQ(c[2], Point3(0, 1, 0));
}

TEST(ParseXyz, CommentsBlankLinesAndExtraColumns) {
  PointCloud c = parse_cloud("# header\n\n1 2 3 255 0 0\n  4 5 6\n");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0], Point3(1, 2, 3));
  EXPECT_EQ(c[1], Point3(4, 5, 6));
}

TEST(ParseXyz, Errors) {
  EXPECT_EQ(kind_of([] { parse_cloud("1 2\n"); }), ErrorKind::MalformedRecord);
  EXPECT_EQ(kind_of([] { parse_cloud("1 2 abc\n"); }), ErrorKind::MalformedRecord);
  EXPECT_EQ(kind_of([] { parse_cloud("1 nan 3\n"); }), ErrorKind::NonFiniteCoordinate);
  EXPECT_EQ(kind_of([] { parse_cloud("1 inf 3\n"); }), ErrorKind::NonFiniteCoordinate);
  EXPECT_EQ(kind_of([] { parse_cloud(""); }), ErrorKind::EmptyInput);
}

TEST(ParsePly, CanonicalAsciiRoundTripsByteExact) {
  PointCloud c = parse_cloud(kCanonicalAscii);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c[1], Point3(1.5, -2, 0.25));
  EXPECT_EQ(write_cloud(c, CloudFormat::PlyAscii), std::string(kCanonicalAscii));
}

TEST(ParsePly, VertexCountMismatch) {
  std::string bad = kCanonicalAscii;
  bad.replace(bad.find("vertex 3"), 8, "vertex 4");
  EXPECT_EQ(kind_of([&] { parse_cloud(bad); }), ErrorKind::MalformedHeader);
  std::string extra = std::string(kCanonicalAscii) + "9 9 9\n";
  EXPECT_EQ(kind_of([&] { parse_cloud(extra); }), ErrorKind::MalformedHeader);
}

TEST(ParsePly, TenDeclaredNinePresent) {
  std::string s = "ply\nformat ascii 1.0\nelement vertex 10\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  for (int i = 0; i < 9; ++i) s += std::to_string(i) + " 0 0\n";
  EXPECT_EQ(kind_of([&] { parse_cloud(s); }), ErrorKind::MalformedHeader);
}

TEST(ParsePly, HeaderErrors) {
  EXPECT_EQ(kind_of([] { parse_cloud("ply\nformat binary_big_endian 1.0\nelement vertex 0\nend_header\n"); }),
            ErrorKind::UnsupportedFormat);
  EXPECT_EQ(kind_of([] { parse_cloud("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\n"); }),
            ErrorKind::MalformedHeader);
  EXPECT_EQ(kind_of([] { parse_cloud("ply\nelement vertex 0\nend_header\n"); }), ErrorKind::MalformedHeader);
  EXPECT_EQ(kind_of([] {
              parse_cloud("ply\nformat ascii 1.0\nelement vertex 1\nproperty int x\nproperty int y\nproperty int z\n"
                          "end_header\n1 2 3\n");
            }),
            ErrorKind::UnsupportedFormat);
  EXPECT_EQ(kind_of([] {
              parse_cloud("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
                          "property float z\nend_header\n1 nan 3\n");
            }),
            ErrorKind::NonFiniteCoordinate);
}

TEST(ParsePly, SkipsFacesListsAndIntegerProperties) {
  std::string s =
      "ply\nformat ascii 1.0\ncomment made by hand\n"
      "element vertex 3\nproperty float x\nproperty float y\nproperty float z\n"
      "property uchar red\nproperty float confidence\n"
      "element face 1\nproperty list uchar int vertex_indices\nend_header\n"
      "0 0 0 255 0.5\n1 0 0 10 0.25\n0 1 0 3 1\n3 0 1 2\n";
  PointCloud c = parse_cloud(s);
  ASSERT_EQ(c.size(), 3u);
  ASSERT_EQ(c.attributes().size(), 1u);
  EXPECT_EQ(c.attributes()[0].name, "confidence");
  EXPECT_EQ(c.attributes()[0].values, (std::vector<double>{0.5, 0.25, 1.0}));
}

TEST(ParsePly, BinaryFloat32WithFaces) {
  std::string s =
      "ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
      "property float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n";
  put_f32(s, 1.f), put_f32(s, 2.f), put_f32(s, 3.f);
  put_f32(s, -1.f), put_f32(s, 0.5f), put_f32(s, 0.f);
  s.push_back(char(3));
  for (int i = 0; i < 3; ++i) {
    int v = i;
    s.append(reinterpret_cast<const char*>(&v), 4);
  }
  PointCloud c = parse_cloud(s);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0], Point3(1, 2, 3));
  EXPECT_EQ(c[1], Point3(-1, 0.5, 0));
}

TEST(ParsePly, BinaryTruncatedBody) {
  std::string s =
      "ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
      "property float z\nend_header\n";
  put_f32(s, 1.f), put_f32(s, 2.f), put_f32(s, 3.f);
  EXPECT_EQ(kind_of([&] { parse_cloud(s); }), ErrorKind::MalformedHeader);
}

TEST(WriteCloud, EmptyCloudIsValidPly) {
  std::string bytes = write_cloud(PointCloud{}, CloudFormat::PlyAscii);
  EXPECT_NE(bytes.find("element vertex 0\n"), std::string::npos);
  EXPECT_EQ(parse_cloud(bytes).size(), 0u);
}

TEST(WriteCloud, AttributeBecomesProperty) {
  PointCloud c({Point3(0, 0, 0), Point3(1, 1, 1)}, {{"sigma_n", {0.1, 0.2}}});
  std::string bytes = write_cloud(c, CloudFormat::PlyAscii);
  EXPECT_NE(bytes.find("property double sigma_n\n"), std::string::npos);
  PointCloud back = parse_cloud(bytes);
  ASSERT_NE(back.find_attribute("sigma_n"), nullptr);
  EXPECT_EQ(back.find_attribute("sigma_n")->values, (std::vector<double>{0.1, 0.2}));
  EXPECT_EQ(write_cloud(c, CloudFormat::PlyAscii, false).find("sigma_n"), std::string::npos);
}

TEST(WriteCloud, BinaryRoundTripBitExact) {
  auto pts = oracle::random_points(1000, 7, 1e3);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::vector<double> attr(1000);
  for (auto& a : attr) a = g(rng);
  PointCloud c(pts, {{"w", attr}});
  PointCloud back = parse_cloud(write_cloud(c, CloudFormat::PlyBinaryLE));
  ASSERT_EQ(back.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(std::memcmp(back[i].data(), c[i].data(), 24), 0);
  EXPECT_EQ(back.attributes()[0].values, attr);
}

TEST(WriteCloud, ParseWriteParseIsIdempotentForAllFormats) {
  PointCloud c(oracle::random_points(200, 11));
  for (auto f : {CloudFormat::PlyAscii, CloudFormat::PlyBinaryLE, CloudFormat::Xyz}) {
    PointCloud once = parse_cloud(write_cloud(c, f), f);
    PointCloud twice = parse_cloud(write_cloud(once, f), f);
    EXPECT_EQ(once.points(), c.points());
    EXPECT_EQ(twice.points(), once.points());
  }
}

TEST(Files, AtomicWriteAndFormatByExtension) {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "gpsimp_io_test";
  fs::create_directories(dir);
  PointCloud c(oracle::random_points(50, 5));
  for (const char* name : {"a.ply", "a.xyz"}) {
    write_cloud_file(dir / name, c);
    EXPECT_FALSE(fs::exists(dir / (std::string(name) + ".tmp")));
    EXPECT_EQ(read_cloud_file(dir / name).points(), c.points());
  }
  EXPECT_EQ(format_for_path("x.XYZ"), CloudFormat::Xyz);
  EXPECT_EQ(format_for_path("x.ply"), CloudFormat::PlyBinaryLE);
  EXPECT_EQ(format_for_path("x.ply", true), CloudFormat::PlyAscii);
  EXPECT_EQ(kind_of([&] { read_cloud_file(dir / "missing.ply"); }), ErrorKind::IoFailure);
  EXPECT_EQ(kind_of([&] { write_cloud_file(dir / "no_such_dir" / "x.ply", c); }), ErrorKind::IoFailure);
  fs::remove_all(dir);
}

TEST(PointCloudType, Invariants) {
  EXPECT_EQ(kind_of([] { PointCloud({Point3(0, NAN, 0)}); }), ErrorKind::NonFiniteCoordinate);
  EXPECT_EQ(kind_of([] { PointCloud({Point3(0, 0, 0)}, {{"a", {1.0, 2.0}}}); }), ErrorKind::LengthMismatch);
  PointCloud c({Point3(0, 0, 0), Point3(1, 0, 0), Point3(2, 0, 0)}, {{"a", {1, 2, 3}}});
  PointCloud s = c.select({2, 0});
  EXPECT_EQ(s[0], Point3(2, 0, 0));
  EXPECT_EQ(s.attributes()[0].values, (std::vector<double>{3, 1}));
}

TEST(BoundingBoxTest, Examples) {
  std::vector<Point3> corners;
  for (int i = 0; i < 8; ++i) corners.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
  BoundingBox b = bounding_box(corners);
  EXPECT_DOUBLE_EQ(b.volume(), 1.0);
  EXPECT_DOUBLE_EQ(b.diagonal(), std::sqrt(3.0));

  BoundingBox single = bounding_box(std::vector<Point3>{Point3(1, 2, 3)});
  EXPECT_EQ(single.volume(), 0.0);
  EXPECT_EQ(single.diagonal(), 0.0);

  EXPECT_EQ(kind_of([] { bounding_box(std::vector<Point3>{}); }), ErrorKind::EmptyCloud);

  auto pts = oracle::random_points(10000, 3);
  for (auto& p : pts) p = p + Point3(1, 1, 1);  // [0, 2]^3
  const double v = bounding_box(pts).volume();
  EXPECT_GE(v, 7.0);
  EXPECT_LE(v, 8.0);

  auto shuffled = pts;
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(1));
  EXPECT_EQ(bounding_box(shuffled).min_corner, bounding_box(pts).min_corner);
  EXPECT_EQ(bounding_box(shuffled).max_corner, bounding_box(pts).max_corner);
}
