#include "doctest.h"

#include "regkit/core/error.hpp"
#include "regkit/core/geometry.hpp"
#include "regkit/core/io.hpp"
#include "../support/oracles.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <tuple>

using namespace regkit;
using namespace regkit::testing;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("regkit_core_" + name);
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected regkit::Error");
  return ErrorCode::ConfigError;
}

}  // namespace

TEST_CASE("PLY and OBJ readers") {
  SUBCASE("three-vertex ASCII PLY") {
    const auto path = temp_file("tri.ply");
    write_text(path,
               "ply\nformat ascii 1.0\ncomment test\nelement vertex 3\nproperty float x\n"
               "property float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\n"
               "end_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n");
    const PointCloud c = load_point_cloud(path, CloudFormat::PlyAscii);
    CHECK(c.size() == 3);
    CHECK(c.points[1].isApprox(Vec3(1, 0, 0)));
    CHECK_FALSE(c.has_normals());
  }
  SUBCASE("OBJ cube keeps vertices, drops faces") {
    std::string obj = "# cube\n";
    for (int i = 0; i < 8; ++i) {
      obj += "v " + std::to_string(i & 1) + " " + std::to_string((i >> 1) & 1) + " " + std::to_string((i >> 2) & 1) + "\n";
    }
    obj += "vn 0 0 1\n";
    for (int f = 0; f < 12; ++f) {
      obj += "f 1 2 3\n";
    }
    const auto path = temp_file("cube.obj");
    write_text(path, obj);
    const PointCloud c = load_point_cloud(path, CloudFormat::Obj);
    CHECK(c.size() == 8);
    CHECK_FALSE(c.has_normals());
  }
  SUBCASE("binary PLY with float32 coordinates and normals") {
    const auto path = temp_file("bin.ply");
    {
      std::ofstream out(path, std::ios::binary);
      out << "ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
             "property float z\nproperty float nx\nproperty float ny\nproperty float nz\nend_header\n";
      const float rows[2][6] = {{1, 2, 3, 0, 0, 1}, {4, 5, 6, 0, 2, 0}};
      out.write(reinterpret_cast<const char*>(rows), sizeof(rows));
    }
    const PointCloud c = load_point_cloud(path, CloudFormat::PlyBinaryLE);
    REQUIRE(c.size() == 2);
    CHECK(c.points[1].isApprox(Vec3(4, 5, 6)));
    REQUIRE(c.has_normals());
    CHECK((*c.normals)[1].isApprox(Vec3(0, 1, 0)));
  }
  SUBCASE("truncated binary PLY is a parse error") {
    const auto path = temp_file("trunc.ply");
    {
      std::ofstream out(path, std::ios::binary);
      out << "ply\nformat binary_little_endian 1.0\nelement vertex 3\nproperty double x\nproperty double y\n"
             "property double z\nend_header\n";
      const double row[3] = {1, 2, 3};
      out.write(reinterpret_cast<const char*>(row), sizeof(row));
    }
    CHECK(code_of([&] { load_point_cloud(path, CloudFormat::PlyBinaryLE); }) == ErrorCode::ParseError);
  }
  SUBCASE("malformed and empty inputs") {
    const auto bad = temp_file("bad.ply");
    write_text(bad, "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
                    "property float z\nend_header\n1 2 3\n4 five 6\n");
    CHECK(code_of([&] { load_point_cloud(bad, CloudFormat::PlyAscii); }) == ErrorCode::ParseError);
    const auto empty = temp_file("empty.ply");
    write_text(empty, "ply\nformat ascii 1.0\nelement vertex 0\nproperty float x\nproperty float y\n"
                      "property float z\nend_header\n");
    CHECK(code_of([&] { load_point_cloud(empty, CloudFormat::PlyAscii); }) == ErrorCode::EmptyCloud);
    const auto empty_obj = temp_file("empty.obj");
    write_text(empty_obj, "# nothing\nf 1 2 3\n");
    CHECK(code_of([&] { load_point_cloud(empty_obj, CloudFormat::Obj); }) == ErrorCode::EmptyCloud);
    CHECK(code_of([&] { load_point_cloud(bad, CloudFormat::PlyBinaryLE); }) == ErrorCode::ParseError);
  }
  SUBCASE("writers round-trip attributes") {
    std::mt19937 rng(3);
    PointCloud c = make_cloud(random_points(rng, 50, 10.0), "rt");
    c = estimate_normals_and_curvature(c, 8);
    for (const bool binary : {false, true}) {
      const auto path = temp_file(binary ? "rt_bin.ply" : "rt_ascii.ply");
      binary ? write_ply_binary(path, c) : write_ply_ascii(path, c);
      const PointCloud back = load_point_cloud(path);
      REQUIRE(back.size() == c.size());
      REQUIRE(back.has_normals());
      CHECK(back.has_curvatures() == !binary);
      for (std::size_t i = 0; i < c.size(); ++i) {
        CHECK((back.points[i] - c.points[i]).norm() < 1e-12);
        if (c.has_normal(i)) {
          CHECK(((*back.normals)[i] - (*c.normals)[i]).norm() < 1e-12);
        }
      }
    }
  }
}

TEST_CASE("NeighborIndex matches brute force") {
  std::mt19937 rng(11);
  const auto pts = random_points(rng, 2000, 50.0);
  const NeighborIndex index(pts);
  for (int q = 0; q < 200; ++q) {
    const Vec3 query = random_points(rng, 1, 60.0).front();
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      all.emplace_back((pts[i] - query).squaredNorm(), i);
    }
    std::sort(all.begin(), all.end());
    const auto nn = index.nearest(query);
    CHECK(nn.index == all[0].second);
    const auto knn = index.knn(query, 17);
    REQUIRE(knn.size() == 17);
    for (std::size_t i = 0; i < knn.size(); ++i) {
      CHECK(knn[i].index == all[i].second);
    }
    const double r = 12.0;
    const auto within = index.radius(query, r);
    const auto expected = static_cast<std::size_t>(
        std::count_if(all.begin(), all.end(), [&](const auto& a) { return a.first <= r * r; }));
    CHECK(within.size() == expected);
  }
}

TEST_CASE("voxel_downsample") {
  SUBCASE("large surface sampling lands within 10% of target") {
    const PointCloud dense = make_cloud(sphere_points(100000, 80.0));
    const PointCloud out = voxel_downsample(dense, 5000);
    CHECK(out.size() >= 4500);
    CHECK(out.size() <= 5500);
  }
  SUBCASE("cloud under target is returned unchanged") {
    std::mt19937 rng(1);
    const PointCloud small = make_cloud(random_points(rng, 10, 5.0));
    const PointCloud out = voxel_downsample(small, 5000);
    REQUIRE(out.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(out.points[i] == small.points[i]);
    }
  }
  SUBCASE("grid output equals brute-force voxel bucketing") {
    const PointCloud grid = make_cloud(grid_plane(100, 100, 1.0));
    const double edge = voxel_downsample_edge(grid, 100);
    const PointCloud out = voxel_downsample(grid, 100);
    CHECK(out.size() >= 90);
    CHECK(out.size() <= 110);
    // Oracle: map-based bucketing, then per-voxel mean.
    std::map<std::tuple<long, long, long>, std::pair<Vec3, int>> buckets;
    const Vec3 origin = bounding_box(grid.points).min;
    for (const Vec3& p : grid.points) {
      const auto key = std::make_tuple(static_cast<long>(std::floor((p.x() - origin.x()) / edge)),
                                       static_cast<long>(std::floor((p.y() - origin.y()) / edge)),
                                       static_cast<long>(std::floor((p.z() - origin.z()) / edge)));
      auto it = buckets.try_emplace(key, Vec3::Zero(), 0).first;
      auto& b = it->second;
      b.first += p;
      b.second += 1;
    }
    REQUIRE(buckets.size() == out.size());
    for (const Vec3& o : out.points) {
      const bool found = std::any_of(buckets.begin(), buckets.end(), [&](const auto& kv) {
        return (kv.second.first / kv.second.second - o).norm() < 1e-9;
      });
      CHECK(found);
    }
  }
}

TEST_CASE("estimate_normals") {
  SUBCASE("planar grid") {
    const PointCloud grid = make_cloud(grid_plane(20, 20, 1.0));
    const PointCloud out = estimate_normals(grid, 8);
    for (std::size_t i = 0; i < out.size(); ++i) {
      REQUIRE(out.has_normal(i));
      const Vec3 n = (*out.normals)[i];
      CHECK(std::abs(std::abs(n.z()) - 1.0) < 1e-6);
      CHECK(std::abs(n.x()) < 1e-6);
      CHECK(std::abs(n.y()) < 1e-6);
    }
  }
  SUBCASE("viewpoint orientation") {
    const PointCloud grid = make_cloud(grid_plane(10, 10, 1.0, 0.0));
    const PointCloud up = estimate_normals(grid, 8, Vec3(0, 0, 100));
    const PointCloud down = estimate_normals(grid, 8, Vec3(0, 0, -100));
    CHECK((*up.normals)[5].z() > 0.99);
    CHECK((*down.normals)[5].z() < -0.99);
  }
  SUBCASE("sphere normals are radial") {
    PointCloud sphere = estimate_normals(make_cloud(sphere_points(3000, 50.0)), 10);
    orient_normals_away_from(sphere, Vec3::Zero());
    std::size_t good = 0;
    for (std::size_t i = 0; i < sphere.size(); ++i) {
      if ((*sphere.normals)[i].dot(sphere.points[i].normalized()) > 0.99) {
        ++good;
      }
    }
    CHECK(static_cast<double>(good) >= 0.99 * static_cast<double>(sphere.size()));
  }
  SUBCASE("collinear neighbourhoods give null normals") {
    const PointCloud line = make_cloud({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(3, 0, 0)});
    const PointCloud out = estimate_normals(line, 3);
    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK_FALSE(out.has_normal(i));
    }
    CHECK(out.is_consistent());
  }
  SUBCASE("precondition k < size") {
    const PointCloud tiny = make_cloud({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)});
    CHECK(code_of([&] { estimate_normals(tiny, 3); }) == ErrorCode::InvalidArgument);
  }
}

TEST_CASE("estimate_curvature") {
  SUBCASE("plane has zero curvature") {
    const PointCloud out = estimate_curvature(make_cloud(grid_plane(20, 20, 1.0)), 10);
    for (double c : *out.curvatures) {
      CHECK(std::abs(c) < 1e-9);
    }
  }
  SUBCASE("roof edge is sharper than faces") {
    // Two faces meeting at 90 degrees along the y axis: z = -|x|.
    std::vector<Vec3> pts;
    for (int i = -10; i <= 10; ++i) {
      for (int j = 0; j < 21; ++j) {
        pts.emplace_back(i, j, -std::abs(static_cast<double>(i)));
      }
    }
    const PointCloud roof = make_cloud(pts);
    const PointCloud out = estimate_curvature(roof, 10);
    const auto at = [&](int i, int j) { return (*out.curvatures)[static_cast<std::size_t>((i + 10) * 21 + j)]; };
    // Oracle: direct PCA on the same neighbourhood of an edge and a face point.
    const NeighborIndex index(roof);
    const auto oracle = [&](std::size_t idx) {
      Vec3 mean = Vec3::Zero();
      const auto nb = index.knn(roof.points[idx], 10);
      for (const auto& n : nb) mean += roof.points[n.index];
      mean /= 10.0;
      Mat3 cov = Mat3::Zero();
      for (const auto& n : nb) cov += (roof.points[n.index] - mean) * (roof.points[n.index] - mean).transpose();
      Eigen::SelfAdjointEigenSolver<Mat3> es(cov / 10.0);
      return std::max(0.0, es.eigenvalues()[0]) / es.eigenvalues().cwiseMax(0.0).sum();
    };
    CHECK(at(0, 10) == doctest::Approx(oracle(10 * 21 + 10)).epsilon(1e-9));
    CHECK(at(0, 10) > at(6, 10));
    CHECK(at(6, 10) < 1e-9);
  }
  SUBCASE("sphere curvature is nearly constant and bounded") {
    const PointCloud out = estimate_curvature(make_cloud(sphere_points(4000, 50.0)), 30);
    double sum = 0.0, sq = 0.0;
    for (double c : *out.curvatures) {
      CHECK(c >= 0.0);
      CHECK(c <= 1.0 / 3.0);
      sum += c;
      sq += c * c;
    }
    const double n = static_cast<double>(out.size());
    const double mean = sum / n;
    const double sd = std::sqrt(std::max(0.0, sq / n - mean * mean));
    CHECK(mean > 0.0);
    CHECK(sd / mean < 0.2);
  }
}

TEST_CASE("plane fitting and projection") {
  SUBCASE("exact plane z = 5") {
    const auto pts = grid_plane(5, 5, 2.0, 5.0);
    const Plane pl = fit_plane_least_squares(pts);
    const double sign = pl.normal.z() > 0 ? 1.0 : -1.0;
    CHECK((sign * pl.normal - Vec3(0, 0, 1)).norm() < 1e-12);
    CHECK(sign * pl.offset == doctest::Approx(-5.0).epsilon(1e-12));
  }
  SUBCASE("noisy plane z = 2x + 3") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> noise(-0.01, 0.01), u(-20, 20);
    std::vector<Vec3> pts;
    for (int i = 0; i < 400; ++i) {
      const double x = u(rng), y = u(rng);
      pts.emplace_back(x, y, 2 * x + 3 + noise(rng));
    }
    const Plane pl = fit_plane_least_squares(pts);
    // 2x - z + 3 = 0 normalised.
    Eigen::Vector4d truth(2, 0, -1, 3);
    truth /= std::sqrt(5.0);
    Eigen::Vector4d got(pl.normal.x(), pl.normal.y(), pl.normal.z(), pl.offset);
    if (got.dot(truth) < 0) got = -got;
    CHECK((got - truth).cwiseAbs().maxCoeff() < 1e-2);
  }
  SUBCASE("collinear input is degenerate") {
    const std::vector<Vec3> line{Vec3(0, 0, 0), Vec3(1, 1, 1), Vec3(2, 2, 2)};
    CHECK(code_of([&] { fit_plane_least_squares(line); }) == ErrorCode::DegenerateInput);
    const std::vector<Vec3> dup{Vec3(1, 1, 1), Vec3(1, 1, 1), Vec3(1, 1, 1), Vec3(1, 1, 1)};
    CHECK(code_of([&] { fit_plane_least_squares(dup); }) == ErrorCode::DegenerateInput);
  }
  SUBCASE("projection") {
    const Plane z0{Vec3(0, 0, 1), 0.0};
    CHECK(project_onto_plane(Vec3(0, 0, 7), z0).norm() < 1e-15);
    CHECK(project_onto_plane(Vec3(3, 4, 0), z0) == Vec3(3, 4, 0));
    std::mt19937 rng(8);
    const auto fit_pts = random_points(rng, 3, 10.0);
    const Plane pl = fit_plane_least_squares(fit_pts);
    for (const Vec3& p : random_points(rng, 200, 50.0)) {
      const Vec3 q = project_onto_plane(p, pl);
      CHECK(std::abs(pl.signed_distance(q)) < 1e-9);
      CHECK((project_onto_plane(q, pl) - q).norm() < 1e-9);
      // Residual is parallel to the normal.
      CHECK((p - q).cross(pl.normal).norm() < 1e-9);
    }
  }
}

TEST_CASE("kabsch_align") {
  std::mt19937 rng(21);
  const auto src = random_points(rng, 30, 40.0);
  SUBCASE("self alignment") {
    const RigidTransform t = kabsch_align(src, src);
    CHECK(rotation_angle(t.rotation) < 1e-12);
    CHECK(t.translation.norm() < 1e-12);
  }
  SUBCASE("pure translation") {
    std::vector<Vec3> dst;
    for (const Vec3& p : src) dst.push_back(p + Vec3(10, 0, 0));
    const RigidTransform t = kabsch_align(src, dst);
    CHECK((t.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((t.translation - Vec3(10, 0, 0)).norm() < 1e-9);
  }
  SUBCASE("random rigid motion agrees with Horn's quaternion solution") {
    for (int trial = 0; trial < 50; ++trial) {
      const Mat3 r0 = random_rotation(rng);
      const Vec3 t0 = random_points(rng, 1, 100.0).front();
      std::vector<Vec3> dst;
      for (const Vec3& p : src) dst.push_back(r0 * p + t0);
      const RigidTransform t = kabsch_align(src, dst);
      const RigidTransform h = horn_align(src, dst);
      CHECK(t.is_valid());
      CHECK(rotation_angle_between(t.rotation, r0) < 1e-7);
      CHECK((t.translation - t0).norm() < 1e-7);
      CHECK(rotation_angle_between(t.rotation, h.rotation) < 1e-7);
      CHECK((t.translation - h.translation).norm() < 1e-7);
      CHECK(alignment_rmse(make_cloud(src), make_cloud(dst), t, Pairing::IndexMatched) < 1e-6);
    }
  }
  SUBCASE("coplanar input still yields a proper rotation") {
    const auto plane = grid_plane(4, 4, 3.0);
    const Mat3 r0 = axis_angle(Vec3(1, 2, 3), 2.5);
    std::vector<Vec3> dst;
    for (const Vec3& p : plane) dst.push_back(r0 * p);
    const RigidTransform t = kabsch_align(plane, dst);
    CHECK(t.rotation.determinant() == doctest::Approx(1.0));
    CHECK(rotation_angle_between(t.rotation, r0) < 1e-9);
  }
  SUBCASE("degenerate input") {
    const std::vector<Vec3> line{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)};
    CHECK(code_of([&] { kabsch_align(line, line); }) == ErrorCode::DegenerateInput);
    CHECK(code_of([&] { kabsch_align(std::span(src).first(2), std::span(src).first(2)); }) ==
          ErrorCode::DegenerateInput);
  }
}

TEST_CASE("apply_transform and rmse") {
  std::mt19937 rng(4);
  PointCloud c = estimate_normals_and_curvature(make_cloud(random_points(rng, 40, 20.0)), 6);
  SUBCASE("identity") {
    const PointCloud out = apply_transform(c, RigidTransform::identity());
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(out.points[i] == c.points[i]);
  }
  SUBCASE("inverse composition and normal handling") {
    RigidTransform t{random_rotation(rng), Vec3(3, -2, 7), 1.0};
    const PointCloud moved = apply_transform(c, t);
    const PointCloud back = apply_transform(moved, t.inverse());
    for (std::size_t i = 0; i < c.size(); ++i) {
      CHECK((back.points[i] - c.points[i]).norm() < 1e-9);
      if (c.has_normal(i)) {
        CHECK(((*moved.normals)[i] - t.rotation * (*c.normals)[i]).norm() < 1e-12);
      }
      CHECK((*moved.curvatures)[i] == (*c.curvatures)[i]);
    }
    CHECK((t * t.inverse()).translation.norm() < 1e-12);
  }
  SUBCASE("scale doubles cube corners") {
    std::vector<Vec3> cube;
    for (int i = 0; i < 8; ++i) cube.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
    RigidTransform s;
    s.scale = 2.0;
    const PointCloud out = apply_transform(make_cloud(cube), s);
    for (std::size_t i = 0; i < 8; ++i) CHECK(out.points[i] == 2.0 * cube[i]);
  }
  SUBCASE("rmse values") {
    const PointCloud a = make_cloud({Vec3(0, 0, 0), Vec3(10, 0, 0), Vec3(0, 10, 0)});
    CHECK(alignment_rmse(a, a, RigidTransform::identity(), Pairing::IndexMatched) == 0.0);
    const RigidTransform shift = RigidTransform::from_translation(Vec3(0, 0, 2));
    CHECK(alignment_rmse(a, a, shift, Pairing::IndexMatched) == doctest::Approx(2.0));
    const PointCloud b = make_cloud({Vec3(1, 0, 0), Vec3(10, 2, 0), Vec3(0, 10, 2)});
    CHECK(alignment_rmse(a, b, RigidTransform::identity(), Pairing::IndexMatched) ==
          doctest::Approx(std::sqrt(3.0)).epsilon(1e-14));
    CHECK(alignment_rmse(a, a, RigidTransform::identity(), Pairing::NearestNeighbor) == 0.0);
    CHECK(code_of([&] { alignment_rmse(PointCloud{}, a, shift, Pairing::IndexMatched); }) == ErrorCode::EmptyCloud);
  }
}

TEST_CASE("rotation helpers") {
  std::mt19937 rng(2);
  for (int i = 0; i < 100; ++i) {
    const Mat3 r = random_rotation(rng);
    CHECK(rotation_angle_between(exp_so3(log_so3(r)), r) < 1e-9);
    const Mat3 noisy = r + 1e-3 * Mat3::Random();
    const Mat3 p = project_to_rotation(noisy);
    CHECK(RigidTransform::from_rotation(p).is_valid(1e-12));
  }
  CHECK(rotation_angle(axis_angle(Vec3(0, 0, 1), M_PI / 2)) == doctest::Approx(M_PI / 2));
}
