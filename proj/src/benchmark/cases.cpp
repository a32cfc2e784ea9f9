#include "regkit/benchmark/benchmark.hpp"
#include "regkit/core/error.hpp"
#include "regkit/core/geometry.hpp"
#include "regkit/core/neighbor_index.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

namespace regkit {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::size_t kTargetPoints = 8000;
constexpr double kOverlapTolerance = 0.02;

// Gaussian bump on the unit sphere centred at direction c.
double bump(const Vec3& u, const Vec3& c, double width) {
  return std::exp(-(u - c).squaredNorm() / (width * width));
}

template <typename Rng>
Vec3 random_axis(Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(g(rng), g(rng), g(rng));
  } while (v.norm() < 1e-12);
  return v.normalized();
}

}  // namespace

PointCloud normalize_diagonal(const PointCloud& cloud, double diagonal) {
  if (cloud.empty()) {
    throw Error(ErrorCode::EmptyCloud, "normalize_diagonal: empty cloud");
  }
  const Aabb box = bounding_box(cloud.points);
  const double d = box.extent().norm();
  if (!(d > 0.0)) {
    throw Error(ErrorCode::DegenerateInput, "normalize_diagonal: zero extent");
  }
  const Vec3 center = 0.5 * (box.min + box.max);
  PointCloud out = cloud;
  for (Vec3& p : out.points) p = (p - center) * (diagonal / d);
  out.normals.reset();
  out.curvatures.reset();
  return out;
}

PointCloud make_ridged_ellipsoid(std::size_t samples) {
  // Ellipsoid with latitudinal ridges and a few asymmetric lobes so that no
  // non-trivial symmetry survives.
  const Vec3 lobes[] = {Vec3(0.9, 0.2, 0.35).normalized(), Vec3(-0.3, 0.8, 0.5).normalized(),
                        Vec3(0.1, -0.6, -0.8).normalized()};
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  PointCloud c;
  c.points.reserve(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(samples);
    const double r = std::sqrt(1.0 - z * z);
    const double th = golden * static_cast<double>(i);
    const Vec3 u(r * std::cos(th), r * std::sin(th), z);
    const double azimuth = std::atan2(u.y(), u.x());
    double rho = 1.0 + 0.05 * std::sin(7.0 * azimuth) * r * r + 0.04 * std::sin(9.0 * z);
    rho += 0.18 * bump(u, lobes[0], 0.35) + 0.12 * bump(u, lobes[1], 0.45) + 0.1 * bump(u, lobes[2], 0.3);
    c.points.emplace_back(1.0 * rho * u.x(), 0.75 * rho * u.y(), 0.55 * rho * u.z());
  }
  c.id = "ridged_ellipsoid";
  c = normalize_diagonal(c);
  c.id = "ridged_ellipsoid";
  return c;
}

PointCloud make_helical_tube(std::size_t samples) {
  const double radius = 1.0, pitch = 0.35, tube = 0.28, turns = 1.6;
  const double t_max = 2.0 * kPi * turns;
  const auto n_psi = static_cast<std::size_t>(std::max(8.0, std::sqrt(static_cast<double>(samples) / 6.0)));
  const std::size_t n_t = std::max<std::size_t>(8, samples / n_psi);
  PointCloud c;
  for (std::size_t i = 0; i < n_t; ++i) {
    const double t = t_max * (static_cast<double>(i) + 0.5) / static_cast<double>(n_t);
    const Vec3 center(radius * std::cos(t), radius * std::sin(t), pitch * t);
    const Vec3 tangent = Vec3(-radius * std::sin(t), radius * std::cos(t), pitch).normalized();
    const Vec3 normal(-std::cos(t), -std::sin(t), 0.0);
    const Vec3 binormal = tangent.cross(normal);
    // Tube radius swells along the helix so the two ends differ.
    const double rt = tube * (0.8 + 0.4 * t / t_max) * (1.0 + 0.08 * std::sin(5.0 * t));
    for (std::size_t j = 0; j < n_psi; ++j) {
      const double psi = 2.0 * kPi * (static_cast<double>(j) + 0.5 * static_cast<double>(i % 2)) /
                         static_cast<double>(n_psi);
      c.points.push_back(center + rt * (std::cos(psi) * normal + std::sin(psi) * binormal));
    }
  }
  c = normalize_diagonal(c);
  c.id = "helical_tube";
  return c;
}

PointCloud make_bumpy_torus(std::size_t samples) {
  const double major = 1.0, minor = 0.38;
  const auto n_v = static_cast<std::size_t>(std::max(8.0, std::sqrt(static_cast<double>(samples) / 3.0)));
  const std::size_t n_u = std::max<std::size_t>(8, samples / n_v);
  PointCloud c;
  for (std::size_t i = 0; i < n_u; ++i) {
    const double u = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n_u);
    for (std::size_t j = 0; j < n_v; ++j) {
      const double v = 2.0 * kPi * (static_cast<double>(j) + 0.5 * static_cast<double>(i % 2)) /
                       static_cast<double>(n_v);
      const double r = minor * (1.0 + 0.15 * std::sin(5.0 * u) * std::sin(3.0 * v) + 0.1 * std::cos(2.0 * u + 0.7));
      c.points.emplace_back((major + r * std::cos(v)) * std::cos(u), (major + r * std::cos(v)) * std::sin(u),
                            r * std::sin(v));
    }
  }
  c = normalize_diagonal(c);
  c.id = "bumpy_torus";
  return c;
}

PointCloud make_surrogate(const std::string& name) {
  if (name == "ridged_ellipsoid") return make_ridged_ellipsoid();
  if (name == "helical_tube") return make_helical_tube();
  if (name == "bumpy_torus") return make_bumpy_torus();
  throw Error(ErrorCode::InvalidArgument, "unknown surrogate '" + name + "'");
}

double shared_support_fraction(const PointCloud& target, const std::vector<Vec3>& support, double radius) {
  if (target.empty() || support.empty()) return 0.0;
  const NeighborIndex index{std::span<const Vec3>(support)};
  const double r2 = radius * radius;
  std::size_t hit = 0;
  for (const Vec3& p : target.points) {
    hit += index.nearest(p).sq_distance <= r2 ? 1 : 0;
  }
  return static_cast<double>(hit) / static_cast<double>(target.size());
}

TestCase generate_test_case(const PointCloud& mesh, double overlap, double rotation_deg, double noise_sigma,
                            double partial_fraction, std::uint64_t seed, const std::string& mesh_id) {
  if (!(overlap > 0.0 && overlap <= 1.0) || !(rotation_deg >= 0.0) || !(noise_sigma >= 0.0) ||
      !(partial_fraction > 0.0 && partial_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "generate_test_case: parameter out of range");
  }
  if (mesh.size() < 1000) {
    throw Error(ErrorCode::InvalidArgument, "generate_test_case: mesh needs at least 1000 points");
  }
  TestCase tc;
  tc.params = {overlap, rotation_deg, noise_sigma, partial_fraction, seed, mesh_id};
  PointCloud base;
  base.points = mesh.points;
  tc.target = voxel_downsample(base, kTargetPoints);
  tc.target.normals.reset();
  tc.target.curvatures.reset();
  tc.target.id = mesh_id;

  std::mt19937_64 rng(seed);
  const double radius = std::max(3.0 * noise_sigma, 1e-9);
  std::vector<Vec3> crop;
  bool found = false;
  for (int attempt = 0; attempt < 10 && !found; ++attempt) {
    const Vec3 dir = random_axis(rng);
    const auto cut = [&](double s) {
      std::vector<Vec3> out;
      for (const Vec3& p : tc.target.points) {
        if (dir.dot(p) >= s) out.push_back(p);
      }
      return out;
    };
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const Vec3& p : tc.target.points) {
      lo = std::min(lo, dir.dot(p));
      hi = std::max(hi, dir.dot(p));
    }
    if (overlap >= 1.0) {
      crop = tc.target.points;
      tc.measured_overlap = 1.0;
      found = true;
      break;
    }
    // Overlap falls as the offset s rises.
    for (int it = 0; it < 60; ++it) {
      const double s = 0.5 * (lo + hi);
      auto candidate = cut(s);
      const double f = shared_support_fraction(tc.target, candidate, radius);
      if (std::fabs(f - overlap) <= kOverlapTolerance && !candidate.empty()) {
        crop = std::move(candidate);
        tc.measured_overlap = f;
        found = true;
        break;
      }
      (f > overlap ? lo : hi) = s;
    }
  }
  if (!found) {
    throw Error(ErrorCode::OverlapUnachievable, "generate_test_case: no crop reaches the requested overlap");
  }

  std::vector<std::size_t> order(crop.size());
  std::iota(order.begin(), order.end(), 0);
  const auto keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(partial_fraction * static_cast<double>(crop.size()))));
  if (keep < crop.size()) {
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(keep);
    std::sort(order.begin(), order.end());
  }
  tc.clean_support.reserve(order.size());
  for (std::size_t i : order) tc.clean_support.push_back(crop[i]);

  std::normal_distribution<double> noise(0.0, noise_sigma > 0.0 ? noise_sigma : 1.0);
  std::vector<Vec3> noisy = tc.clean_support;
  if (noise_sigma > 0.0) {
    for (Vec3& p : noisy) p += Vec3(noise(rng), noise(rng), noise(rng));
  }

  const Vec3 axis = random_axis(rng);
  std::uniform_real_distribution<double> shift(-50.0, 50.0);
  RigidTransform motion = RigidTransform::from_rotation(axis_angle(axis, rotation_deg * kPi / 180.0));
  motion.translation = Vec3(shift(rng), shift(rng), shift(rng));
  tc.source.points.reserve(noisy.size());
  for (const Vec3& p : noisy) tc.source.points.push_back(motion.apply(p));
  tc.source.id = mesh_id + "_source";
  tc.ground_truth = motion.inverse();
  return tc;
}

}  // namespace regkit
