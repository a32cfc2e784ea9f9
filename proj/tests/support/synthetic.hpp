#pragma once

// Synthetic inputs shared by unit and acceptance tests.

#include "regkit/correction/correction.hpp"
#include "regkit/features/features.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>

namespace regkit::testing {

struct CorrespondenceScene {
  PointCloud source;
  PointCloud target;
  CorrespondenceSet corr;
  RigidTransform truth;  // maps source onto target
  std::vector<bool> outlier;
};

/// n correspondences between random points in a cube of half-extent
/// `extent` mm; inliers map through `truth` plus isotropic Gaussian noise,
/// outliers point at unrelated random target positions. Unit weights.
template <typename Rng>
CorrespondenceScene correspondence_scene(Rng& rng, std::size_t n, double outlier_ratio, const RigidTransform& truth,
                                         double noise_sigma, double extent = 100.0) {
  CorrespondenceScene s;
  s.truth = truth;
  s.source.points = random_points(rng, n, extent);
  std::normal_distribution<double> g(0.0, noise_sigma);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  const auto outliers = static_cast<std::size_t>(std::llround(outlier_ratio * static_cast<double>(n)));
  s.outlier.assign(n, false);
  for (std::size_t k = 0; k < outliers; ++k) s.outlier[order[k]] = true;
  std::uniform_real_distribution<double> u(-extent, extent);
  for (std::size_t i = 0; i < n; ++i) {
    if (s.outlier[i]) {
      s.target.points.push_back(truth.translation + Vec3(u(rng), u(rng), u(rng)) * 1.5);
    } else {
      s.target.points.push_back(truth.apply(s.source.points[i]) + Vec3(g(rng), g(rng), g(rng)));
    }
    s.corr.pairs.push_back({i, i});
    s.corr.weights.push_back(1.0);
    s.corr.descriptor_distances.push_back(0.0);
  }
  return s;
}

/// Height of the synthetic skin patch: flat within 30 mm of the origin,
/// curving away gently beyond.
inline double skin_height(double x, double y) {
  const double r = std::hypot(x, y);
  return r <= 30.0 ? 0.0 : (r - 30.0) * (r - 30.0) / 600.0;
}

struct BiasedRegionScene {
  PointCloud truth;                // noise-free surface
  PointCloud scene;                // sensor view: region biased rigidly, plus noise everywhere
  std::vector<Vec3> ground_truth;  // traced points L_i inside the region
  std::vector<Vec3> tape;          // reference plane points at the centre
  RegionSpec region;
  RigidTransform bias;             // applied to true points inside the region
};

/// Surface sampled at `pitch` mm over [-100, 100]^2. Points within the 70 mm
/// region are moved by a rigid bias: a rotation of at most max_rotation_deg
/// about the region centre and a translation of [min_shift, max_shift] mm
/// within 30 degrees of the surface normal (depth errors act mostly along
/// the viewing ray).
template <typename Rng>
BiasedRegionScene biased_region_scene(Rng& rng, double min_shift, double max_shift, double max_rotation_deg,
                                      double noise_sigma, double pitch = 1.5) {
  BiasedRegionScene s;
  s.region = RegionSpec{Vec3::Zero(), 70.0};
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double angle = max_rotation_deg * u01(rng) * M_PI / 180.0;
  const double shift = min_shift + (max_shift - min_shift) * u01(rng);
  const double tilt = std::acos(1.0 - u01(rng) * (1.0 - std::cos(M_PI / 6.0)));
  const double azimuth = 2.0 * M_PI * u01(rng);
  const Vec3 dir(std::sin(tilt) * std::cos(azimuth), std::sin(tilt) * std::sin(azimuth), std::cos(tilt));
  const Vec3 normal_sign = u01(rng) < 0.5 ? Vec3(1, 1, 1) : Vec3(1, 1, -1);
  s.bias.rotation = axis_angle(random_unit(rng), angle);
  s.bias.translation = shift * dir.cwiseProduct(normal_sign);

  std::normal_distribution<double> g(0.0, noise_sigma);
  const int half = static_cast<int>(std::floor(100.0 / pitch));
  for (int i = -half; i <= half; ++i) {
    for (int j = -half; j <= half; ++j) {
      const double x = i * pitch, y = j * pitch;
      const Vec3 p(x, y, skin_height(x, y));
      s.truth.points.push_back(p);
      const Vec3 measured = s.region.contains(p) ? s.bias.apply(p) : p;
      s.scene.points.push_back(measured + Vec3(g(rng), g(rng), g(rng)));
    }
  }
  // Traced ground truth: a contour ring plus scattered interior points.
  for (int k = 0; k < 120; ++k) {
    const double a = 2.0 * M_PI * k / 120.0;
    const double x = 60.0 * std::cos(a), y = 60.0 * std::sin(a);
    s.ground_truth.emplace_back(x, y, skin_height(x, y));
  }
  std::uniform_real_distribution<double> disc(-65.0, 65.0);
  while (s.ground_truth.size() < 300) {
    const double x = disc(rng), y = disc(rng);
    if (std::hypot(x, y) <= 65.0) s.ground_truth.emplace_back(x, y, skin_height(x, y));
  }
  for (int i = -2; i <= 2; ++i) {
    for (int j = -2; j <= 2; ++j) s.tape.emplace_back(2.5 * i, 2.5 * j, 0.0);
  }
  return s;
}

}  // namespace regkit::testing
