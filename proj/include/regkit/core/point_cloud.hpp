#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace regkit {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Point set in millimetres with optional per-point attributes.
///
/// A normal that could not be estimated (degenerate neighbourhood) is stored
/// as a NaN vector; use has_normal(i) rather than testing the optional alone.
struct PointCloud {
  std::vector<Vec3> points;
  std::optional<std::vector<Vec3>> normals;
  std::optional<std::vector<double>> curvatures;
  std::string id;
  // Set once a region correction has been applied; a second application is rejected.
  bool region_corrected = false;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }

  bool has_normals() const noexcept { return normals.has_value(); }
  bool has_curvatures() const noexcept { return curvatures.has_value(); }
  bool has_normal(std::size_t i) const;

  /// Checks the attribute invariants (lengths, unit normals, non-negative curvature).
  bool is_consistent(double normal_tol = 1e-6) const;

  Vec3 centroid() const;
  /// Copies the listed points (and their attributes) into a new cloud.
  PointCloud select(const std::vector<std::size_t>& indices) const;
};

PointCloud make_cloud(std::vector<Vec3> points, std::string id = {});

struct Aabb {
  Vec3 min;
  Vec3 max;

  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  Vec3 extent() const { return max - min; }
};

/// Bounding box of a non-empty point list.
Aabb bounding_box(const std::vector<Vec3>& points);

}  // namespace regkit
