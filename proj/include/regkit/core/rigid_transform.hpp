#pragma once

#include "regkit/core/point_cloud.hpp"

#include <Eigen/Geometry>

namespace regkit {

/// Similarity p -> scale * R * p + t. Rigid when scale == 1.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;

  static RigidTransform identity() { return {}; }
  static RigidTransform from_rotation(const Mat3& r) { return {r, Vec3::Zero(), 1.0}; }
  static RigidTransform from_translation(const Vec3& t) { return {Mat3::Identity(), t, 1.0}; }

  Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
  Vec3 rotate(const Vec3& n) const { return rotation * n; }

  RigidTransform inverse() const;
  /// (*this) o other: applies `other` first.
  RigidTransform compose(const RigidTransform& other) const;

  Eigen::Matrix4d matrix() const;

  /// Orthonormality and det = +1 within tol, scale > 0, all entries finite.
  bool is_valid(double tol = 1e-9) const;
};

inline RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
  return a.compose(b);
}

/// Geodesic angle between two rotations (radians).
double rotation_angle_between(const Mat3& a, const Mat3& b);
/// Rotation angle of a single rotation matrix (radians).
double rotation_angle(const Mat3& r);

/// Nearest rotation in the Frobenius sense, det forced to +1.
Mat3 project_to_rotation(const Mat3& m);

Mat3 axis_angle(const Vec3& axis, double angle_rad);

/// so(3) exponential / logarithm on rotation vectors.
Mat3 exp_so3(const Vec3& omega);
Vec3 log_so3(const Mat3& r);

}  // namespace regkit
