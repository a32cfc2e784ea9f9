#pragma once

#include "regkit/core/geometry.hpp"
#include "regkit/core/point_cloud.hpp"
#include "regkit/core/rigid_transform.hpp"

#include "json.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace regkit {

/// Closed ball |p - center| <= radius.
struct RegionSpec {
  Vec3 center = Vec3::Zero();
  double radius = 70.0;  // mm

  bool contains(const Vec3& p) const { return (p - center).norm() <= radius; }
};

struct DepthErrorProfile {
  std::vector<double> errors;               // delta_k, mm
  std::vector<std::size_t> scene_indices;   // ascending; aligned with errors
  double median = 0.0;
  double iqr = 0.0;                         // Q3 - Q1, linear interpolation between order statistics
  double max = 0.0;
  Plane plane;
  double neighborhood_radius = 20.0;
};

/// Fits a plane to the reference points and measures, for every scene point
/// within `neighborhood_radius` of some reference, its distance to that
/// plane. Throws DegenerateInput (plane fit), EmptyNeighborhood,
/// InvalidArgument (radius <= 0).
DepthErrorProfile profile_depth_error(const PointCloud& scene, std::span<const Vec3> reference_points,
                                      double neighborhood_radius = 20.0);

struct GroundTruthPair {
  Vec3 truth;               // L_i
  Vec3 measured;            // P_i
  std::size_t scene_index;
};

/// P_i = nearest scene point inside the region to L_i; pairs farther apart
/// than the region radius are dropped. Throws TooFewPairs below 3.
std::vector<GroundTruthPair> pair_ground_truth(std::span<const Vec3> ground_truth, const PointCloud& scene,
                                               const RegionSpec& region);

struct CorrectionModel {
  RegionSpec region;
  RigidTransform transform;   // measured -> true
  double residual_rms = 0.0;  // mm, after the fit
  std::size_t pair_count = 0;
};

/// Least-squares rigid fit of the measured points onto the truth. Throws
/// DegenerateInput (fewer than 3 pairs, collinear or coincident points).
CorrectionModel fit_region_correction(std::span<const GroundTruthPair> pairs, const RegionSpec& region);

/// Applies the fit to the scene points inside the closed region ball
/// (normals rotated), leaving the rest untouched, and marks the cloud as
/// corrected. Throws AlreadyCorrected on a marked cloud, InvalidArgument on
/// an invalid model.
PointCloud apply_region_correction(const PointCloud& scene, const CorrectionModel& model);

nlohmann::json correction_model_to_json(const CorrectionModel& model);
/// Throws ParseError on missing or malformed fields.
CorrectionModel correction_model_from_json(const nlohmann::json& j);
void write_correction_model(const std::filesystem::path& path, const CorrectionModel& model);
CorrectionModel read_correction_model(const std::filesystem::path& path);

}  // namespace regkit
