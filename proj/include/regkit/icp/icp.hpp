#pragma once

#include "regkit/core/point_cloud.hpp"
#include "regkit/core/rigid_transform.hpp"

#include "json.hpp"

#include <vector>

namespace regkit {

enum class IcpMode { RobustPointToPlane, FastPointToPoint };

struct IcpConfig {
  IcpMode mode = IcpMode::RobustPointToPlane;
  int max_iterations = 100;
  double translation_threshold = 1e-3;   // mm
  double rotation_threshold_deg = 1e-3;
  /// A stage also ends once an accepted step lowers the energy by no more
  /// than this fraction; <= 0 disables the test.
  double stage_energy_tolerance = 0.0;
  double noise_sigma = 0.33;             // mm; final kernel width and gating scale
  double max_correspondence_distance = 0.0;  // mm; <= 0 selects 10 sigma
  double initial_nu = 0.0;               // <= 0: median in-range residual at the initial pose
  double nu_anneal = 0.5;                // nu <- max(nu * anneal, sigma) between stages
  bool robust_kernel = true;             // false: unit weights, a single stage (classical ICP)
  int anderson_depth = 5;                // fast mode only
  double time_budget_ms = 0.0;           // <= 0: unlimited
  double inlier_threshold = 0.0;         // mm; <= 0 selects 10 sigma
  double success_inlier_fraction = 0.3;
  double success_rmse_sigmas = 3.0;
};

/// Defaults for frame-to-frame tracking: accelerated point-to-point with a
/// 250 ms budget.
IcpConfig fast_icp_config();

struct IcpTraceEntry {
  int stage = 0;
  double nu = 0.0;
  double energy = 0.0;
};

struct IcpResult {
  RigidTransform transform;
  int iterations = 0;
  double energy = 0.0;          // robust energy at the result, final stage
  double inlier_rmse = 0.0;     // mm, over inliers; point-to-plane or point-to-point residuals per mode
  double inlier_fraction = 0.0; // source points in range with |residual| <= inlier_threshold
  bool converged = false;
  bool budget_exceeded = false;
  bool success = false;         // converged, enough inliers, and inlier RMSE within bounds
  int anderson_accepted = 0;
  int anderson_rejected = 0;
  std::vector<IcpTraceEntry> trace;  // every accepted iterate, initial pose included
};

nlohmann::json icp_result_to_json(const IcpResult& result);

/// Scene points inside the closed axis-aligned box of pose(model) grown by
/// `margin` mm on every side. Normals and curvatures are kept. Throws
/// EmptyCrop, InvalidArgument (negative margin).
PointCloud crop_aabb(const PointCloud& scene, const PointCloud& model, const RigidTransform& pose, double margin);

/// Welsch-weighted point-to-plane ICP with annealed kernel width; each
/// accepted step never raises the energy of its stage. Throws
/// NoCorrespondencesInRange, NonFiniteEnergy, InvalidArgument.
IcpResult icp_refine(const PointCloud& source, const PointCloud& target, const RigidTransform& init,
                     const IcpConfig& config = {});

/// Welsch point-to-point ICP with safeguarded Anderson acceleration on
/// (log R, t). Stops at the time budget with budget_exceeded set.
IcpResult icp_fast(const PointCloud& source, const PointCloud& target, const RigidTransform& init,
                   const IcpConfig& config = fast_icp_config());

}  // namespace regkit
