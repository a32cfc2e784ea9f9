#pragma once

#include "regkit/coarse/coarse.hpp"
#include "regkit/icp/icp.hpp"

#include "json.hpp"

namespace regkit {

struct PipelineResult {
  RigidTransform transform;  // refined; maps source onto target
  CoarseResult coarse;
  IcpResult refine;
  double nn_rmse = 0.0;      // mm, every source point against its nearest target point
};

/// Coarse alignment followed by robust point-to-plane refinement. Target
/// normals are estimated (and made consistent) when absent. Throws
/// RegistrationFailed when either stage cannot produce a pose.
PipelineResult register_pipeline(const PointCloud& source, const PointCloud& target,
                                 const CoarseConfig& coarse = {}, const IcpConfig& refine = {});

nlohmann::json pipeline_result_to_json(const PipelineResult& result);

}  // namespace regkit
