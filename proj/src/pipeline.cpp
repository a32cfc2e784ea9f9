#include "regkit/pipeline.hpp"

#include "regkit/core/error.hpp"
#include "regkit/core/geometry.hpp"

namespace regkit {

PipelineResult register_pipeline(const PointCloud& source, const PointCloud& target, const CoarseConfig& coarse,
                                 const IcpConfig& refine) {
  PipelineResult out;
  out.coarse = coarse_register(source, target, coarse);

  PointCloud scene = target;
  if (!scene.has_normals()) {
    scene = estimate_normals(target, coarse.normal_k);
    orient_normals_consistent(scene, 10);
  }
  try {
    out.refine = icp_refine(source, scene, out.coarse.transform, refine);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidArgument) throw;
    throw Error(ErrorCode::RegistrationFailed, std::string("refinement: ") + e.what());
  }
  out.transform = out.refine.transform;
  out.nn_rmse = alignment_rmse(source, target, out.transform, Pairing::NearestNeighbor);
  return out;
}

nlohmann::json pipeline_result_to_json(const PipelineResult& result) {
  const RigidTransform& t = result.transform;
  nlohmann::json j;
  j["rotation_row_major_9"] = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) j["rotation_row_major_9"].push_back(t.rotation(r, c));
  }
  j["translation_mm_3"] = {t.translation.x(), t.translation.y(), t.translation.z()};
  j["nn_rmse_mm"] = result.nn_rmse;
  j["coarse"] = {{"diagnostics", diagnostics_to_json(result.coarse)}, {"metadata", result.coarse.metadata}};
  j["refine"] = icp_result_to_json(result.refine);
  return j;
}

}  // namespace regkit
