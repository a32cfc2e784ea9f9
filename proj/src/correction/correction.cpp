#include "regkit/correction/correction.hpp"

#include "regkit/core/error.hpp"
#include "regkit/core/neighbor_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace regkit {

namespace {

// Quantile of sorted data by linear interpolation between order statistics.
double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

DepthErrorProfile profile_depth_error(const PointCloud& scene, std::span<const Vec3> reference_points,
                                      double neighborhood_radius) {
  if (!(neighborhood_radius > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "profile_depth_error: neighbourhood radius must be positive");
  }
  DepthErrorProfile out;
  out.plane = fit_plane_least_squares(reference_points);
  out.neighborhood_radius = neighborhood_radius;

  std::vector<char> near(scene.size(), 0);
  if (!scene.empty()) {
    const NeighborIndex index(scene);
    for (const Vec3& r : reference_points) {
      for (const Neighbor& nb : index.radius(r, neighborhood_radius)) near[nb.index] = 1;
    }
  }
  for (std::size_t i = 0; i < scene.size(); ++i) {
    if (!near[i]) continue;
    const Vec3& p = scene.points[i];
    out.scene_indices.push_back(i);
    out.errors.push_back((p - project_onto_plane(p, out.plane)).norm());
  }
  if (out.errors.empty()) {
    throw Error(ErrorCode::EmptyNeighborhood, "profile_depth_error: no scene points near the references");
  }
  std::vector<double> sorted = out.errors;
  std::sort(sorted.begin(), sorted.end());
  out.median = quantile(sorted, 0.5);
  out.iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
  out.max = sorted.back();
  return out;
}

std::vector<GroundTruthPair> pair_ground_truth(std::span<const Vec3> ground_truth, const PointCloud& scene,
                                               const RegionSpec& region) {
  if (!(region.radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "pair_ground_truth: region radius must be positive");
  std::vector<std::size_t> inside;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    if (region.contains(scene.points[i])) inside.push_back(i);
  }
  std::vector<GroundTruthPair> pairs;
  if (!inside.empty()) {
    std::vector<Vec3> pts;
    pts.reserve(inside.size());
    for (std::size_t i : inside) pts.push_back(scene.points[i]);
    const NeighborIndex index(pts);
    for (const Vec3& l : ground_truth) {
      const Neighbor nb = index.nearest(l);
      if (std::sqrt(nb.sq_distance) > region.radius) continue;
      pairs.push_back({l, pts[nb.index], inside[nb.index]});
    }
  }
  if (pairs.size() < 3) {
    throw Error(ErrorCode::TooFewPairs,
                "pair_ground_truth: " + std::to_string(pairs.size()) + " pairs inside the region, need 3");
  }
  return pairs;
}

CorrectionModel fit_region_correction(std::span<const GroundTruthPair> pairs, const RegionSpec& region) {
  if (!(region.radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "fit_region_correction: region radius must be positive");
  std::vector<Vec3> measured, truth;
  measured.reserve(pairs.size());
  truth.reserve(pairs.size());
  for (const auto& p : pairs) {
    measured.push_back(p.measured);
    truth.push_back(p.truth);
  }
  CorrectionModel model;
  model.region = region;
  model.transform = kabsch_align(measured, truth);
  model.pair_count = pairs.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) sum += (truth[i] - model.transform.apply(measured[i])).squaredNorm();
  model.residual_rms = std::sqrt(sum / static_cast<double>(pairs.size()));
  return model;
}

PointCloud apply_region_correction(const PointCloud& scene, const CorrectionModel& model) {
  if (scene.region_corrected) {
    throw Error(ErrorCode::AlreadyCorrected, "apply_region_correction: cloud was already corrected");
  }
  if (!model.transform.is_valid(1e-6) || std::abs(model.transform.scale - 1.0) > 1e-12 || !(model.region.radius > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "apply_region_correction: invalid correction model");
  }
  PointCloud out = scene;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!model.region.contains(scene.points[i])) continue;
    out.points[i] = model.transform.apply(scene.points[i]);
    if (out.has_normals()) (*out.normals)[i] = model.transform.rotate((*scene.normals)[i]);
  }
  out.region_corrected = true;
  return out;
}

nlohmann::json correction_model_to_json(const CorrectionModel& m) {
  nlohmann::json j;
  j["center"] = {m.region.center.x(), m.region.center.y(), m.region.center.z()};
  j["radius_mm"] = m.region.radius;
  j["rotation_row_major_9"] = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) j["rotation_row_major_9"].push_back(m.transform.rotation(r, c));
  }
  j["translation_mm_3"] = {m.transform.translation.x(), m.transform.translation.y(), m.transform.translation.z()};
  j["residual_rms_mm"] = m.residual_rms;
  j["n"] = m.pair_count;
  return j;
}

CorrectionModel correction_model_from_json(const nlohmann::json& j) {
  try {
    CorrectionModel m;
    const auto center = j.at("center").get<std::vector<double>>();
    const auto rot = j.at("rotation_row_major_9").get<std::vector<double>>();
    const auto t = j.at("translation_mm_3").get<std::vector<double>>();
    if (center.size() != 3 || rot.size() != 9 || t.size() != 3) {
      throw Error(ErrorCode::ParseError, "correction model: wrong array length");
    }
    m.region.center = Vec3(center[0], center[1], center[2]);
    m.region.radius = j.at("radius_mm").get<double>();
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) m.transform.rotation(r, c) = rot[static_cast<std::size_t>(3 * r + c)];
    }
    m.transform.translation = Vec3(t[0], t[1], t[2]);
    m.residual_rms = j.value("residual_rms_mm", 0.0);
    m.pair_count = j.value("n", std::size_t{0});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("correction model: ") + e.what());
  }
}

void write_correction_model(const std::filesystem::path& path, const CorrectionModel& model) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << correction_model_to_json(model).dump(2) << '\n';
}

CorrectionModel read_correction_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  return correction_model_from_json(j);
}

}  // namespace regkit
