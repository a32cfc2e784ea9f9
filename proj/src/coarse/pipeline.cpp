#include "regkit/coarse/coarse.hpp"
#include "regkit/core/error.hpp"
#include "regkit/core/geometry.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace regkit {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

PointCloud prepare(const PointCloud& cloud, const CoarseConfig& config) {
  if (cloud.empty()) {
    throw Error(ErrorCode::EmptyCloud, "coarse_register: empty cloud");
  }
  const bool reduce = config.max_points > 0 && cloud.size() > config.max_points;
  PointCloud out = reduce ? voxel_downsample(cloud, config.max_points) : cloud;
  if (reduce || !out.has_normals() || !out.has_curvatures()) {
    out = estimate_normals_and_curvature(out, config.normal_k);
    // Descriptors are only comparable if both clouds orient their normals
    // the same way; propagate a consistent, mostly outward orientation.
    orient_normals_consistent(out, 10);
  }
  return out;
}

}  // namespace

nlohmann::json diagnostics_to_json(const CoarseResult& result) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& d : result.diagnostics) {
    stages.push_back({{"stage", d.stage},
                      {"input_count", d.input_count},
                      {"inlier_count", d.inlier_count},
                      {"residual_median", d.residual_median},
                      {"wall_time_ms", d.wall_time_ms}});
  }
  return {{"stages", stages},
          {"metadata", result.metadata},
          {"flags",
           {{"scale_no_consensus", result.scale_no_consensus},
            {"translation_no_consensus", result.translation_no_consensus},
            {"gnc_diverged", result.gnc_diverged},
            {"clique_singleton", result.clique_singleton}}}};
}

CoarseResult coarse_register_correspondences(const CorrespondenceSet& corr, const PointCloud& source,
                                             const PointCloud& target, const CoarseConfig& config) {
  CoarseResult out;
  out.correspondences = corr;

  auto t0 = Clock::now();
  std::vector<std::size_t> kept;
  TimSet tims = build_tims(corr, source, target, config, &kept);
  const CorrespondenceSet used = corr.subset(kept);
  {
    std::vector<double> len_gap;
    for (std::size_t e = 0; e < tims.size(); ++e) {
      len_gap.push_back(std::fabs(tims.delta_q[e].norm() - tims.delta_p[e].norm()));
    }
    out.diagnostics.push_back({"tims", corr.size(), tims.size(), median_of(len_gap), ms_since(t0)});
  }

  t0 = Clock::now();
  ScaleEstimate scale = estimate_scale_tls(tims, config);
  const bool prune = config.clique == CliquePruning::On ||
                     (config.clique == CliquePruning::Auto && used.size() > config.clique_auto_threshold);
  std::vector<std::size_t> edge_map(tims.size());
  std::iota(edge_map.begin(), edge_map.end(), 0);
  TimSet pruned = tims;
  std::vector<std::size_t> vertices(used.size());
  std::iota(vertices.begin(), vertices.end(), 0);
  double scale_ms = ms_since(t0);
  if (prune) {
    t0 = Clock::now();
    CliqueResult clique = prune_max_clique(tims, scale.value, config.c2);
    out.clique_singleton = clique.singleton;
    std::vector<double> gaps;
    for (std::size_t e : clique.edge_ids) {
      gaps.push_back(std::fabs(tims.delta_q[e].norm() - scale.value * tims.delta_p[e].norm()));
    }
    out.diagnostics.push_back({"max_clique", used.size(), clique.vertices.size(), median_of(gaps), ms_since(t0)});
    if (clique.singleton) {
      throw Error(ErrorCode::RegistrationFailed, "coarse_register: no pairwise-consistent correspondences");
    }
    pruned = std::move(clique.tims);
    edge_map = std::move(clique.edge_ids);
    vertices = std::move(clique.vertices);
    if (!config.known_scale) {
      t0 = Clock::now();
      scale = estimate_scale_tls(pruned, config);
      scale_ms += ms_since(t0);
    }
  }
  out.scale_no_consensus = scale.no_consensus;
  {
    std::vector<double> dev;
    for (std::size_t e = 0; e < pruned.size(); ++e) {
      dev.push_back(std::fabs(pruned.delta_q[e].norm() / pruned.delta_p[e].norm() - scale.value));
    }
    out.diagnostics.push_back({"scale", pruned.size(), config.known_scale ? pruned.size() : scale.inliers.size(),
                               median_of(dev), scale_ms});
  }

  t0 = Clock::now();
  const RotationEstimate rot = estimate_rotation_gnc(pruned, scale.value, config);
  out.gnc_diverged = rot.diverged;
  {
    std::vector<double> r;
    for (std::size_t e : rot.inliers) {
      r.push_back((pruned.delta_q[e] - scale.value * (rot.rotation * pruned.delta_p[e])).norm());
    }
    out.diagnostics.push_back({"rotation", pruned.size(), rot.inliers.size(), median_of(r), ms_since(t0)});
  }
  for (std::size_t e : rot.inliers) out.inlier_edges.push_back(edge_map[e]);

  t0 = Clock::now();
  const CorrespondenceSet trans_set = used.subset(vertices);
  const TranslationEstimate trans =
      estimate_translation_tls(trans_set, source, target, scale.value, rot.rotation, config);
  out.translation_no_consensus =
      std::any_of(trans.no_consensus.begin(), trans.no_consensus.end(), [](bool b) { return b; });
  out.inlier_pairs = trans_set.subset(trans.inliers);

  out.transform.rotation = rot.rotation;
  out.transform.scale = scale.value;
  out.transform.translation = trans.value;
  {
    std::vector<double> r;
    for (const auto& p : out.inlier_pairs.pairs) {
      r.push_back((target.points[p.target] - out.transform.apply(source.points[p.source])).norm());
    }
    out.diagnostics.push_back({"translation", trans_set.size(), trans.inliers.size(), median_of(r), ms_since(t0)});
  }
  out.tims = std::move(tims);
  out.metadata["noise_bound_mm"] = config.noise_bound;
  out.metadata["tim_bound_mm"] = 2.0 * config.noise_bound;
  out.metadata["c2"] = config.c2;
  out.metadata["known_scale"] = config.known_scale ? nlohmann::json(*config.known_scale) : nlohmann::json(nullptr);
  out.metadata["clique_pruning"] = prune;
  out.metadata["gnc_iterations"] = rot.iterations;
  return out;
}

CoarseResult coarse_register(const PointCloud& source_in, const PointCloud& target_in, const CoarseConfig& config) {
  auto t0 = Clock::now();
  const PointCloud source = prepare(source_in, config);
  const PointCloud target = prepare(target_in, config);
  const double spacing = std::max(median_spacing(source), median_spacing(target));
  std::vector<StageDiagnostic> front;
  front.push_back({"preprocess", source_in.size() + target_in.size(), source.size() + target.size(), spacing,
                   ms_since(t0)});

  try {
    t0 = Clock::now();
    const std::size_t ns = std::min(config.source_keypoints, source.size());
    const bool dense = config.target_keypoints == 0 || config.target_keypoints >= target.size();
    const std::size_t nt = dense ? target.size() : config.target_keypoints;
    const auto src_keys = curvature_weighted_sample(source, ns, config.seed);
    std::vector<std::size_t> tgt_keys(nt);
    if (dense) {
      std::iota(tgt_keys.begin(), tgt_keys.end(), 0);
    } else {
      tgt_keys = curvature_weighted_sample(target, nt, config.seed ^ 0x9e3779b97f4a7c15ULL);
    }
    front.push_back({"sampling", source.size() + target.size(), ns + nt, 0.0, ms_since(t0)});

    t0 = Clock::now();
    const double radius = config.fpfh_radius > 0.0 ? config.fpfh_radius : config.fpfh_radius_factor * spacing;
    const DescriptorSet src_desc = compute_fpfh(source, src_keys, radius);
    const DescriptorSet tgt_desc = compute_fpfh(target, tgt_keys, radius);
    front.push_back({"fpfh", ns + nt, ns + nt - src_desc.isolated_count() - tgt_desc.isolated_count(), radius,
                     ms_since(t0)});

    t0 = Clock::now();
    std::vector<double> key_curv(ns);
    for (std::size_t i = 0; i < ns; ++i) key_curv[i] = (*source.curvatures)[src_keys[i]];
    MatchOptions match = config.match;
    const double tau = match.tau > 0.0 ? match.tau : default_match_threshold(src_desc, match.tau_factor);
    match.tau = tau;
    const CorrespondenceSet corr = match_descriptors(src_desc, tgt_desc, key_curv, match);
    front.push_back({"matching", ns, corr.size(), median_of(corr.descriptor_distances), ms_since(t0)});

    CoarseConfig robust = config;
    if (config.spacing_bound_factor > 0.0) {
      robust.noise_bound = std::max(config.noise_bound, config.spacing_bound_factor * spacing);
    }
    CoarseResult out = coarse_register_correspondences(corr, source, target, robust);
    out.diagnostics.insert(out.diagnostics.begin(), front.begin(), front.end());
    out.metadata["fpfh_radius_mm"] = radius;
    out.metadata["match_tau"] = tau;
    out.metadata["mutual_matching"] = match.mutual;
    out.metadata["weight_formula"] = "w = (1 - d/tau) * (1 + k_i / k_mean)";
    out.metadata["keypoints"] = {ns, nt};
    out.metadata["seed"] = config.seed;
    return out;
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::NoCorrespondences:
      case ErrorCode::TooFewCorrespondences:
      case ErrorCode::DegenerateInput:
        throw Error(ErrorCode::RegistrationFailed, std::string("coarse_register: ") + e.what());
      default:
        throw;
    }
  }
}

}  // namespace regkit
