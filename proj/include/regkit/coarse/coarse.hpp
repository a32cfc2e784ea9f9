#pragma once

#include "regkit/core/point_cloud.hpp"
#include "regkit/core/rigid_transform.hpp"
#include "regkit/features/features.hpp"

#include "json.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace regkit {

enum class CliquePruning { Auto, On, Off };

struct CoarseConfig {
  // Robust estimation.
  double noise_bound = 1.0;           // mm; per-measurement bound (3 sigma at sigma = 0.33)
  double c2 = 1.0;                    // truncation level in normalised units
  std::optional<double> known_scale = 1.0;  // rigid by default; nullopt estimates the scale
  double gnc_factor = 1.4;            // convexity parameter divided by this per outer iteration
  int gnc_max_iterations = 64;
  double gnc_cost_threshold = 1e-6;   // relative change of the surrogate cost
  std::size_t max_complete_graph = 300;
  CliquePruning clique = CliquePruning::Auto;
  std::size_t clique_auto_threshold = 50;
  std::uint64_t seed = 0;

  // Pipeline front end.
  std::size_t normal_k = 30;
  std::size_t source_keypoints = 300;
  std::size_t target_keypoints = 0;   // 0 describes every target point
  double fpfh_radius = 0.0;           // mm; <= 0 picks fpfh_radius_factor x median spacing
  double fpfh_radius_factor = 10.0;
  MatchOptions match{0.0, true, 2.0};
  /// When > 0, the pipeline noise bound is max(noise_bound, factor x spacing)
  /// to absorb keypoint sampling offsets between the clouds.
  double spacing_bound_factor = 1.0;
  std::size_t max_points = 20000;     // larger clouds are voxel-downsampled first
};

/// Translation-invariant measurements between pairs of correspondences.
struct TimSet {
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // correspondence indices (i < k)
  std::vector<Vec3> delta_p;  // p_k - p_i, mm
  std::vector<Vec3> delta_q;  // q_l - q_j, mm
  std::vector<double> weights;
  std::vector<double> scale_bounds;     // alpha_ik = delta_ik / |delta_p|
  std::vector<double> rotation_bounds;  // delta_ik = 2 x noise_bound, mm (both ends carry noise)
  std::size_t vertex_count = 0;         // correspondences the edges index into

  std::size_t size() const noexcept { return edges.size(); }
  bool empty() const noexcept { return edges.empty(); }
  TimSet subset(std::span<const std::size_t> entries) const;
};

/// Complete graph over the correspondences (after a weighted random
/// subsample to config.max_complete_graph when larger). Edges with
/// |delta_p| < 1e-6 mm are dropped. Throws TooFewCorrespondences below 3 pairs.
/// When subsampled, `kept` receives the surviving correspondence indices and
/// edges index into that reduced list.
TimSet build_tims(const CorrespondenceSet& corr, const PointCloud& source, const PointCloud& target,
                  const CoarseConfig& config, std::vector<std::size_t>* kept = nullptr);

struct ScaleEstimate {
  double value = 1.0;
  std::vector<std::size_t> inliers;  // TIM edges in the consensus set
  bool no_consensus = false;         // fell back to the weighted median
};

ScaleEstimate estimate_scale_tls(const TimSet& tims, const CoarseConfig& config);

struct RotationEstimate {
  Mat3 rotation = Mat3::Identity();
  std::vector<double> gnc_weights;
  std::vector<std::size_t> inliers;  // TIM edges within the truncation at the returned rotation
  int iterations = 0;
  double objective = 0.0;            // truncated objective at the returned rotation
  bool diverged = false;             // objective failed to drop for 5 iterations; best-so-far returned
};

/// Graduated non-convexity over the truncated rotation objective, alternating
/// weighted rotation fits and closed-form weight updates. Throws
/// TooFewCorrespondences below 3 non-degenerate edges.
RotationEstimate estimate_rotation_gnc(const TimSet& tims, double kappa, const CoarseConfig& config);

struct CliqueResult {
  TimSet tims;                       // edges induced by the clique
  std::vector<std::size_t> vertices; // correspondence indices, ascending
  std::vector<std::size_t> edge_ids; // indices into the input TimSet
  bool singleton = false;
};

/// Consistency graph over correspondences (edge iff | |dq| - kappa |dp| | <=
/// sqrt(c2) x rotation bound), then an approximate maximum clique from a
/// degeneracy-ordered greedy search refined by (1,2)-swaps.
CliqueResult prune_max_clique(const TimSet& tims, double kappa, double c2 = 1.0);

/// The clique search used by prune_max_clique, on a dense symmetric
/// adjacency matrix. Returns ascending vertex indices.
std::vector<std::size_t> max_clique_heuristic(const std::vector<std::vector<char>>& adjacency);

struct TranslationEstimate {
  Vec3 value = Vec3::Zero();
  std::vector<std::size_t> inliers;  // correspondences in all three consensus sets
  std::array<bool, 3> no_consensus{false, false, false};
};

/// Component-wise exact TLS over q_j - kappa R p_i with bound config.noise_bound.
TranslationEstimate estimate_translation_tls(const CorrespondenceSet& corr, const PointCloud& source,
                                             const PointCloud& target, double kappa, const Mat3& rotation,
                                             const CoarseConfig& config);

struct StageDiagnostic {
  std::string stage;
  std::size_t input_count = 0;
  std::size_t inlier_count = 0;
  double residual_median = 0.0;
  double wall_time_ms = 0.0;
};

struct CoarseResult {
  RigidTransform transform;
  std::vector<std::size_t> inlier_edges;  // into `tims`
  CorrespondenceSet inlier_pairs;
  CorrespondenceSet correspondences;      // all matches fed to the robust stages
  TimSet tims;
  std::vector<StageDiagnostic> diagnostics;
  nlohmann::json metadata;                // parameters and provenance of the run
  bool scale_no_consensus = false;
  bool translation_no_consensus = false;
  bool gnc_diverged = false;
  bool clique_singleton = false;
};

nlohmann::json diagnostics_to_json(const CoarseResult& result);

/// Full pipeline: normals/curvature, curvature sampling, FPFH, matching,
/// TIMs, optional clique pruning, scale, rotation, translation. Deterministic
/// given config.seed. Errors from the front end surface as RegistrationFailed.
CoarseResult coarse_register(const PointCloud& source, const PointCloud& target, const CoarseConfig& config);

/// Robust stages only, on given correspondences (pairs index the clouds).
CoarseResult coarse_register_correspondences(const CorrespondenceSet& corr, const PointCloud& source,
                                             const PointCloud& target, const CoarseConfig& config);

}  // namespace regkit
