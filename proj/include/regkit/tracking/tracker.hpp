#pragma once

#include "regkit/core/point_cloud.hpp"
#include "regkit/core/rigid_transform.hpp"
#include "regkit/icp/icp.hpp"

#include "json.hpp"

#include <deque>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

namespace regkit {

struct Frame {
  PointCloud cloud;        // scene, mm
  double timestamp_ms = 0.0;
};

// Which pose seeded the frame's refinement.
enum class InitBranch {
  PreviousFrame,    // the previous frame succeeded
  LastSuccess,      // newest success still in the history
  Registration,     // no tracked success in the history
  None,             // neither tracking nor registration has succeeded
};

enum class TrackStatus { Tracked, Recovered, Reinitialized, Lost };

std::string_view to_string(InitBranch branch);
std::string_view to_string(TrackStatus status);

struct TrackerConfig {
  IcpConfig icp = fast_icp_config();
  double crop_margin_mm = 20.0;
  std::size_t history_depth = 30;
};

struct HistoryEntry {
  double timestamp_ms = 0.0;
  std::optional<RigidTransform> pose;  // absent for frames without an estimate
  bool success = false;
};

struct TrackerState {
  PointCloud model;
  std::optional<RigidTransform> registration_pose;
  double registration_latency_ms = 0.0;
  std::deque<HistoryEntry> history;  // oldest first, at most config.history_depth entries
  TrackerConfig config;

  /// Newest successful entry of the history.
  const HistoryEntry* last_success() const;
  std::optional<double> last_timestamp() const;
};

/// Throws EmptyCloud, InvalidArgument (invalid pose, negative latency, zero history depth).
TrackerState tracker_init(PointCloud model, const RigidTransform& registration_pose, double latency_ms = 0.0,
                          const TrackerConfig& config = {});
/// State awaiting a registration result; frames before it resolve to InitBranch::None.
TrackerState tracker_init_unregistered(PointCloud model, const TrackerConfig& config = {});
/// Supplies (or replaces) the registration pose.
void set_registration(TrackerState& state, const RigidTransform& pose, double latency_ms);

struct TrackedPose {
  double timestamp_ms = 0.0;
  std::optional<RigidTransform> pose;  // empty exactly when status == Lost
  TrackStatus status = TrackStatus::Lost;
  InitBranch branch = InitBranch::None;
  double inlier_rmse = 0.0;   // mm
  double compute_ms = 0.0;
  std::string failure;        // why a frame was lost
};

/// The initialization cascade over the current history and registration state.
InitBranch select_init_branch(const TrackerState& state);

/// Picks the initial pose by the cascade, crops the scene around the model
/// at that pose and runs accelerated ICP. The frame succeeds when the ICP
/// result is converged with enough inliers and a small inlier RMSE.
/// Throws StaleFrame when the timestamp does not increase.
TrackedPose track_frame(TrackerState& state, const Frame& frame);

/// Translation lerp and shortest-arc quaternion slerp; t is clamped to
/// [t_a, t_b]. Throws InvalidArgument unless t_a < t_b.
RigidTransform interpolate_pose(const RigidTransform& a, double t_a, const RigidTransform& b, double t_b, double t);

/// Pose at display time t from a tracked stream: interpolated between the
/// bracketing non-lost poses, held at the newest one past the end (no
/// extrapolation). Empty before the first pose.
std::optional<RigidTransform> pose_at(const std::vector<TrackedPose>& stream, double t);

struct ReplayReport {
  std::vector<TrackedPose> poses;
  double median_compute_ms = 0.0;  // lower median; 0 for an empty stream
};

ReplayReport replay_sequence(TrackerState& state, const std::vector<Frame>& frames);

nlohmann::json tracked_pose_to_json(const TrackedPose& pose);

struct FrameIndexEntry {
  std::filesystem::path file;  // resolved against the index directory
  double timestamp_ms = 0.0;
};

/// Reads `<dir>/frames.index` ("file timestamp_ms" per line, `#` comments).
/// Throws IoError, ParseError (with line number).
std::vector<FrameIndexEntry> read_frame_index(const std::filesystem::path& dir);
void write_frame_index(const std::filesystem::path& dir, const std::vector<FrameIndexEntry>& entries);

}  // namespace regkit
