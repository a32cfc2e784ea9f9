#include "regkit/tracking/tracker.hpp"

#include "regkit/core/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

namespace regkit {

std::string_view to_string(InitBranch branch) {
  switch (branch) {
    case InitBranch::PreviousFrame: return "previous_frame";
    case InitBranch::LastSuccess: return "last_success";
    case InitBranch::Registration: return "registration";
    case InitBranch::None: return "none";
  }
  return "unknown";
}

std::string_view to_string(TrackStatus status) {
  switch (status) {
    case TrackStatus::Tracked: return "tracked";
    case TrackStatus::Recovered: return "recovered";
    case TrackStatus::Reinitialized: return "reinitialized";
    case TrackStatus::Lost: return "lost";
  }
  return "unknown";
}

const HistoryEntry* TrackerState::last_success() const {
  for (auto it = history.rbegin(); it != history.rend(); ++it) {
    if (it->success) return &*it;
  }
  return nullptr;
}

std::optional<double> TrackerState::last_timestamp() const {
  if (history.empty()) return std::nullopt;
  return history.back().timestamp_ms;
}

TrackerState tracker_init_unregistered(PointCloud model, const TrackerConfig& config) {
  if (model.empty()) throw Error(ErrorCode::EmptyCloud, "tracker_init: empty model");
  if (config.history_depth == 0) throw Error(ErrorCode::InvalidArgument, "tracker_init: history depth must be positive");
  if (!(config.crop_margin_mm >= 0.0)) throw Error(ErrorCode::InvalidArgument, "tracker_init: negative crop margin");
  TrackerState s;
  s.model = std::move(model);
  s.config = config;
  return s;
}

void set_registration(TrackerState& state, const RigidTransform& pose, double latency_ms) {
  if (!pose.is_valid(1e-6) || std::abs(pose.scale - 1.0) > 1e-12) {
    throw Error(ErrorCode::InvalidArgument, "tracker: registration pose is not a rigid motion");
  }
  if (!(latency_ms >= 0.0)) throw Error(ErrorCode::InvalidArgument, "tracker: negative registration latency");
  state.registration_pose = pose;
  state.registration_latency_ms = latency_ms;
}

TrackerState tracker_init(PointCloud model, const RigidTransform& registration_pose, double latency_ms,
                          const TrackerConfig& config) {
  TrackerState s = tracker_init_unregistered(std::move(model), config);
  set_registration(s, registration_pose, latency_ms);
  return s;
}

InitBranch select_init_branch(const TrackerState& state) {
  if (!state.history.empty() && state.history.back().success) return InitBranch::PreviousFrame;
  if (state.last_success()) return InitBranch::LastSuccess;
  if (state.registration_pose) return InitBranch::Registration;
  return InitBranch::None;
}

TrackedPose track_frame(TrackerState& state, const Frame& frame) {
  if (const auto last = state.last_timestamp(); last && !(frame.timestamp_ms > *last)) {
    throw Error(ErrorCode::StaleFrame, "track_frame: timestamp " + std::to_string(frame.timestamp_ms) +
                                           " is not after " + std::to_string(*last));
  }
  const auto start = std::chrono::steady_clock::now();
  TrackedPose out;
  out.timestamp_ms = frame.timestamp_ms;
  out.branch = select_init_branch(state);
  const bool had_history = !state.history.empty();

  std::optional<RigidTransform> init;
  switch (out.branch) {
    case InitBranch::PreviousFrame: init = state.history.back().pose; break;
    case InitBranch::LastSuccess: init = state.last_success()->pose; break;
    case InitBranch::Registration: init = state.registration_pose; break;
    case InitBranch::None: out.failure = "no registration and no tracked pose"; break;
  }

  HistoryEntry entry;
  entry.timestamp_ms = frame.timestamp_ms;
  if (init) {
    try {
      const PointCloud crop = crop_aabb(frame.cloud, state.model, *init, state.config.crop_margin_mm);
      const IcpResult r = icp_fast(state.model, crop, *init, state.config.icp);
      out.inlier_rmse = r.inlier_rmse;
      if (r.success) {
        entry.pose = r.transform;
        entry.success = true;
      } else {
        out.failure = r.budget_exceeded ? "time budget exceeded" : "refinement did not meet the success criteria";
      }
    } catch (const Error& e) {
      out.failure = e.what();
    }
  }

  if (entry.success) {
    out.pose = entry.pose;
    switch (out.branch) {
      case InitBranch::PreviousFrame: out.status = TrackStatus::Tracked; break;
      case InitBranch::LastSuccess: out.status = TrackStatus::Recovered; break;
      default: out.status = had_history ? TrackStatus::Reinitialized : TrackStatus::Tracked; break;
    }
  } else {
    out.status = TrackStatus::Lost;
  }
  state.history.push_back(std::move(entry));
  while (state.history.size() > state.config.history_depth) state.history.pop_front();
  out.compute_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

RigidTransform interpolate_pose(const RigidTransform& a, double t_a, const RigidTransform& b, double t_b, double t) {
  if (!(t_a < t_b)) throw Error(ErrorCode::InvalidArgument, "interpolate_pose: needs t_a < t_b");
  const bool same = a.rotation == b.rotation && a.translation == b.translation && a.scale == b.scale;
  if (t <= t_a || same) return a;
  if (t >= t_b) return b;
  const double s = (t - t_a) / (t_b - t_a);
  const Eigen::Quaterniond qa(a.rotation), qb(b.rotation);
  RigidTransform out;
  out.rotation = qa.slerp(s, qb).normalized().toRotationMatrix();
  out.translation = (1.0 - s) * a.translation + s * b.translation;
  return out;
}

std::optional<RigidTransform> pose_at(const std::vector<TrackedPose>& stream, double t) {
  const TrackedPose* before = nullptr;
  for (const TrackedPose& p : stream) {
    if (!p.pose) continue;
    if (p.timestamp_ms <= t) {
      before = &p;
      continue;
    }
    if (!before) return std::nullopt;
    return interpolate_pose(*before->pose, before->timestamp_ms, *p.pose, p.timestamp_ms, t);
  }
  if (!before) return std::nullopt;
  return before->pose;
}

ReplayReport replay_sequence(TrackerState& state, const std::vector<Frame>& frames) {
  ReplayReport report;
  report.poses.reserve(frames.size());
  std::vector<double> times;
  for (const Frame& f : frames) {
    report.poses.push_back(track_frame(state, f));
    times.push_back(report.poses.back().compute_ms);
  }
  if (!times.empty()) {
    const auto mid = times.begin() + static_cast<std::ptrdiff_t>((times.size() - 1) / 2);
    std::nth_element(times.begin(), mid, times.end());
    report.median_compute_ms = *mid;
  }
  return report;
}

nlohmann::json tracked_pose_to_json(const TrackedPose& p) {
  nlohmann::json j;
  j["timestamp_ms"] = p.timestamp_ms;
  j["status"] = std::string(to_string(p.status));
  if (p.pose) {
    j["rotation_row_major_9"] = nlohmann::json::array();
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) j["rotation_row_major_9"].push_back(p.pose->rotation(r, c));
    }
    j["translation_mm_3"] = {p.pose->translation.x(), p.pose->translation.y(), p.pose->translation.z()};
  } else {
    j["rotation_row_major_9"] = nullptr;
    j["translation_mm_3"] = nullptr;
  }
  j["rmse_mm"] = p.inlier_rmse;
  j["compute_ms"] = p.compute_ms;
  j["init_branch"] = std::string(to_string(p.branch));
  return j;
}

std::vector<FrameIndexEntry> read_frame_index(const std::filesystem::path& dir) {
  const auto path = dir / "frames.index";
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<FrameIndexEntry> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = line.substr(0, line.find('#'));
    std::istringstream fields(line);
    std::string file;
    if (!(fields >> file)) continue;
    double ts = 0.0;
    std::string extra;
    if (!(fields >> ts) || (fields >> extra) || !std::isfinite(ts)) {
      throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(number) + ": expected 'file timestamp_ms'");
    }
    out.push_back({dir / file, ts});
  }
  return out;
}

void write_frame_index(const std::filesystem::path& dir, const std::vector<FrameIndexEntry>& entries) {
  std::ofstream out(dir / "frames.index");
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + (dir / "frames.index").string());
  out.precision(17);
  for (const auto& e : entries) out << e.file.filename().string() << ' ' << e.timestamp_ms << '\n';
}

}  // namespace regkit
