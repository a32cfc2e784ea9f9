// Command-line front end: register, correct, track, benchmark.
//
// Exit codes: 0 success, 1 usage or input error, 2 registration, correction
// or tracking failure.

#include "regkit/benchmark/benchmark.hpp"
#include "regkit/core/error.hpp"
#include "regkit/core/geometry.hpp"
#include "regkit/core/io.hpp"
#include "regkit/correction/correction.hpp"
#include "regkit/pipeline.hpp"
#include "regkit/tracking/tracker.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

using namespace regkit;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kFailed = 2;
constexpr std::size_t kModelPoints = 5000;

// Input problems are usage errors; everything else is a failure of the method.
int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::ParseError:
    case ErrorCode::IoError:
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidArgument:
    case ErrorCode::EmptyCloud:
      return kUsage;
    default:
      return kFailed;
  }
}

RigidTransform read_pose(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    const auto& r = j.at("rotation_row_major_9");
    const auto& t = j.at("translation_mm_3");
    if (r.size() != 9 || t.size() != 3) throw Error(ErrorCode::ParseError, path + ": pose arrays must have 9 and 3 entries");
    RigidTransform pose;
    for (int i = 0; i < 9; ++i) pose.rotation(i / 3, i % 3) = r.at(i).get<double>();
    for (int i = 0; i < 3; ++i) pose.translation[i] = t.at(i).get<double>();
    if (!pose.is_valid(1e-6)) throw Error(ErrorCode::ParseError, path + ": rotation is not orthonormal");
    return pose;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << j.dump(2) << '\n';
}

// [coarse] and [icp] overrides; unknown keys are rejected.
void apply_register_config(const std::string& path, CoarseConfig& coarse, IcpConfig& icp) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  try {
    for (const auto& [section, keys] : tree) {
      for (const auto& [key, node] : keys) {
        const std::string name = section + "." + key;
        if (name == "coarse.noise_bound") coarse.noise_bound = node.get_value<double>();
        else if (name == "coarse.seed") coarse.seed = node.get_value<std::uint64_t>();
        else if (name == "coarse.source_keypoints") coarse.source_keypoints = node.get_value<std::size_t>();
        else if (name == "coarse.normal_k") coarse.normal_k = node.get_value<std::size_t>();
        else if (name == "coarse.max_points") coarse.max_points = node.get_value<std::size_t>();
        else if (name == "coarse.clique") {
          const std::string v = node.get_value<std::string>();
          if (v == "auto") coarse.clique = CliquePruning::Auto;
          else if (v == "on") coarse.clique = CliquePruning::On;
          else if (v == "off") coarse.clique = CliquePruning::Off;
          else throw Error(ErrorCode::ConfigError, path + ": coarse.clique must be auto, on or off");
        }
        else if (name == "icp.noise_sigma") icp.noise_sigma = node.get_value<double>();
        else if (name == "icp.max_iterations") icp.max_iterations = node.get_value<int>();
        else if (name == "icp.max_correspondence_distance") icp.max_correspondence_distance = node.get_value<double>();
        else throw Error(ErrorCode::ConfigError, path + ": unknown key " + name);
      }
    }
  } catch (const pt::ptree_bad_data& e) {
    throw Error(ErrorCode::ConfigError, path + ": " + e.what());
  }
}

std::vector<double> parse_region(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "--region: '" + item + "' is not a number");
    }
  }
  if (v.size() != 4 || !(v[3] > 0.0)) throw Error(ErrorCode::InvalidArgument, "--region expects cx,cy,cz,r with r > 0");
  return v;
}

int run_register(const std::string& source_path, const std::string& target_path, const std::string& out,
                 const std::string& config_path) {
  CoarseConfig coarse;
  IcpConfig icp;
  if (!config_path.empty()) apply_register_config(config_path, coarse, icp);
  const PointCloud source = load_point_cloud(source_path);
  const PointCloud target = load_point_cloud(target_path);
  const PipelineResult r = register_pipeline(source, target, coarse, icp);
  nlohmann::json j = pipeline_result_to_json(r);
  j["success"] = r.refine.success;
  write_json(out, j);
  std::printf("nn_rmse_mm %.4f inlier_rmse_mm %.4f %s\n", r.nn_rmse, r.refine.inlier_rmse,
              r.refine.success ? "success" : "failed");
  return r.refine.success ? kOk : kFailed;
}

int run_correct(const std::string& scene_path, const std::string& gt_path, const std::string& region_text,
                const std::string& out, const std::string& model_path) {
  const std::vector<double> rv = parse_region(region_text);
  const RegionSpec region{Vec3(rv[0], rv[1], rv[2]), rv[3]};
  const PointCloud scene = load_point_cloud(scene_path);
  const std::vector<Vec3> gt = load_points_csv(gt_path);
  const auto pairs = pair_ground_truth(gt, scene, region);
  const CorrectionModel model = fit_region_correction(pairs, region);
  const PointCloud corrected = apply_region_correction(scene, model);
  write_ply_binary(out, corrected);
  write_correction_model(model_path, model);
  std::printf("pairs %zu residual_rms_mm %.4f\n", model.pair_count, model.residual_rms);
  return kOk;
}

int run_track(const std::string& model_path, const std::string& frames_dir, const std::string& init_path,
              const std::string& out) {
  PointCloud model = load_point_cloud(model_path);
  if (model.size() > kModelPoints) model = voxel_downsample(model, kModelPoints);
  model.normals.reset();
  model.curvatures.reset();
  TrackerState state = tracker_init(std::move(model), read_pose(init_path));
  const auto index = read_frame_index(frames_dir);

  std::ofstream lines(out);
  if (!lines) throw Error(ErrorCode::IoError, "cannot write " + out);
  std::size_t with_pose = 0;
  for (const FrameIndexEntry& e : index) {
    Frame f{load_point_cloud(e.file), e.timestamp_ms};
    const TrackedPose p = track_frame(state, f);
    if (p.pose) ++with_pose;
    lines << tracked_pose_to_json(p).dump() << '\n';
  }
  std::printf("frames %zu posed %zu\n", index.size(), with_pose);
  return index.empty() || with_pose > 0 ? kOk : kFailed;
}

int run_benchmark(const std::string& config_path, const std::string& out_dir) {
  const SuiteConfig cfg = load_suite_config(config_path);
  const SuiteReport report = run_suite(cfg);
  write_suite_report(report, out_dir);
  for (const ScoreTable& t : report.scores) {
    for (const ScoreRow& row : t.rows) {
      std::printf("lambda %.3g %-12s rmse %.4f ms %.2f score %.2f\n", t.lambda, row.method.c_str(), row.median_rmse,
                  row.median_runtime, row.score);
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point-cloud registration, correction and tracking toolkit"};
  app.require_subcommand(1);

  std::string source, target, out, config, scene, gt, region, model_out, model, frames, init, out_dir;

  auto* reg = app.add_subcommand("register", "Global registration followed by robust refinement");
  reg->add_option("--source", source, "Source cloud (PLY or OBJ)")->required();
  reg->add_option("--target", target, "Target cloud")->required();
  reg->add_option("--out", out, "Pose JSON")->required();
  reg->add_option("--config", config, "INI overrides ([coarse], [icp])");

  auto* cor = app.add_subcommand("correct", "Regional depth-error correction");
  cor->add_option("--scene", scene, "Measured scene cloud")->required();
  cor->add_option("--gt", gt, "Ground-truth points, CSV x,y,z")->required();
  cor->add_option("--region", region, "cx,cy,cz,r in mm")->required();
  cor->add_option("--out", out, "Corrected cloud (PLY)")->required();
  cor->add_option("--model", model_out, "Correction model JSON")->required();

  auto* trk = app.add_subcommand("track", "Frame-to-frame tracking over a recorded stream");
  trk->add_option("--model", model, "Model cloud")->required();
  trk->add_option("--frames", frames, "Directory with frames.index")->required();
  trk->add_option("--init", init, "Registration pose JSON")->required();
  trk->add_option("--out", out, "Pose stream, JSON lines")->required();

  auto* bench = app.add_subcommand("benchmark", "Synthetic benchmark suite");
  bench->add_option("--config", config, "Suite config")->required();
  bench->add_option("--out-dir", out_dir, "Report directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*reg) return run_register(source, target, out, config);
    if (*cor) return run_correct(scene, gt, region, out, model_out);
    if (*trk) return run_track(model, frames, init, out);
    if (*bench) return run_benchmark(config, out_dir);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  }
  return kUsage;
}
