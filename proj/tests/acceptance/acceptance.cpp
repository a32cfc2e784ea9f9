// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Optional arguments select criteria by number, e.g. `acceptance 1 2 10`.

#include "regkit/benchmark/benchmark.hpp"
#include "regkit/coarse/coarse.hpp"
#include "regkit/coarse/tls.hpp"
#include "regkit/core/error.hpp"
#include "regkit/core/geometry.hpp"
#include "regkit/core/neighbor_index.hpp"
#include "regkit/correction/correction.hpp"
#include "regkit/icp/icp.hpp"
#include "regkit/pipeline.hpp"
#include "regkit/tracking/tracker.hpp"
#include "../support/oracles.hpp"
#include "../support/synthetic.hpp"
#include "../support/tracking_scene.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

using namespace regkit;
using namespace regkit::testing;

namespace {

constexpr double kDeg = M_PI / 180.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

double lower_median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

// 1. Kabsch on noiseless pairs, cross-checked against Horn's quaternion solution.
Outcome kabsch_exactness() {
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<std::size_t> count(10, 500);
  double worst_rot = 0.0, worst_trans = 0.0, worst_horn = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    RigidTransform truth = RigidTransform::from_rotation(random_rotation(rng));
    truth.translation = random_unit(rng) * 200.0;
    const std::vector<Vec3> src = random_points(rng, count(rng), 100.0);
    std::vector<Vec3> dst;
    for (const Vec3& p : src) dst.push_back(truth.apply(p));
    const RigidTransform k = kabsch_align(src, dst);
    const RigidTransform h = horn_align(src, dst);
    worst_rot = std::max(worst_rot, rotation_angle_between(k.rotation, truth.rotation));
    worst_trans = std::max(worst_trans, (k.translation - truth.translation).norm());
    worst_horn = std::max({worst_horn, rotation_angle_between(k.rotation, h.rotation),
                           (k.translation - h.translation).norm()});
  }
  return {worst_rot < 1e-7 && worst_trans < 1e-7 && worst_horn < 1e-7,
          format("1000 pairs: max rotation error %.2e rad, translation %.2e mm, Kabsch-Horn gap %.2e", worst_rot,
                 worst_trans, worst_horn)};
}

// 2. Adaptive voting versus subset enumeration.
Outcome tls_oracle() {
  std::mt19937_64 rng(2002);
  std::uniform_int_distribution<int> count(1, 12);
  std::uniform_real_distribution<double> pos(-10, 10), bnd(0.1, 3.0), wt(0.2, 2.0), trunc(0.25, 4.0);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = count(rng);
    std::vector<double> m(n), a(n), w(n);
    for (int i = 0; i < n; ++i) {
      m[i] = pos(rng);
      a[i] = bnd(rng);
      w[i] = wt(rng);
    }
    const double c2 = trial % 2 == 0 ? 1.0 : trunc(rng);
    const Tls1dResult r = solve_tls_1d(m, a, w, c2);
    const double oracle = brute_force_tls_min(m, a, w, c2);
    // The reported objective must also be the objective at the reported estimate.
    const double at_estimate = tls_objective_1d(r.estimate, m, a, w, c2);
    worst = std::max({worst, std::abs(r.objective - oracle), std::abs(at_estimate - oracle)});
  }
  return {worst <= 1e-6, format("200 instances: max |objective - brute-force minimum| %.2e", worst)};
}

// 3. Robust stages on correspondence sets that are 70% outliers.
Outcome outlier_breakdown() {
  std::mt19937_64 rng(3003);
  int ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    RigidTransform truth = RigidTransform::from_rotation(random_rotation(rng));
    truth.translation = random_unit(rng) * 100.0;
    const CorrespondenceScene s = correspondence_scene(rng, 100, 0.7, truth, 0.1);
    CoarseConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(trial);
    try {
      const CoarseResult r = coarse_register_correspondences(s.corr, s.source, s.target, cfg);
      ok += rotation_angle_between(r.transform.rotation, truth.rotation) < kDeg &&
            (r.transform.translation - truth.translation).norm() < 1.0;
    } catch (const Error&) {
    }
  }
  return {ok >= 95, format("%d/100 trials within 1 deg and 1 mm (need 95)", ok)};
}

// Object seen from one side inside a scene whose other points are clutter.
struct ClutterScene {
  PointCloud scene;
  RigidTransform truth;          // model frame -> scene frame
  std::vector<Vec3> visible;     // model points facing the camera under truth
};

ClutterScene clutter_scene(std::mt19937_64& rng, const PointCloud& object, const PointCloud& model,
                           double clutter_fraction) {
  ClutterScene c;
  c.truth = RigidTransform::from_rotation(random_rotation(rng));
  c.truth.translation = random_unit(rng) * 50.0;
  const Vec3 camera(0.0, 0.0, -600.0);
  std::normal_distribution<double> g(0.0, 0.33);
  std::vector<char> facing(object.size());
  for (std::size_t i = 0; i < object.size(); ++i) {
    const Vec3 p = c.truth.apply(object.points[i]);
    facing[i] = c.truth.rotate((*object.normals)[i]).dot(camera - p) > 0.0;
    if (facing[i]) c.scene.points.push_back(p + Vec3(g(rng), g(rng), g(rng)));
  }
  const NeighborIndex object_index(object);
  for (const Vec3& p : model.points) {
    if (facing[object_index.nearest(p).index]) c.visible.push_back(p);
  }
  // Clutter: a table plane behind the object and a few spheres.
  const auto total = static_cast<std::size_t>(static_cast<double>(c.scene.size()) / (1.0 - clutter_fraction));
  std::uniform_real_distribution<double> u(-200.0, 200.0), u01(0.0, 1.0);
  std::vector<std::pair<Vec3, double>> balls;
  for (int b = 0; b < 6; ++b) balls.push_back({Vec3(u(rng), u(rng), 150.0 + 50.0 * u01(rng)), 20.0 + 30.0 * u01(rng)});
  while (c.scene.size() < total) {
    if (u01(rng) < 0.5) {
      c.scene.points.emplace_back(u(rng), u(rng), 200.0 + g(rng));
    } else {
      const auto& [center, radius] = balls[rng() % balls.size()];
      c.scene.points.push_back(center + random_unit(rng) * radius + Vec3(g(rng), g(rng), g(rng)));
    }
  }
  return c;
}

// 4. Full pipeline at 20% overlap / 40 degrees, and the cluttered-scene variant.
Outcome coarse_success() {
  const PointCloud mesh = make_surrogate("ridged_ellipsoid");
  int ok = 0;
  for (int seed = 0; seed < 20; ++seed) {
    const TestCase tc = generate_test_case(mesh, 0.2, 40.0, 0.33, 0.5, 4000 + seed, "ridged_ellipsoid");
    CoarseConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(seed);
    try {
      ok += register_pipeline(tc.source, tc.target, cfg).nn_rmse < 5.0;
    } catch (const Error&) {
    }
  }

  PointCloud object = estimate_normals(make_ridged_ellipsoid(30000), 15);
  orient_normals_away_from(object, object.centroid());
  PointCloud model = voxel_downsample(object, 5000);
  model.normals.reset();
  model.curvatures.reset();
  std::mt19937_64 rng(4004);
  int scene_ok = 0;
  for (int trial = 0; trial < 12; ++trial) {
    const ClutterScene c = clutter_scene(rng, object, model, 0.8);
    CoarseConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(trial);
    try {
      const PipelineResult r = register_pipeline(model, c.scene, cfg);
      // Nearest-neighbour RMSE over the part of the model the sensor sees.
      const PointCloud seen{c.visible};
      scene_ok += alignment_rmse(seen, c.scene, r.transform, Pairing::NearestNeighbor) < 5.0;
    } catch (const Error&) {
    }
  }
  return {ok >= 18 && scene_ok == 12,
          format("%d/20 partial-overlap trials with NN RMSE < 5 mm (need 18); cluttered scene %d/12 (need 12)", ok,
                 scene_ok)};
}

// 5. Regional correction on rigidly biased skin patches.
Outcome correction_reduction() {
  std::mt19937_64 rng(5005);
  double worst = 1.0;
  int ok = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const BiasedRegionScene s = biased_region_scene(rng, 1.0, 3.0, 2.0, 0.1);
    const double before = profile_depth_error(s.scene, s.tape).median;
    const CorrectionModel model = fit_region_correction(pair_ground_truth(s.ground_truth, s.scene, s.region), s.region);
    const double after = profile_depth_error(apply_region_correction(s.scene, model), s.tape).median;
    const double reduction = 1.0 - after / before;
    worst = std::min(worst, reduction);
    ok += reduction >= 0.77;
  }
  return {ok == 50, format("%d/50 trials reduce the median depth error by >= 77%% (worst %.1f%%)", ok, 100.0 * worst)};
}

// 6. Energy never rises within a kernel stage.
Outcome icp_descent() {
  PointCloud target = voxel_downsample(make_ridged_ellipsoid(), 8000);
  target = estimate_normals(target, 20);
  orient_normals_consistent(target, 10);
  std::mt19937_64 rng(6006);
  std::normal_distribution<double> g(0.0, 0.33);
  int violations = 0, steps = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 dir = random_unit(rng);
    PointCloud src;
    for (std::size_t i = 0; i < target.size(); i += 2) {
      if (target.points[i].dot(dir) > 0.0) src.points.push_back(target.points[i] + Vec3(g(rng), g(rng), g(rng)));
    }
    std::uniform_real_distribution<double> angle(0.0, 10.0 * kDeg);
    RigidTransform motion = RigidTransform::from_rotation(axis_angle(random_unit(rng), angle(rng)));
    motion.translation = random_unit(rng) * 5.0;
    src = apply_transform(src, motion);
    IcpConfig cfg = trial % 2 == 0 ? IcpConfig{} : fast_icp_config();
    cfg.time_budget_ms = 0.0;
    const IcpResult r = trial % 2 == 0 ? icp_refine(src, target, RigidTransform::identity(), cfg)
                                       : icp_fast(src, target, RigidTransform::identity(), cfg);
    for (std::size_t i = 1; i < r.trace.size(); ++i) {
      if (r.trace[i].stage != r.trace[i - 1].stage) continue;
      ++steps;
      violations += r.trace[i].energy > r.trace[i - 1].energy;
    }
  }
  return {violations == 0, format("100 refinements, %d accepted steps, %d energy increases", steps, violations)};
}

// 7. Branch taken at every frame versus the case expression on recorded flags.
Outcome cascade_conformance() {
  const RigidTransform truth = RigidTransform::from_translation(Vec3(4, -2, 3));
  RigidTransform registration = truth;
  registration.translation += Vec3(1.5, 0.5, -1.0);

  // Frames 0-2 precede the registration result, 15-19 and 25-58 are occluded.
  const auto occluded = [](int k) { return (k >= 15 && k <= 19) || (k >= 25 && k <= 58); };
  const int registered_from = 3;

  TrackerState state = tracker_init_unregistered(tracking_object().model);
  std::mt19937_64 rng(7007);
  std::vector<bool> succeeded;
  std::map<InitBranch, int> seen;
  int mismatches = 0;
  for (int k = 0; k < 60; ++k) {
    if (k == registered_from) set_registration(state, registration, 120.0);
    const double ts = 33.0 * (k + 1);
    const Frame frame = occluded(k) ? Frame{PointCloud{}, ts} : tracking_frame(rng, truth, ts, 0.33, 20000);
    const TrackedPose p = track_frame(state, frame);

    InitBranch expected = InitBranch::None;
    bool any_recent = false;
    for (int j = std::max(0, k - static_cast<int>(state.config.history_depth)); j < k; ++j) {
      any_recent = any_recent || succeeded[j];
    }
    if (k > 0 && succeeded[k - 1]) expected = InitBranch::PreviousFrame;
    else if (any_recent) expected = InitBranch::LastSuccess;
    else if (k >= registered_from) expected = InitBranch::Registration;

    mismatches += p.branch != expected;
    ++seen[p.branch];
    succeeded.push_back(p.pose.has_value());
  }
  const bool all_branches = seen.size() == 4;
  return {mismatches == 0 && all_branches,
          format("60 frames, %d mismatches; branches previous/last/registration/none = %d/%d/%d/%d", mismatches,
                 seen[InitBranch::PreviousFrame], seen[InitBranch::LastSuccess], seen[InitBranch::Registration],
                 seen[InitBranch::None])};
}

struct SequenceRun {
  std::vector<double> step_translation_mm;
  std::vector<double> step_rotation_deg;
  std::vector<double> compute_ms;
  int lost = 0;
};

// 20 steps from truth[0], default tracker configuration (250 ms budget).
SequenceRun run_sequence(double step_mm, double step_deg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<RigidTransform> truth;
  std::vector<Frame> frames;
  for (int k = 0; k <= 20; ++k) {
    RigidTransform t = RigidTransform::from_rotation(axis_angle(Vec3::UnitY(), k * step_deg * kDeg));
    t.translation = Vec3(k * step_mm, 0.0, 0.0);
    truth.push_back(t);
    frames.push_back(tracking_frame(rng, t, 33.0 * (k + 1), 0.33, 50000));
  }
  TrackerState state = tracker_init(tracking_object().model, truth[0]);
  const ReplayReport report = replay_sequence(state, frames);
  SequenceRun run;
  for (std::size_t k = 0; k < report.poses.size(); ++k) {
    const TrackedPose& p = report.poses[k];
    run.compute_ms.push_back(p.compute_ms);
    run.lost += !p.pose;
    if (k == 0 || !p.pose || !report.poses[k - 1].pose) continue;
    const RigidTransform& prev = *report.poses[k - 1].pose;
    const Vec3 step = p.pose->translation - prev.translation;
    const Vec3 true_step = truth[k].translation - truth[k - 1].translation;
    run.step_translation_mm.push_back((step - true_step).norm());
    const Mat3 rel = p.pose->rotation * prev.rotation.transpose();
    const Mat3 true_rel = truth[k].rotation * truth[k - 1].rotation.transpose();
    run.step_rotation_deg.push_back(rotation_angle_between(rel, true_rel) / kDeg);
  }
  return run;
}

const SequenceRun& translation_run() {
  static const SequenceRun run = run_sequence(10.0, 0.0, 8008);
  return run;
}
const SequenceRun& rotation_run() {
  static const SequenceRun run = run_sequence(0.0, 15.0, 8009);
  return run;
}

// 8. Per-step accuracy on 10 mm and 15 degree sequences.
Outcome tracking_accuracy() {
  const SequenceRun& t = translation_run();
  const SequenceRun& r = rotation_run();
  const double t_med = lower_median(t.step_translation_mm);
  const double r_med = lower_median(r.step_rotation_deg);
  return {t_med <= 1.5 && r_med <= 2.0,
          format("10 mm steps: median error %.3f mm over %zu steps (%d lost); 15 deg steps: median %.3f deg over "
                 "%zu steps (%d lost)",
                 t_med, t.step_translation_mm.size(), t.lost, r_med, r.step_rotation_deg.size(), r.lost)};
}

// 9. Median track_frame wall time, 5k model against 50k-point scenes.
Outcome tracking_runtime() {
  std::vector<double> ms = translation_run().compute_ms;
  const auto& rot = rotation_run().compute_ms;
  ms.insert(ms.end(), rot.begin(), rot.end());
  const double med = lower_median(ms);
  return {med <= 250.0, format("model %zu points, median %.1f ms over %zu frames", tracking_object().model.size(), med,
                               ms.size())};
}

BenchmarkRecord record(const std::string& method, double rmse, double runtime) {
  BenchmarkRecord r;
  r.method = method;
  r.rmse_mm = rmse;
  r.runtime_ms = runtime;
  return r;
}

// 10. Score arithmetic on a fixed record set.
Outcome score_arithmetic() {
  // Medians: worst (4 mm, 200 ms), half (2 mm, 100 ms), perfect (0, 0).
  const std::vector<BenchmarkRecord> records{
      record("worst", 4.0, 200.0),   record("worst", 3.0, 250.0), record("worst", 5.0, 150.0),
      record("half", 2.0, 100.0),    record("half", 1.0, 100.0),  record("half", 2.5, 300.0),
      record("perfect", 0.0, 0.0),
  };
  const ScoreTable t07 = composite_score(records, 0.7);
  const ScoreTable t015 = composite_score(records, 0.15);
  std::vector<std::string> bad;
  const auto expect = [&](const ScoreTable& t, const char* m, double want) {
    const ScoreRow* row = t.find(m);
    if (!row || std::abs(row->score - want) > 1e-12) bad.push_back(format("%s@%.2f", m, t.lambda));
  };
  expect(t07, "worst", 0.0);
  expect(t07, "half", 50.0);     // 100 [1 - (0.7 * 0.5 + 0.3 * 0.5)]
  expect(t07, "perfect", 100.0);
  expect(t015, "worst", 0.0);
  expect(t015, "half", 50.0);
  expect(t015, "perfect", 100.0);
  // Only the runtime differs: S = 100 (1 - 0.7 * 1 - 0.3 * 0.25) = 22.5
  const ScoreTable t2 = composite_score({record("a", 2.0, 40.0), record("b", 2.0, 10.0)}, 0.7);
  expect(t2, "a", 0.0);
  expect(t2, "b", 22.5);
  std::string detail = "9 hand-computed scores";
  for (const auto& b : bad) detail += " mismatch:" + b;
  return {bad.empty(), detail};
}

// 11. Default grid: the pipeline wins for registration, fast ICP for tracking.
Outcome module_selection() {
  SuiteConfig cfg;
  cfg.methods = {"pipeline", "fast_icp"};
  const SuiteReport report = run_suite(cfg);
  double p07 = 0, f07 = 0, p015 = 0, f015 = 0;
  for (const ScoreTable& t : report.scores) {
    const ScoreRow* p = t.find("pipeline");
    const ScoreRow* f = t.find("fast_icp");
    if (!p || !f) continue;
    if (t.lambda == 0.7) p07 = p->score, f07 = f->score;
    if (t.lambda == 0.15) p015 = p->score, f015 = f->score;
  }
  return {p07 > f07 && f015 > p015,
          format("%zu records; lambda 0.7: pipeline %.2f vs fast_icp %.2f; lambda 0.15: pipeline %.2f vs fast_icp %.2f",
                 report.records.size(), p07, f07, p015, f015)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"Kabsch exactness", kabsch_exactness},
      {"1-D TLS oracle equivalence", tls_oracle},
      {"70% outlier breakdown", outlier_breakdown},
      {"coarse success rate", coarse_success},
      {"error-correction reduction", correction_reduction},
      {"ICP descent property", icp_descent},
      {"tracking cascade conformance", cascade_conformance},
      {"tracking accuracy", tracking_accuracy},
      {"tracking runtime", tracking_runtime},
      {"composite score arithmetic", score_arithmetic},
      {"module selection", module_selection},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(number)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2d %s  %s: %s [%.1f s]\n", number, o.pass ? "PASS" : "FAIL", criteria[i].first,
                o.detail.c_str(), s);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
