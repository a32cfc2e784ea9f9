#pragma once

#include "regkit/core/point_cloud.hpp"
#include "regkit/core/rigid_transform.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace regkit {

// Procedural stand-ins for anatomical meshes, dense (about 30k points) and
// rescaled to a 200 mm bounding-box diagonal centred at the origin.
PointCloud make_ridged_ellipsoid(std::size_t samples = 30000);
PointCloud make_helical_tube(std::size_t samples = 30000);
PointCloud make_bumpy_torus(std::size_t samples = 30000);
/// Looks up one of "ridged_ellipsoid", "helical_tube", "bumpy_torus".
PointCloud make_surrogate(const std::string& name);

/// Uniform rescale about the bounding-box centre so the diagonal is `diagonal`
/// mm, then recentred at the origin.
PointCloud normalize_diagonal(const PointCloud& cloud, double diagonal = 200.0);

struct CaseParams {
  double overlap_ratio = 1.0;
  double rotation_deg = 0.0;
  double noise_sigma = 0.0;
  double partial_fraction = 1.0;
  std::uint64_t seed = 0;
  std::string mesh_id;
};

struct TestCase {
  PointCloud source;
  PointCloud target;
  RigidTransform ground_truth;   // maps source back onto the target frame
  CaseParams params;
  double measured_overlap = 0.0; // shared-support fraction of the crop, before partial selection
  std::vector<Vec3> clean_support;  // noise-free source points in the target frame, index-aligned with source
};

/// Target = mesh downsampled to 8k points. Source = half-space crop of the
/// target whose offset is bisected until the overlap is within +-0.02 of the
/// request (crop first, then partial selection), with Gaussian noise, a
/// rotation of exactly rotation_deg about a random axis and a translation in
/// +-50 mm. Overlap counts target points within max(3 sigma, 1e-9) mm of a
/// crop point. Throws OverlapUnachievable, InvalidArgument.
TestCase generate_test_case(const PointCloud& mesh, double overlap, double rotation_deg, double noise_sigma,
                            double partial_fraction, std::uint64_t seed, const std::string& mesh_id = "mesh");

/// Fraction of `target` points within `radius` of some point of `support`.
double shared_support_fraction(const PointCloud& target, const std::vector<Vec3>& support, double radius);

/// Plugin contract: estimate the transform mapping source onto target.
using RegistrationFn = std::function<RigidTransform(const PointCloud& source, const PointCloud& target)>;

struct RegistrationMethod {
  std::string name;
  RegistrationFn fn;
};

struct BenchmarkRecord {
  std::string method;
  CaseParams params;
  double rmse_mm = 0.0;
  double runtime_ms = 0.0;
  bool success = false;
  std::string error;  // set when the method threw; rmse is then the do-nothing error
};

/// RMSE of T applied to the noise-free source versus the true target-frame
/// positions (index-matched over the clean support).
double case_rmse(const TestCase& test_case, const RigidTransform& estimate);

std::vector<BenchmarkRecord> evaluate_method(const RegistrationMethod& method, const std::vector<TestCase>& cases,
                                             double success_threshold_mm = 5.0);

struct ScoreRow {
  std::string method;
  double median_rmse = 0.0;
  double median_runtime = 0.0;
  double score = 0.0;
};

struct ScoreTable {
  double lambda = 0.7;
  double e_max = 0.0;
  double t_max = 0.0;
  std::vector<ScoreRow> rows;  // in order of first appearance
  bool single_method = false;  // the only method is its own maximum, so scores 0

  const ScoreRow* find(const std::string& method) const;
};

/// Lower median (element (n-1)/2 of the sorted values).
double lower_median(std::vector<double> values);

/// S = 100 [1 - (lambda E/E_max + (1 - lambda) T/T_max)] over per-method
/// medians; a zero maximum drops its term.
ScoreTable composite_score(const std::vector<BenchmarkRecord>& records, double lambda);

nlohmann::json score_table_to_json(const ScoreTable& table);

struct SuiteConfig {
  // id, source ("builtin" or a file path); a [meshes] section replaces the defaults
  std::vector<std::pair<std::string, std::string>> meshes{{"ridged_ellipsoid", "builtin"},
                                                          {"bumpy_torus", "builtin"}};
  std::vector<double> overlaps{0.2, 0.6};
  std::vector<double> rotations{0, 20, 40, 60, 80, 100};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  double noise_sigma = 0.33;
  double partial_fraction = 0.5;
  std::vector<std::string> methods;
  std::vector<double> lambdas{0.7, 0.15};
  double success_threshold_mm = 5.0;
};

/// INI-style text: [meshes] `id = builtin|path`, [grid] overlaps/rotations/
/// seeds/noise_sigma/partial, [methods] one name per line, [scoring]
/// lambdas/success_threshold_mm. `#` starts a comment. Relative mesh paths
/// resolve against the config file's directory. Throws ConfigError naming
/// the offending line.
SuiteConfig parse_suite_config(std::istream& in);
SuiteConfig load_suite_config(const std::filesystem::path& path);

/// Built-in methods: "pipeline" (coarse + robust point-to-plane refinement),
/// "fast_icp" (accelerated point-to-point from the identity), "identity".
RegistrationMethod builtin_method(const std::string& name);

struct SuiteReport {
  std::vector<BenchmarkRecord> records;
  std::vector<ScoreTable> scores;  // one per lambda
};

/// Runs every method on every grid case, in config order.
SuiteReport run_suite(const SuiteConfig& config);

/// Writes records.csv, scores_lambda_<l>.csv per lambda and summary.json.
void write_suite_report(const SuiteReport& report, const std::filesystem::path& out_dir);

}  // namespace regkit
