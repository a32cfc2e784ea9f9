#include "regkit/benchmark/benchmark.hpp"
#include "regkit/core/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace regkit {

double case_rmse(const TestCase& tc, const RigidTransform& estimate) {
  if (tc.clean_support.empty()) {
    throw Error(ErrorCode::EmptyCloud, "case_rmse: test case has no support points");
  }
  // The noise-free source point of support point x is motion(x), with motion
  // the inverse of the ground truth.
  const RigidTransform motion = tc.ground_truth.inverse();
  double sum = 0.0;
  for (const Vec3& x : tc.clean_support) {
    sum += (estimate.apply(motion.apply(x)) - x).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(tc.clean_support.size()));
}

std::vector<BenchmarkRecord> evaluate_method(const RegistrationMethod& method, const std::vector<TestCase>& cases,
                                             double success_threshold_mm) {
  std::vector<BenchmarkRecord> out;
  out.reserve(cases.size());
  for (const TestCase& tc : cases) {
    BenchmarkRecord rec;
    rec.method = method.name;
    rec.params = tc.params;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const RigidTransform est = method.fn(tc.source, tc.target);
      rec.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      rec.rmse_mm = case_rmse(tc, est);
      rec.success = rec.rmse_mm < success_threshold_mm;
    } catch (const std::exception& e) {
      rec.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      rec.rmse_mm = case_rmse(tc, RigidTransform::identity());
      rec.success = false;
      rec.error = e.what();
    }
    rec.runtime_ms = std::max(rec.runtime_ms, 1e-6);
    out.push_back(std::move(rec));
  }
  return out;
}

const ScoreRow* ScoreTable::find(const std::string& method) const {
  for (const auto& r : rows) {
    if (r.method == method) return &r;
  }
  return nullptr;
}

double lower_median(std::vector<double> values) {
  if (values.empty()) {
    throw Error(ErrorCode::InvalidArgument, "lower_median: no values");
  }
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

ScoreTable composite_score(const std::vector<BenchmarkRecord>& records, double lambda) {
  if (records.empty()) {
    throw Error(ErrorCode::InvalidArgument, "composite_score: no records");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "composite_score: lambda must lie in [0, 1]");
  }
  std::vector<std::string> names;
  for (const auto& r : records) {
    if (std::find(names.begin(), names.end(), r.method) == names.end()) names.push_back(r.method);
  }
  ScoreTable table;
  table.lambda = lambda;
  for (const auto& name : names) {
    std::vector<double> e, t;
    for (const auto& r : records) {
      if (r.method != name) continue;
      e.push_back(r.rmse_mm);
      t.push_back(r.runtime_ms);
    }
    ScoreRow row{name, lower_median(e), lower_median(t), 0.0};
    if (!std::isfinite(row.median_rmse) || !std::isfinite(row.median_runtime)) {
      throw Error(ErrorCode::InvalidArgument, "composite_score: non-finite median for " + name);
    }
    table.e_max = std::max(table.e_max, row.median_rmse);
    table.t_max = std::max(table.t_max, row.median_runtime);
    table.rows.push_back(row);
  }
  for (auto& row : table.rows) {
    const double e = table.e_max > 0.0 ? row.median_rmse / table.e_max : 0.0;
    const double t = table.t_max > 0.0 ? row.median_runtime / table.t_max : 0.0;
    row.score = 100.0 * (1.0 - (lambda * e + (1.0 - lambda) * t));
  }
  table.single_method = table.rows.size() == 1;
  return table;
}

nlohmann::json score_table_to_json(const ScoreTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : table.rows) {
    rows.push_back({{"method", r.method},
                    {"median_rmse_mm", r.median_rmse},
                    {"median_runtime_ms", r.median_runtime},
                    {"score", r.score}});
  }
  return {{"lambda", table.lambda},
          {"e_max", table.e_max},
          {"t_max", table.t_max},
          {"single_method", table.single_method},
          {"methods", rows}};
}

}  // namespace regkit
