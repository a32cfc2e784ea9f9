#include "regkit/benchmark/benchmark.hpp"
#include "regkit/core/error.hpp"
#include "regkit/core/io.hpp"
#include "regkit/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace regkit {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void config_error(int line, const std::string& what) {
  throw Error(ErrorCode::ConfigError, "line " + std::to_string(line) + ": " + what);
}

double parse_number(const std::string& text, int line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    config_error(line, "not a number: '" + text + "'");
  }
  if (used != text.size() || !std::isfinite(v)) config_error(line, "not a number: '" + text + "'");
  return v;
}

std::vector<double> parse_list(const std::string& text, int line) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number(trim(item), line));
  if (out.empty()) config_error(line, "empty list");
  return out;
}

bool is_builtin_method(const std::string& name) {
  return name == "pipeline" || name == "fast_icp" || name == "identity";
}

bool is_surrogate(const std::string& name) {
  return name == "ridged_ellipsoid" || name == "helical_tube" || name == "bumpy_torus";
}

// Fixed-precision text so reruns compare byte for byte.
std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

SuiteConfig parse_suite_config(std::istream& in) {
  SuiteConfig cfg;
  std::string section;
  std::string raw;
  int line = 0;
  bool methods_seen = false;
  while (std::getline(in, raw)) {
    ++line;
    const std::string text = trim(raw.substr(0, raw.find('#')));
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']') config_error(line, "unterminated section header");
      section = trim(std::string_view(text).substr(1, text.size() - 2));
      if (section != "meshes" && section != "grid" && section != "methods" && section != "scoring") {
        config_error(line, "unknown section [" + section + "]");
      }
      if (section == "meshes") cfg.meshes.clear();
      if (section == "methods") methods_seen = true;
      continue;
    }
    if (section.empty()) config_error(line, "entry outside a section");
    if (section == "methods") {
      if (!is_builtin_method(text)) config_error(line, "unknown method '" + text + "'");
      cfg.methods.push_back(text);
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) config_error(line, "expected key = value");
    const std::string key = trim(std::string_view(text).substr(0, eq));
    const std::string value = trim(std::string_view(text).substr(eq + 1));
    if (key.empty() || value.empty()) config_error(line, "expected key = value");
    if (section == "meshes") {
      if (value == "builtin" && !is_surrogate(key)) config_error(line, "no built-in mesh named '" + key + "'");
      cfg.meshes.emplace_back(key, value);
    } else if (section == "grid") {
      if (key == "overlaps") {
        cfg.overlaps = parse_list(value, line);
        for (double o : cfg.overlaps) {
          if (!(o > 0.0 && o <= 1.0)) config_error(line, "overlap outside (0, 1]");
        }
      } else if (key == "rotations") {
        cfg.rotations = parse_list(value, line);
        for (double r : cfg.rotations) {
          if (r < 0.0) config_error(line, "negative rotation");
        }
      } else if (key == "seeds") {
        cfg.seeds.clear();
        for (double s : parse_list(value, line)) {
          if (s < 0.0 || s != std::floor(s)) config_error(line, "seeds must be non-negative integers");
          cfg.seeds.push_back(static_cast<std::uint64_t>(s));
        }
      } else if (key == "noise_sigma") {
        cfg.noise_sigma = parse_number(value, line);
        if (cfg.noise_sigma < 0.0) config_error(line, "negative noise_sigma");
      } else if (key == "partial") {
        cfg.partial_fraction = parse_number(value, line);
        if (!(cfg.partial_fraction > 0.0 && cfg.partial_fraction <= 1.0)) config_error(line, "partial outside (0, 1]");
      } else {
        config_error(line, "unknown grid key '" + key + "'");
      }
    } else if (key == "lambdas") {
      cfg.lambdas = parse_list(value, line);
      for (double l : cfg.lambdas) {
        if (l < 0.0 || l > 1.0) config_error(line, "lambda outside [0, 1]");
      }
    } else if (key == "success_threshold_mm") {
      cfg.success_threshold_mm = parse_number(value, line);
      if (!(cfg.success_threshold_mm > 0.0)) config_error(line, "success_threshold_mm must be positive");
    } else {
      config_error(line, "unknown scoring key '" + key + "'");
    }
  }
  if (!methods_seen || cfg.methods.empty()) config_error(line, "no methods listed");
  if (cfg.meshes.empty()) config_error(line, "no meshes listed");
  return cfg;
}

SuiteConfig load_suite_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  SuiteConfig cfg = parse_suite_config(in);
  for (auto& [id, source] : cfg.meshes) {
    const std::filesystem::path p(source);
    if (source != "builtin" && p.is_relative()) source = (path.parent_path() / p).string();
  }
  return cfg;
}

RegistrationMethod builtin_method(const std::string& name) {
  if (name == "pipeline") {
    return {name, [](const PointCloud& s, const PointCloud& t) { return register_pipeline(s, t).transform; }};
  }
  if (name == "fast_icp") {
    return {name, [](const PointCloud& s, const PointCloud& t) {
              IcpConfig c = fast_icp_config();
              c.time_budget_ms = 0.0;  // a wall-clock cut-off would make records machine-dependent
              return icp_fast(s, t, RigidTransform::identity(), c).transform;
            }};
  }
  if (name == "identity") {
    return {name, [](const PointCloud&, const PointCloud&) { return RigidTransform::identity(); }};
  }
  throw Error(ErrorCode::ConfigError, "unknown method '" + name + "'");
}

SuiteReport run_suite(const SuiteConfig& config) {
  if (config.methods.empty()) throw Error(ErrorCode::ConfigError, "no methods listed");
  std::vector<TestCase> cases;
  for (const auto& [id, source] : config.meshes) {
    const PointCloud mesh = source == "builtin" ? make_surrogate(id) : normalize_diagonal(load_point_cloud(source));
    for (double overlap : config.overlaps) {
      for (double rot : config.rotations) {
        for (std::uint64_t seed : config.seeds) {
          cases.push_back(generate_test_case(mesh, overlap, rot, config.noise_sigma, config.partial_fraction, seed, id));
        }
      }
    }
  }
  SuiteReport report;
  for (const std::string& name : config.methods) {
    auto recs = evaluate_method(builtin_method(name), cases, config.success_threshold_mm);
    report.records.insert(report.records.end(), recs.begin(), recs.end());
  }
  for (double lambda : config.lambdas) report.scores.push_back(composite_score(report.records, lambda));
  return report;
}

void write_suite_report(const SuiteReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const auto open = [](const std::filesystem::path& p) {
    std::ofstream f(p);
    if (!f) throw Error(ErrorCode::IoError, "cannot write " + p.string());
    return f;
  };
  {
    std::ofstream f = open(out_dir / "records.csv");
    f << "method,mesh_id,overlap,rotation_deg,sigma,partial,seed,rmse_mm,runtime_ms,success\n";
    for (const auto& r : report.records) {
      f << r.method << ',' << r.params.mesh_id << ',' << num(r.params.overlap_ratio) << ','
        << num(r.params.rotation_deg) << ',' << num(r.params.noise_sigma) << ',' << num(r.params.partial_fraction)
        << ',' << r.params.seed << ',' << num(r.rmse_mm) << ',' << num(r.runtime_ms) << ','
        << (r.success ? 1 : 0) << '\n';
    }
  }
  nlohmann::json summary;
  summary["record_count"] = report.records.size();
  summary["scores"] = nlohmann::json::array();
  for (const ScoreTable& table : report.scores) {
    std::ofstream f = open(out_dir / ("scores_lambda_" + num(table.lambda) + ".csv"));
    f << "method,median_rmse_mm,median_runtime_ms,score\n";
    for (const auto& row : table.rows) {
      f << row.method << ',' << num(row.median_rmse) << ',' << num(row.median_runtime) << ',' << num(row.score) << '\n';
    }
    summary["scores"].push_back(score_table_to_json(table));
  }
  std::ofstream f = open(out_dir / "summary.json");
  f << summary.dump(2) << '\n';
}

}  // namespace regkit
