#include "regkit/icp/icp.hpp"

#include "regkit/core/error.hpp"
#include "regkit/core/geometry.hpp"
#include "regkit/core/neighbor_index.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Geometry>
#include <Eigen/QR>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>

namespace regkit {

namespace {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Clock = std::chrono::steady_clock;

constexpr double kRadPerDeg = 3.14159265358979323846 / 180.0;

struct Matches {
  std::vector<std::size_t> target;
  std::vector<double> residual;  // signed point-to-plane or point-to-point distance
  std::vector<char> valid;
  std::size_t in_range = 0;
  double energy = 0.0;
};

class Problem {
 public:
  Problem(const PointCloud& source, const PointCloud& target, const IcpConfig& config)
      : source_(source), target_(target), index_(target), config_(config) {}

  bool point_to_plane() const { return config_.mode == IcpMode::RobustPointToPlane; }

  // Residual for every source point under t, with its nearest target point.
  // `hint` (matches at a nearby pose) only speeds up the search.
  Matches match(const RigidTransform& t, double gate, double nu, const Matches* hint = nullptr) const {
    Matches m;
    const std::size_t n = source_.size();
    m.target.resize(n);
    m.residual.resize(n);
    m.valid.assign(n, 0);
    const double inv = 1.0 / (2.0 * nu * nu);
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 p = t.apply(source_.points[i]);
      if (!p.allFinite()) {
        throw Error(ErrorCode::NonFiniteEnergy, "icp: non-finite source point");
      }
      const Neighbor nb = hint ? index_.nearest(p, hint->target[i]) : index_.nearest(p);
      m.target[i] = nb.index;
      const Vec3& q = target_.points[nb.index];
      double r;
      bool ok = std::sqrt(nb.sq_distance) <= gate;
      if (point_to_plane()) {
        ok = ok && target_.has_normal(nb.index);
        r = ok ? (*target_.normals)[nb.index].dot(p - q) : 0.0;
      } else {
        r = std::sqrt(nb.sq_distance);
      }
      m.residual[i] = r;
      m.valid[i] = ok ? 1 : 0;
      if (ok) {
        ++m.in_range;
        m.energy += config_.robust_kernel ? 1.0 - std::exp(-r * r * inv) : r * r;
      } else {
        m.energy += config_.robust_kernel ? 1.0 : gate * gate;
      }
    }
    if (!std::isfinite(m.energy)) {
      throw Error(ErrorCode::NonFiniteEnergy, "icp: energy is not finite");
    }
    return m;
  }

  // Energy of existing matches under a new kernel width.
  void rescore(Matches& m, double gate, double nu) const {
    const double inv = 1.0 / (2.0 * nu * nu);
    m.energy = 0.0;
    for (std::size_t i = 0; i < m.residual.size(); ++i) {
      const double r = m.residual[i];
      if (m.valid[i]) {
        m.energy += config_.robust_kernel ? 1.0 - std::exp(-r * r * inv) : r * r;
      } else {
        m.energy += config_.robust_kernel ? 1.0 : gate * gate;
      }
    }
    if (!std::isfinite(m.energy)) {
      throw Error(ErrorCode::NonFiniteEnergy, "icp: energy is not finite");
    }
  }

  double weight(double r, double nu) const {
    return config_.robust_kernel ? std::exp(-r * r / (2.0 * nu * nu)) : 1.0;
  }

  // One linearised, weighted point-to-plane solve around t.
  RigidTransform plane_step(const RigidTransform& t, const Matches& m, double nu) const {
    Mat6 h = Mat6::Zero();
    Vec6 g = Vec6::Zero();
    for (std::size_t i = 0; i < source_.size(); ++i) {
      if (!m.valid[i]) continue;
      const Vec3 p = t.apply(source_.points[i]);
      const Vec3& n = (*target_.normals)[m.target[i]];
      Vec6 j;
      j << p.cross(n), n;
      const double w = weight(m.residual[i], nu);
      h.noalias() += w * j * j.transpose();
      g.noalias() += w * m.residual[i] * j;
    }
    const double damping = 1e-12 * std::max(h.trace(), 1e-300) / 6.0;
    const Vec6 x = -(h + damping * Mat6::Identity()).ldlt().solve(g);
    Mat3 a = Mat3::Identity();
    a(0, 1) = -x[2];
    a(0, 2) = x[1];
    a(1, 0) = x[2];
    a(1, 2) = -x[0];
    a(2, 0) = -x[1];
    a(2, 1) = x[0];
    RigidTransform out;
    out.rotation = project_to_rotation(a * t.rotation);
    out.translation = a * t.translation + x.tail<3>();
    return out;
  }

  // Weighted closed-form point-to-point fit to the current correspondences.
  RigidTransform point_step(const Matches& m, double nu) const {
    std::vector<Vec3> src, dst;
    std::vector<double> w;
    for (std::size_t i = 0; i < source_.size(); ++i) {
      if (!m.valid[i]) continue;
      src.push_back(source_.points[i]);
      dst.push_back(target_.points[m.target[i]]);
      w.push_back(weight(m.residual[i], nu));
    }
    return kabsch_align(src, dst, w);
  }

  std::size_t size() const { return source_.size(); }

 private:
  const PointCloud& source_;
  const PointCloud& target_;
  NeighborIndex index_;
  const IcpConfig& config_;
};

Vec6 encode(const RigidTransform& t) {
  Vec6 u;
  u << log_so3(t.rotation), t.translation;
  return u;
}

RigidTransform decode(const Vec6& u) {
  RigidTransform t;
  t.rotation = exp_so3(u.head<3>());
  t.translation = u.tail<3>();
  return t;
}

// Midpoint between two poses along the rotation geodesic.
RigidTransform halfway(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform out;
  out.rotation = exp_so3(0.5 * log_so3(b.rotation * a.rotation.transpose())) * a.rotation;
  out.rotation = project_to_rotation(out.rotation);
  out.translation = 0.5 * (a.translation + b.translation);
  return out;
}

bool small_step(const RigidTransform& a, const RigidTransform& b, const IcpConfig& c) {
  return rotation_angle_between(a.rotation, b.rotation) < c.rotation_threshold_deg * kRadPerDeg &&
         (a.translation - b.translation).norm() < c.translation_threshold;
}

double median_abs(const std::vector<double>& r) {
  std::vector<double> a(r.size());
  std::transform(r.begin(), r.end(), a.begin(), [](double v) { return std::fabs(v); });
  if (a.empty()) return 0.0;
  const auto mid = a.begin() + static_cast<std::ptrdiff_t>((a.size() - 1) / 2);
  std::nth_element(a.begin(), mid, a.end());
  return *mid;
}

void validate(const PointCloud& source, const PointCloud& target, const RigidTransform& init, const IcpConfig& c) {
  if (source.empty() || target.empty()) {
    throw Error(ErrorCode::EmptyCloud, "icp: empty cloud");
  }
  if (c.max_iterations < 1 || !(c.translation_threshold > 0.0) || !(c.rotation_threshold_deg > 0.0) ||
      !(c.noise_sigma > 0.0) || !(c.nu_anneal > 0.0 && c.nu_anneal < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "icp: invalid configuration");
  }
  if (!init.is_valid(1e-6)) {
    throw Error(ErrorCode::InvalidArgument, "icp: initial transform is not a rigid motion");
  }
  if (c.mode == IcpMode::RobustPointToPlane && !target.has_normals()) {
    throw Error(ErrorCode::InvalidArgument, "icp: point-to-plane mode needs target normals");
  }
}

IcpResult run(const PointCloud& source, const PointCloud& target, const RigidTransform& init, const IcpConfig& cfg) {
  validate(source, target, init, cfg);
  const auto start = Clock::now();
  const Problem problem(source, target, cfg);
  const bool accelerate = cfg.mode == IcpMode::FastPointToPoint && cfg.anderson_depth > 0;
  const double sigma = cfg.noise_sigma;
  const double gate = cfg.max_correspondence_distance > 0.0 ? cfg.max_correspondence_distance : 10.0 * sigma;

  IcpResult res;
  RigidTransform t = init;
  t.scale = 1.0;
  double nu = sigma;
  Matches m;
  bool matched = false;  // m holds the matches at t
  if (cfg.robust_kernel) {
    if (cfg.initial_nu > 0.0) {
      nu = std::max(cfg.initial_nu, sigma);
    } else {
      m = problem.match(t, gate, 1.0);
      matched = true;
      std::vector<double> r;
      for (std::size_t i = 0; i < m.residual.size(); ++i) {
        if (m.valid[i]) r.push_back(m.residual[i]);
      }
      nu = std::max(median_abs(r), sigma);
    }
  }

  bool converged = false;
  for (int stage = 0;; ++stage) {
    if (matched) {
      problem.rescore(m, gate, nu);
    } else {
      m = problem.match(t, gate, nu);
      matched = true;
    }
    if (m.in_range == 0) {
      if (stage == 0) {
        throw Error(ErrorCode::NoCorrespondencesInRange, "icp: no correspondences within the gate");
      }
      break;
    }
    res.trace.push_back({stage, nu, m.energy});

    std::deque<Vec6> dg, df;
    Vec6 prev_g = Vec6::Zero(), prev_f = Vec6::Zero();
    bool have_prev = false;
    bool stage_done = false;
    while (!stage_done) {
      if (res.iterations >= cfg.max_iterations) break;
      if (cfg.time_budget_ms > 0.0 &&
          std::chrono::duration<double, std::milli>(Clock::now() - start).count() > cfg.time_budget_ms) {
        res.budget_exceeded = true;
        break;
      }
      ++res.iterations;
      RigidTransform plain;
      try {
        plain = problem.point_to_plane() ? problem.plane_step(t, m, nu) : problem.point_step(m, nu);
      } catch (const Error&) {
        stage_done = true;  // too few usable correspondences for a fit
        break;
      }
      RigidTransform next = plain;
      Matches next_m;
      bool have_next = false;
      if (accelerate) {
        const Vec6 u = encode(t);
        const Vec6 g = encode(plain);
        const Vec6 f = g - u;
        if (have_prev) {
          dg.push_back(g - prev_g);
          df.push_back(f - prev_f);
          if (static_cast<int>(dg.size()) > cfg.anderson_depth) {
            dg.pop_front();
            df.pop_front();
          }
        }
        prev_g = g;
        prev_f = f;
        have_prev = true;
        if (!df.empty()) {
          Eigen::MatrixXd fm(6, static_cast<Eigen::Index>(df.size())), gm(6, static_cast<Eigen::Index>(dg.size()));
          for (std::size_t k = 0; k < df.size(); ++k) {
            fm.col(static_cast<Eigen::Index>(k)) = df[k];
            gm.col(static_cast<Eigen::Index>(k)) = dg[k];
          }
          const Eigen::VectorXd theta = fm.completeOrthogonalDecomposition().solve(f);
          const Vec6 ua = g - gm * theta;
          if (ua.allFinite() && ua.head<3>().norm() < 3.14159) {
            const RigidTransform acc = decode(ua);
            Matches acc_m = problem.match(acc, gate, nu, &m);
            if (acc_m.energy <= m.energy) {
              next = acc;
              next_m = std::move(acc_m);
              have_next = true;
              ++res.anderson_accepted;
            }
          }
          if (!have_next) {
            ++res.anderson_rejected;
            dg.clear();
            df.clear();
            have_prev = false;
          }
        }
      }
      if (!have_next) {
        next_m = problem.match(next, gate, nu, &m);
        if (cfg.robust_kernel) {
          // Backtrack towards the current pose until the energy does not rise.
          for (int h = 0; h < 6 && next_m.energy > m.energy; ++h) {
            next = halfway(t, next);
            next_m = problem.match(next, gate, nu, &m);
          }
          if (next_m.energy > m.energy) {
            stage_done = true;
            break;
          }
        }
      }
      const bool stalled = cfg.stage_energy_tolerance > 0.0 &&
                           m.energy - next_m.energy <= cfg.stage_energy_tolerance * m.energy;
      const bool tiny = small_step(t, next, cfg) || stalled;
      t = next;
      m = std::move(next_m);
      res.trace.push_back({stage, nu, m.energy});
      if (tiny) stage_done = true;
    }
    if (!stage_done) break;  // iteration cap or budget
    if (!cfg.robust_kernel || nu <= sigma * (1.0 + 1e-12)) {
      converged = true;
      break;
    }
    nu = std::max(nu * cfg.nu_anneal, sigma);
  }

  res.transform = t;
  res.converged = converged;
  res.energy = m.energy;
  const double inlier_bound = cfg.inlier_threshold > 0.0 ? cfg.inlier_threshold : 10.0 * sigma;
  double sum = 0.0;
  std::size_t inliers = 0;
  for (std::size_t i = 0; i < problem.size(); ++i) {
    if (!m.valid[i] || std::fabs(m.residual[i]) > inlier_bound) continue;
    sum += m.residual[i] * m.residual[i];
    ++inliers;
  }
  res.inlier_fraction = static_cast<double>(inliers) / static_cast<double>(problem.size());
  res.inlier_rmse = inliers ? std::sqrt(sum / static_cast<double>(inliers)) : 0.0;
  res.success = res.converged && res.inlier_fraction >= cfg.success_inlier_fraction &&
                res.inlier_rmse <= cfg.success_rmse_sigmas * sigma;
  return res;
}

}  // namespace

IcpConfig fast_icp_config() {
  IcpConfig c;
  c.mode = IcpMode::FastPointToPoint;
  c.max_iterations = 60;
  c.translation_threshold = 1e-2;
  c.rotation_threshold_deg = 1e-2;
  c.stage_energy_tolerance = 1e-3;
  c.time_budget_ms = 250.0;
  c.max_correspondence_distance = 20.0;
  return c;
}

nlohmann::json icp_result_to_json(const IcpResult& r) {
  const Mat3& rot = r.transform.rotation;
  std::vector<double> rm;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) rm.push_back(rot(i, j));
  }
  return {{"rotation_row_major_9", rm},
          {"translation_mm_3", {r.transform.translation.x(), r.transform.translation.y(), r.transform.translation.z()}},
          {"iterations", r.iterations},
          {"energy", r.energy},
          {"inlier_rmse_mm", r.inlier_rmse},
          {"inlier_fraction", r.inlier_fraction},
          {"converged", r.converged},
          {"budget_exceeded", r.budget_exceeded},
          {"success", r.success}};
}

PointCloud crop_aabb(const PointCloud& scene, const PointCloud& model, const RigidTransform& pose, double margin) {
  if (!(margin >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "crop_aabb: margin must be non-negative");
  }
  if (model.empty()) {
    throw Error(ErrorCode::EmptyCloud, "crop_aabb: empty model");
  }
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const Vec3& p : model.points) {
    const Vec3 q = pose.apply(p);
    lo = lo.cwiseMin(q);
    hi = hi.cwiseMax(q);
  }
  lo.array() -= margin;
  hi.array() += margin;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const Vec3& p = scene.points[i];
    if ((p.array() >= lo.array()).all() && (p.array() <= hi.array()).all()) keep.push_back(i);
  }
  if (keep.empty()) {
    throw Error(ErrorCode::EmptyCrop, "crop_aabb: no scene points inside the box");
  }
  return scene.select(keep);
}

IcpResult icp_refine(const PointCloud& source, const PointCloud& target, const RigidTransform& init,
                     const IcpConfig& config) {
  IcpConfig c = config;
  c.mode = IcpMode::RobustPointToPlane;
  return run(source, target, init, c);
}

IcpResult icp_fast(const PointCloud& source, const PointCloud& target, const RigidTransform& init,
                   const IcpConfig& config) {
  IcpConfig c = config;
  c.mode = IcpMode::FastPointToPoint;
  return run(source, target, init, c);
}

}  // namespace regkit
