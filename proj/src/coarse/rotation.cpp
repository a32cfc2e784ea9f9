#include "regkit/coarse/coarse.hpp"
#include "regkit/core/error.hpp"
#include "regkit/core/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace regkit {

namespace {

struct Residuals {
  std::vector<double> sq;  // normalised squared residuals
  double truncated = 0.0;  // sum w min(r^2, c2)
};

Residuals evaluate(const Mat3& r, std::span<const Vec3> src, std::span<const Vec3> dst,
                   std::span<const double> bounds, std::span<const double> w, double c2) {
  Residuals out;
  out.sq.resize(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    out.sq[i] = (dst[i] - r * src[i]).squaredNorm() / (bounds[i] * bounds[i]);
    out.truncated += w[i] * std::min(out.sq[i], c2);
  }
  return out;
}

}  // namespace

RotationEstimate estimate_rotation_gnc(const TimSet& tims, double kappa, const CoarseConfig& config) {
  if (tims.size() < 3) {
    throw Error(ErrorCode::TooFewCorrespondences, "estimate_rotation_gnc: need at least 3 measurements");
  }
  if (!(kappa > 0.0) || !(config.c2 > 0.0) || !(config.gnc_factor > 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "estimate_rotation_gnc: kappa, c2 positive and gnc_factor > 1");
  }
  const double c2 = config.c2;
  const std::size_t n = tims.size();
  std::vector<Vec3> src(n);
  for (std::size_t i = 0; i < n; ++i) src[i] = kappa * tims.delta_p[i];
  const auto& dst = tims.delta_q;
  const auto& bounds = tims.rotation_bounds;
  const auto& ew = tims.weights;

  RotationEstimate out;
  std::vector<double> gw(n, 1.0);
  std::vector<double> combined(ew);
  Mat3 rot = weighted_rotation(src, dst, combined);
  Residuals res = evaluate(rot, src, dst, bounds, ew, c2);

  Mat3 best_rot = rot;
  double best_obj = res.truncated;
  std::vector<double> best_w = gw;
  out.iterations = 1;

  const double max_sq = *std::max_element(res.sq.begin(), res.sq.end());
  if (max_sq > c2) {
    // mu is the inverse of the convexity parameter: small mu = nearly convex
    // surrogate, mu -> infinity recovers the truncated cost.
    double mu = 1.0 / (2.0 * max_sq / c2 - 1.0);
    double prev_cost = std::numeric_limits<double>::infinity();
    double prev_obj = res.truncated;
    int stalls = 0;
    for (int it = 0; it < config.gnc_max_iterations; ++it) {
      const double th_hi = (mu + 1.0) / mu * c2;
      const double th_lo = mu / (mu + 1.0) * c2;
      for (std::size_t i = 0; i < n; ++i) {
        const double r2 = res.sq[i];
        if (r2 >= th_hi) {
          gw[i] = 0.0;
        } else if (r2 <= th_lo) {
          gw[i] = 1.0;
        } else {
          gw[i] = std::sqrt(c2 * mu * (mu + 1.0) / r2) - mu;
        }
        combined[i] = ew[i] * gw[i];
      }
      rot = weighted_rotation(src, dst, combined);
      res = evaluate(rot, src, dst, bounds, ew, c2);
      ++out.iterations;

      double cost = 0.0;
      for (std::size_t i = 0; i < n; ++i) cost += combined[i] * res.sq[i];
      if (res.truncated < best_obj) {
        best_obj = res.truncated;
        best_rot = rot;
        best_w = gw;
      }
      stalls = res.truncated >= prev_obj ? stalls + 1 : 0;
      prev_obj = res.truncated;
      if (stalls >= 5) {
        out.diverged = true;
        break;
      }
      const bool binary = std::all_of(gw.begin(), gw.end(), [](double w) { return w == 0.0 || w == 1.0; });
      if (binary || std::fabs(cost - prev_cost) <= config.gnc_cost_threshold * std::max(1.0, std::fabs(cost))) {
        break;
      }
      prev_cost = cost;
      mu *= config.gnc_factor;
    }
  } else {
    best_obj = res.truncated;
  }

  // Refit on the final inliers; keep whichever of the two scores better.
  std::vector<double> polish(n, 0.0);
  std::size_t count = 0;
  const Residuals at_best = evaluate(best_rot, src, dst, bounds, ew, c2);
  for (std::size_t i = 0; i < n; ++i) {
    if (at_best.sq[i] <= c2) {
      polish[i] = ew[i];
      ++count;
    }
  }
  if (count >= 3 && max_sq > c2) {
    const Mat3 refit = weighted_rotation(src, dst, polish);
    const Residuals r2 = evaluate(refit, src, dst, bounds, ew, c2);
    if (r2.truncated <= best_obj) {
      best_rot = refit;
      best_obj = r2.truncated;
    }
  }
  out.rotation = best_rot;
  out.objective = best_obj;
  out.gnc_weights = best_w;
  const Residuals fin = evaluate(best_rot, src, dst, bounds, ew, c2);
  for (std::size_t i = 0; i < n; ++i) {
    if (fin.sq[i] <= c2) out.inliers.push_back(i);
  }
  return out;
}

}  // namespace regkit
