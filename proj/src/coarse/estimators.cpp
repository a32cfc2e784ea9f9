#include "regkit/coarse/coarse.hpp"
#include "regkit/coarse/tls.hpp"
#include "regkit/core/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace regkit {

namespace {

constexpr double kMinEdgeLength = 1e-6;  // mm

// Weighted sample of k indices without replacement (exponential keys).
std::vector<std::size_t> weighted_subsample(std::span<const double> weights, std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::pair<double, std::size_t>> keys(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    double u = unit(rng);
    while (u <= 0.0) u = unit(rng);
    keys[i] = {weights[i] > 0.0 ? std::log(u) / weights[i] : -std::numeric_limits<double>::infinity(), i};
  }
  std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(k), keys.end(),
                    [](const auto& l, const auto& r) { return l.first > r.first || (l.first == r.first && l.second < r.second); });
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = keys[i].second;
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TimSet TimSet::subset(std::span<const std::size_t> entries) const {
  TimSet out;
  out.vertex_count = vertex_count;
  for (std::size_t e : entries) {
    out.edges.push_back(edges.at(e));
    out.delta_p.push_back(delta_p[e]);
    out.delta_q.push_back(delta_q[e]);
    out.weights.push_back(weights[e]);
    out.scale_bounds.push_back(scale_bounds[e]);
    out.rotation_bounds.push_back(rotation_bounds[e]);
  }
  return out;
}

TimSet build_tims(const CorrespondenceSet& corr, const PointCloud& source, const PointCloud& target,
                  const CoarseConfig& config, std::vector<std::size_t>* kept) {
  if (corr.size() < 3) {
    throw Error(ErrorCode::TooFewCorrespondences, "build_tims: need at least 3 correspondences");
  }
  if (corr.weights.size() != corr.size()) {
    throw Error(ErrorCode::InvalidArgument, "build_tims: weight count does not match pair count");
  }
  if (!(config.noise_bound > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "build_tims: noise_bound must be positive");
  }
  for (const auto& p : corr.pairs) {
    if (p.source >= source.size() || p.target >= target.size()) {
      throw Error(ErrorCode::InvalidArgument, "build_tims: correspondence index out of range");
    }
  }
  std::vector<std::size_t> use(corr.size());
  std::iota(use.begin(), use.end(), 0);
  if (config.max_complete_graph >= 3 && corr.size() > config.max_complete_graph) {
    use = weighted_subsample(corr.weights, config.max_complete_graph, config.seed);
  }
  const double bound = 2.0 * config.noise_bound;
  TimSet t;
  t.vertex_count = use.size();
  for (std::size_t a = 0; a < use.size(); ++a) {
    for (std::size_t b = a + 1; b < use.size(); ++b) {
      const auto& ci = corr.pairs[use[a]];
      const auto& ck = corr.pairs[use[b]];
      const Vec3 dp = source.points[ck.source] - source.points[ci.source];
      const double len = dp.norm();
      if (len < kMinEdgeLength) continue;
      t.edges.emplace_back(a, b);
      t.delta_p.push_back(dp);
      t.delta_q.push_back(target.points[ck.target] - target.points[ci.target]);
      t.weights.push_back(std::min(corr.weights[use[a]], corr.weights[use[b]]));
      t.rotation_bounds.push_back(bound);
      t.scale_bounds.push_back(bound / len);
    }
  }
  if (kept) *kept = std::move(use);
  return t;
}

ScaleEstimate estimate_scale_tls(const TimSet& tims, const CoarseConfig& config) {
  ScaleEstimate out;
  if (config.known_scale) {
    out.value = *config.known_scale;
    return out;
  }
  if (tims.empty()) {
    throw Error(ErrorCode::TooFewCorrespondences, "estimate_scale_tls: no measurements");
  }
  std::vector<double> kappa(tims.size());
  for (std::size_t e = 0; e < tims.size(); ++e) {
    kappa[e] = tims.delta_q[e].norm() / tims.delta_p[e].norm();
  }
  const auto r = solve_tls_1d(kappa, tims.scale_bounds, tims.weights, config.c2);
  if (r.intervals_disjoint) {
    out.value = weighted_median(kappa, tims.weights);
    out.no_consensus = true;
    return out;
  }
  out.value = r.estimate;
  out.inliers = r.consensus;
  return out;
}

TranslationEstimate estimate_translation_tls(const CorrespondenceSet& corr, const PointCloud& source,
                                             const PointCloud& target, double kappa, const Mat3& rotation,
                                             const CoarseConfig& config) {
  if (corr.empty()) {
    throw Error(ErrorCode::TooFewCorrespondences, "estimate_translation_tls: no correspondences");
  }
  if (!(config.noise_bound > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "estimate_translation_tls: noise_bound must be positive");
  }
  const std::size_t n = corr.size();
  std::array<std::vector<double>, 3> residual;
  for (auto& r : residual) r.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 r = target.points.at(corr.pairs[i].target) - kappa * (rotation * source.points.at(corr.pairs[i].source));
    for (int l = 0; l < 3; ++l) residual[l][i] = r[l];
  }
  std::vector<double> weights(corr.weights.begin(), corr.weights.end());
  if (weights.size() != n) weights.assign(n, 1.0);
  const std::vector<double> bounds(n, config.noise_bound);

  TranslationEstimate out;
  std::vector<int> votes(n, 0);
  for (int l = 0; l < 3; ++l) {
    const auto r = solve_tls_1d(residual[l], bounds, weights, config.c2);
    if (r.intervals_disjoint) {
      out.value[l] = weighted_median(residual[l], weights);
      out.no_consensus[l] = true;
      const double c = std::sqrt(config.c2) * config.noise_bound;
      for (std::size_t i = 0; i < n; ++i) votes[i] += std::fabs(residual[l][i] - out.value[l]) <= c;
    } else {
      out.value[l] = r.estimate;
      for (std::size_t i : r.consensus) ++votes[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (votes[i] == 3) out.inliers.push_back(i);
  }
  return out;
}

}  // namespace regkit
