#include "regkit/core/error.hpp"
#include "regkit/core/neighbor_index.hpp"
#include "regkit/features/features.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

namespace regkit {

namespace {

using Spfh = std::array<double, kFpfhSize>;

std::size_t bin_of(double value, double lo, double hi) {
  const double t = (value - lo) / (hi - lo);
  const auto b = static_cast<long>(std::floor(static_cast<double>(kFpfhBins) * t));
  return static_cast<std::size_t>(std::clamp<long>(b, 0, static_cast<long>(kFpfhBins) - 1));
}

}  // namespace

std::size_t DescriptorSet::isolated_count() const {
  return static_cast<std::size_t>(std::count(isolated.begin(), isolated.end(), true));
}

bool fpfh_pair_features(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2,
                        std::array<double, 4>& f) {
  f = {0.0, 0.0, 0.0, 0.0};
  Vec3 dp = p2 - p1;
  const double dist = dp.norm();
  if (dist == 0.0) {
    return false;
  }
  const double a1 = n1.dot(dp) / dist;
  const double a2 = n2.dot(dp) / dist;
  // The source of the Darboux frame is the point whose normal makes the
  // smaller angle with the connecting line; this keeps the features symmetric.
  Vec3 u = n1;
  Vec3 other = n2;
  double phi = a1;
  if (std::acos(std::min(1.0, std::fabs(a1))) > std::acos(std::min(1.0, std::fabs(a2)))) {
    u = n2;
    other = n1;
    dp = -dp;
    phi = -a2;
  }
  Vec3 v = dp.cross(u);
  const double vn = v.norm();
  if (vn == 0.0) {
    return false;
  }
  v /= vn;
  const Vec3 w = u.cross(v);
  f[0] = std::atan2(w.dot(other), u.dot(other));
  f[1] = v.dot(other);
  f[2] = phi;
  f[3] = dist;
  return true;
}

DescriptorSet compute_fpfh(const PointCloud& cloud, std::span<const std::size_t> indices, double radius) {
  if (!cloud.has_normals()) {
    throw Error(ErrorCode::InvalidArgument, "compute_fpfh: cloud has no normals");
  }
  if (!(radius > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "compute_fpfh: radius must be positive");
  }
  for (std::size_t i : indices) {
    if (i >= cloud.size()) {
      throw Error(ErrorCode::InvalidArgument, "compute_fpfh: index out of range");
    }
  }
  const auto& normals = *cloud.normals;
  const NeighborIndex index(cloud);

  // Neighbourhoods exclude the point itself and neighbours without normals.
  std::unordered_map<std::size_t, std::vector<Neighbor>> hoods;
  const auto hood = [&](std::size_t i) -> const std::vector<Neighbor>& {
    auto it = hoods.find(i);
    if (it != hoods.end()) return it->second;
    std::vector<Neighbor> nb;
    if (cloud.has_normal(i)) {
      for (const auto& n : index.radius(cloud.points[i], radius)) {
        if (n.index != i && cloud.has_normal(n.index)) nb.push_back(n);
      }
    }
    return hoods.emplace(i, std::move(nb)).first->second;
  };

  std::unordered_map<std::size_t, Spfh> spfhs;
  const auto spfh = [&](std::size_t i) -> const Spfh& {
    auto it = spfhs.find(i);
    if (it != spfhs.end()) return it->second;
    Spfh h{};
    const auto& nb = hood(i);
    if (!nb.empty()) {
      const double incr = 100.0 / static_cast<double>(nb.size());
      std::array<double, 4> f{};
      for (const auto& n : nb) {
        if (!fpfh_pair_features(cloud.points[i], normals[i], cloud.points[n.index], normals[n.index], f)) {
          continue;
        }
        h[bin_of(f[0], -std::numbers::pi, std::numbers::pi)] += incr;
        h[kFpfhBins + bin_of(f[1], -1.0, 1.0)] += incr;
        h[2 * kFpfhBins + bin_of(f[2], -1.0, 1.0)] += incr;
      }
    }
    return spfhs.emplace(i, h).first->second;
  };

  DescriptorSet out;
  out.descriptors.reserve(indices.size());
  out.source_indices.assign(indices.begin(), indices.end());
  out.isolated.reserve(indices.size());
  for (std::size_t i : indices) {
    FpfhHistogram d{};
    const auto& nb = hood(i);
    if (nb.empty()) {
      out.descriptors.push_back(d);
      out.isolated.push_back(true);
      continue;
    }
    std::array<double, 3> sums{};
    for (const auto& n : nb) {
      const double w = n.sq_distance > 0.0 ? 1.0 / n.sq_distance : 0.0;
      if (w == 0.0) continue;
      const Spfh& h = spfh(n.index);
      for (std::size_t b = 0; b < kFpfhSize; ++b) {
        d[b] += w * h[b];
        sums[b / kFpfhBins] += w * h[b];
      }
    }
    for (std::size_t b = 0; b < kFpfhSize; ++b) {
      const double s = sums[b / kFpfhBins];
      d[b] = s > 0.0 ? d[b] * 100.0 / s : 0.0;
    }
    const Spfh& own = spfh(i);
    for (std::size_t b = 0; b < kFpfhSize; ++b) {
      d[b] += own[b];
    }
    out.descriptors.push_back(d);
    out.isolated.push_back(false);
  }
  return out;
}

}  // namespace regkit
