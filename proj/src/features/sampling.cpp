#include "regkit/core/error.hpp"
#include "regkit/features/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace regkit {

// Weighted sampling without replacement via exponential keys: point i gets
// key log(u_i) / w_i and the n largest keys win. This reproduces successive
// draws with probability w_i / sum(remaining w).
std::vector<std::size_t> curvature_weighted_sample(const PointCloud& cloud, std::size_t n, std::uint64_t seed) {
  if (!cloud.has_curvatures()) {
    throw Error(ErrorCode::InvalidArgument, "curvature_weighted_sample: cloud has no curvatures");
  }
  const std::size_t size = cloud.size();
  if (n < 1 || n > size) {
    throw Error(ErrorCode::InvalidArgument, "curvature_weighted_sample: n must lie in [1, cloud size]");
  }
  const auto& k = *cloud.curvatures;
  double total = 0.0;
  for (double v : k) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::InvalidArgument, "curvature_weighted_sample: curvatures must be finite and non-negative");
    }
    total += v;
  }
  const bool uniform = !(total > 0.0);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  struct Keyed {
    double primary;    // log(u) / w; -inf for zero weight
    double secondary;  // orders the zero-weight tail uniformly
    std::size_t index;
  };
  std::vector<Keyed> keys(size);
  for (std::size_t i = 0; i < size; ++i) {
    double u = unit(rng);
    while (u <= 0.0) {
      u = unit(rng);
    }
    const double tail = unit(rng);
    const double w = uniform ? 1.0 : k[i];
    const double primary = w > 0.0 ? std::log(u) / w : -std::numeric_limits<double>::infinity();
    keys[i] = {primary, tail, i};
  }
  const auto larger = [](const Keyed& a, const Keyed& b) {
    if (a.primary != b.primary) return a.primary > b.primary;
    if (a.secondary != b.secondary) return a.secondary > b.secondary;
    return a.index < b.index;
  };
  std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(n), keys.end(), larger);
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = keys[i].index;
  }
  return out;
}

}  // namespace regkit
