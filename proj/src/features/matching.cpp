#include "regkit/core/error.hpp"
#include "regkit/features/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace regkit {

namespace {

struct Nearest {
  std::size_t index = std::numeric_limits<std::size_t>::max();
  double distance = std::numeric_limits<double>::infinity();
};

// For each usable descriptor in `from`, its nearest usable descriptor in `to`
// (lowest index on ties). `skip_self` excludes the same position.
std::vector<Nearest> nearest_descriptors(const DescriptorSet& from, const DescriptorSet& to, bool skip_self) {
  std::vector<Nearest> out(from.size());
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (from.isolated[i]) continue;
    for (std::size_t j = 0; j < to.size(); ++j) {
      if (to.isolated[j] || (skip_self && i == j)) continue;
      const double d = descriptor_distance(from.descriptors[i], to.descriptors[j]);
      if (d < out[i].distance) {
        out[i] = {j, d};
      }
    }
  }
  return out;
}

void check_set(const DescriptorSet& s, const char* name) {
  if (s.descriptors.size() != s.source_indices.size() || s.isolated.size() != s.descriptors.size()) {
    throw Error(ErrorCode::InvalidArgument, std::string("match_descriptors: inconsistent ") + name + " set");
  }
  if (s.descriptors.empty()) {
    throw Error(ErrorCode::InvalidArgument, std::string("match_descriptors: empty ") + name + " set");
  }
}

}  // namespace

double descriptor_distance(const FpfhHistogram& a, const FpfhHistogram& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < kFpfhSize; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

CorrespondenceSet CorrespondenceSet::subset(std::span<const std::size_t> entries) const {
  CorrespondenceSet out;
  for (std::size_t e : entries) {
    out.pairs.push_back(pairs.at(e));
    out.weights.push_back(weights.at(e));
    out.descriptor_distances.push_back(e < descriptor_distances.size() ? descriptor_distances[e] : 0.0);
  }
  return out;
}

double default_match_threshold(const DescriptorSet& source, double factor) {
  check_set(source, "source");
  std::vector<double> d;
  for (const auto& n : nearest_descriptors(source, source, true)) {
    if (std::isfinite(n.distance)) d.push_back(n.distance);
  }
  if (d.empty()) {
    throw Error(ErrorCode::DegenerateInput, "default_match_threshold: fewer than two usable descriptors");
  }
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  double tau = factor * *mid;
  if (!(tau > 0.0)) {
    // More than half the descriptors have an exact twin; fall back to the
    // positive distances only.
    std::vector<double> pos;
    std::copy_if(d.begin(), d.end(), std::back_inserter(pos), [](double v) { return v > 0.0; });
    if (pos.empty()) {
      throw Error(ErrorCode::DegenerateInput, "default_match_threshold: all descriptors identical");
    }
    const auto pm = pos.begin() + static_cast<std::ptrdiff_t>(pos.size() / 2);
    std::nth_element(pos.begin(), pm, pos.end());
    tau = factor * *pm;
  }
  return tau;
}

CorrespondenceSet match_descriptors(const DescriptorSet& source, const DescriptorSet& target,
                                    std::span<const double> source_curvatures, const MatchOptions& options) {
  check_set(source, "source");
  check_set(target, "target");
  if (!source_curvatures.empty() && source_curvatures.size() != source.size()) {
    throw Error(ErrorCode::InvalidArgument, "match_descriptors: curvature count does not match source set");
  }
  const double tau = options.tau > 0.0 ? options.tau : default_match_threshold(source, options.tau_factor);

  double k_mean = 0.0;
  if (!source_curvatures.empty()) {
    k_mean = std::accumulate(source_curvatures.begin(), source_curvatures.end(), 0.0) /
             static_cast<double>(source_curvatures.size());
  }

  const auto fwd = nearest_descriptors(source, target, false);
  std::vector<Nearest> back;
  if (options.mutual) {
    back = nearest_descriptors(target, source, false);
  }

  CorrespondenceSet out;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const auto& n = fwd[i];
    if (!(n.distance < tau)) continue;
    if (options.mutual && back[n.index].index != i) continue;
    const double importance = k_mean > 0.0 ? 1.0 + source_curvatures[i] / k_mean : 1.0;
    out.pairs.push_back({source.source_indices[i], target.source_indices[n.index]});
    out.weights.push_back((1.0 - n.distance / tau) * importance);
    out.descriptor_distances.push_back(n.distance);
  }
  if (out.empty()) {
    throw Error(ErrorCode::NoCorrespondences, "match_descriptors: no descriptor pair within tau");
  }
  return out;
}

void write_correspondences_csv(const std::filesystem::path& path, const CorrespondenceSet& corr) {
  std::ofstream os(path);
  if (!os) {
    throw Error(ErrorCode::IoError, "cannot write " + path.string());
  }
  os.precision(17);
  os << "source_index,target_index,weight,descriptor_distance\n";
  for (std::size_t i = 0; i < corr.size(); ++i) {
    os << corr.pairs[i].source << ',' << corr.pairs[i].target << ',' << corr.weights[i] << ','
       << (i < corr.descriptor_distances.size() ? corr.descriptor_distances[i] : 0.0) << '\n';
  }
}

}  // namespace regkit
