#pragma once

#include "regkit/core/point_cloud.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace regkit {

/// Draws n distinct indices without replacement, each successive draw picking
/// point i with probability k_i / sum(k) among those not yet chosen. A zero
/// curvature sum falls back to uniform sampling; zero-curvature points are
/// only used once every positive-curvature point is taken. Deterministic in
/// `seed`.
std::vector<std::size_t> curvature_weighted_sample(const PointCloud& cloud, std::size_t n, std::uint64_t seed);

inline constexpr std::size_t kFpfhBins = 11;
inline constexpr std::size_t kFpfhSize = 3 * kFpfhBins;
using FpfhHistogram = std::array<double, kFpfhSize>;

struct DescriptorSet {
  std::vector<FpfhHistogram> descriptors;
  std::vector<std::size_t> source_indices;  // into the parent cloud
  std::vector<bool> isolated;               // no neighbour within the radius: descriptor is zero

  std::size_t size() const noexcept { return descriptors.size(); }
  std::size_t isolated_count() const;
};

/// The four pair features (theta, alpha, phi, distance) of an oriented point
/// pair in the Darboux frame. Returns false for coincident points or a
/// degenerate frame, in which case all features are zero.
bool fpfh_pair_features(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2,
                        std::array<double, 4>& features);

/// 33-bin FPFH (three 11-bin angular histograms) for the listed points over
/// a radius neighbourhood. Points without normals contribute nothing.
DescriptorSet compute_fpfh(const PointCloud& cloud, std::span<const std::size_t> indices, double radius);

double descriptor_distance(const FpfhHistogram& a, const FpfhHistogram& b);

struct CorrespondenceSet {
  struct Pair {
    std::size_t source;
    std::size_t target;
    friend bool operator==(const Pair&, const Pair&) = default;
  };
  std::vector<Pair> pairs;
  std::vector<double> weights;
  std::vector<double> descriptor_distances;

  std::size_t size() const noexcept { return pairs.size(); }
  bool empty() const noexcept { return pairs.empty(); }
  /// Copies the listed entries.
  CorrespondenceSet subset(std::span<const std::size_t> entries) const;
};

struct MatchOptions {
  double tau = 0.0;      // <= 0 selects the adaptive default
  bool mutual = true;    // require reciprocal nearest neighbours
  double tau_factor = 0.9;
};

/// 0.9 x median distance from each source descriptor to its nearest other
/// source descriptor (non-isolated descriptors only).
double default_match_threshold(const DescriptorSet& source, double factor = 0.9);

/// Nearest-neighbour matching in descriptor space with distance < tau, mutual
/// by default. Weight = (1 - d/tau) * (1 + k_i / k_mean) where k_i is the
/// curvature of source keypoint i (`source_curvatures` is aligned with
/// source.descriptors; empty means uniform importance) and k_mean their mean.
/// Isolated descriptors never match. Pair indices refer to the parent clouds
/// (DescriptorSet::source_indices). Throws NoCorrespondences when nothing
/// survives.
CorrespondenceSet match_descriptors(const DescriptorSet& source, const DescriptorSet& target,
                                    std::span<const double> source_curvatures, const MatchOptions& options);

/// Debug dump: source_index,target_index,weight,descriptor_distance.
void write_correspondences_csv(const std::filesystem::path& path, const CorrespondenceSet& corr);

}  // namespace regkit
