#pragma once

#include "regkit/core/point_cloud.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace regkit {

struct Neighbor {
  std::size_t index;
  double sq_distance;
};

/// Exact kd-tree over a fixed set of 3-D points.
///
/// The index owns a copy of the points, so it stays valid independently of the
/// cloud it was built from. All queries are const and may run concurrently.
/// Results are ordered by (distance, index), which makes ties deterministic.
class NeighborIndex {
 public:
  NeighborIndex() = default;
  explicit NeighborIndex(std::span<const Vec3> points, std::size_t leaf_size = 12);
  explicit NeighborIndex(const PointCloud& cloud) : NeighborIndex(std::span<const Vec3>(cloud.points)) {}

  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  const Vec3& point(std::size_t i) const { return points_[i]; }

  /// Closest point; requires a non-empty index.
  Neighbor nearest(const Vec3& query) const;
  /// Same result as nearest(query); the distance to point `hint` seeds the
  /// pruning bound.
  Neighbor nearest(const Vec3& query, std::size_t hint) const;
  /// Up to k closest points, sorted ascending.
  std::vector<Neighbor> knn(const Vec3& query, std::size_t k) const;
  /// All points with distance <= radius, sorted ascending.
  std::vector<Neighbor> radius(const Vec3& query, double radius) const;

 private:
  struct Node {
    // Leaf when child[0] == kLeaf; then [begin, end) indexes order_.
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::uint32_t child[2] = {0, 0};
    int axis = 0;
    double split = 0.0;
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Zero();
  };
  static constexpr std::uint32_t kLeaf = 0xffffffffu;

  std::uint32_t build(std::uint32_t begin, std::uint32_t end);
  static double box_sq_distance(const Node& node, const Vec3& q);

  Neighbor nearest_from(Neighbor best, const Vec3& query) const;

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Vec3> ordered_;  // points_[order_[i]], contiguous per leaf
  std::vector<Node> nodes_;
  std::size_t leaf_size_ = 12;
};

}  // namespace regkit
