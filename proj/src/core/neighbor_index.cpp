#include "regkit/core/neighbor_index.hpp"

#include "regkit/core/error.hpp"

#include <cmath>
#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>

namespace regkit {

namespace {

bool neighbor_less(const Neighbor& a, const Neighbor& b) {
  return a.sq_distance < b.sq_distance || (a.sq_distance == b.sq_distance && a.index < b.index);
}

}  // namespace

NeighborIndex::NeighborIndex(std::span<const Vec3> points, std::size_t leaf_size)
    : points_(points.begin(), points.end()), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
  if (points_.size() >= kLeaf) {
    throw Error(ErrorCode::InvalidArgument, "point count exceeds index capacity");
  }
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / leaf_size_ + 1);
    build(0, static_cast<std::uint32_t>(points_.size()));
  }
  ordered_.reserve(points_.size());
  for (std::uint32_t idx : order_) ordered_.push_back(points_[idx]);
}

std::uint32_t NeighborIndex::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  Vec3 lo = points_[order_[begin]];
  Vec3 hi = lo;
  for (std::uint32_t i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  {
    Node& node = nodes_[id];
    node.begin = begin;
    node.end = end;
    node.lo = lo;
    node.hi = hi;
  }
  if (end - begin <= leaf_size_) {
    nodes_[id].child[0] = kLeaf;
    return id;
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double va = points_[a][axis];
                     const double vb = points_[b][axis];
                     return va < vb || (va == vb && a < b);
                   });
  const double split = points_[order_[mid]][axis];
  const std::uint32_t left = build(begin, mid);
  const std::uint32_t right = build(mid, end);
  Node& node = nodes_[id];
  node.axis = axis;
  node.split = split;
  node.child[0] = left;
  node.child[1] = right;
  return id;
}

double NeighborIndex::box_sq_distance(const Node& node, const Vec3& q) {
  double d2 = 0.0;
  for (int a = 0; a < 3; ++a) {
    double d = 0.0;
    if (q[a] < node.lo[a]) {
      d = node.lo[a] - q[a];
    } else if (q[a] > node.hi[a]) {
      d = q[a] - node.hi[a];
    }
    d2 += d * d;
  }
  return d2;
}

Neighbor NeighborIndex::nearest(const Vec3& query) const {
  if (points_.empty()) {
    throw Error(ErrorCode::EmptyCloud, "nearest-neighbour query on empty index");
  }
  return nearest_from({0, std::numeric_limits<double>::infinity()}, query);
}

Neighbor NeighborIndex::nearest(const Vec3& query, std::size_t hint) const {
  if (points_.empty()) {
    throw Error(ErrorCode::EmptyCloud, "nearest-neighbour query on empty index");
  }
  const double d2 = hint < points_.size() ? (points_[hint] - query).squaredNorm() : 0.0;
  if (hint >= points_.size() || std::isnan(d2)) return nearest(query);
  return nearest_from({hint, d2}, query);
}

// Pruning is strict, so equally distant points are still visited and the
// lowest index wins regardless of the seed.
Neighbor NeighborIndex::nearest_from(Neighbor best, const Vec3& query) const {
  // Explicit stack; near child is visited first.
  std::uint32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (box_sq_distance(node, query) > best.sq_distance) {
      continue;
    }
    if (node.child[0] == kLeaf) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::uint32_t idx = order_[i];
        const double d2 = (ordered_[i] - query).squaredNorm();
        if (d2 < best.sq_distance || (d2 == best.sq_distance && idx < best.index)) {
          best = {idx, d2};
        }
      }
      continue;
    }
    const bool go_left = query[node.axis] < node.split;
    stack[top++] = node.child[go_left ? 1 : 0];
    stack[top++] = node.child[go_left ? 0 : 1];
  }
  return best;
}

std::vector<Neighbor> NeighborIndex::knn(const Vec3& query, std::size_t k) const {
  std::vector<Neighbor> out;
  if (points_.empty() || k == 0) {
    return out;
  }
  k = std::min(k, points_.size());
  // Max-heap on (distance, index) holding the current k best.
  std::priority_queue<Neighbor, std::vector<Neighbor>, decltype(&neighbor_less)> heap(neighbor_less);
  std::uint32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (heap.size() == k && box_sq_distance(node, query) > heap.top().sq_distance) {
      continue;
    }
    if (node.child[0] == kLeaf) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const Neighbor cand{order_[i], (ordered_[i] - query).squaredNorm()};
        if (heap.size() < k) {
          heap.push(cand);
        } else if (neighbor_less(cand, heap.top())) {
          heap.pop();
          heap.push(cand);
        }
      }
      continue;
    }
    const bool go_left = query[node.axis] < node.split;
    stack[top++] = node.child[go_left ? 1 : 0];
    stack[top++] = node.child[go_left ? 0 : 1];
  }
  out.resize(heap.size());
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = heap.top();
    heap.pop();
  }
  return out;
}

std::vector<Neighbor> NeighborIndex::radius(const Vec3& query, double radius) const {
  std::vector<Neighbor> out;
  if (points_.empty() || radius < 0.0) {
    return out;
  }
  const double r2 = radius * radius;
  std::uint32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (box_sq_distance(node, query) > r2) {
      continue;
    }
    if (node.child[0] == kLeaf) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const double d2 = (ordered_[i] - query).squaredNorm();
        if (d2 <= r2) {
          out.push_back({order_[i], d2});
        }
      }
      continue;
    }
    stack[top++] = node.child[0];
    stack[top++] = node.child[1];
  }
  std::sort(out.begin(), out.end(), neighbor_less);
  return out;
}

}  // namespace regkit
