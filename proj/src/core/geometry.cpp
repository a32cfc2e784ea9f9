#include "regkit/core/geometry.hpp"

#include "regkit/core/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <tuple>

namespace regkit {

namespace {

constexpr double kRankTol = 1e-12;

struct LocalPca {
  Vec3 eigenvalues;  // ascending
  Mat3 eigenvectors;
  bool degenerate = false;
};

LocalPca local_pca(const NeighborIndex& index, const Vec3& query, std::size_t k) {
  const auto nbrs = index.knn(query, k);
  Vec3 mean = Vec3::Zero();
  for (const auto& n : nbrs) {
    mean += index.point(n.index);
  }
  mean /= static_cast<double>(nbrs.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& n : nbrs) {
    const Vec3 d = index.point(n.index) - mean;
    cov.noalias() += d * d.transpose();
  }
  cov /= static_cast<double>(nbrs.size());
  Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
  LocalPca out;
  out.eigenvalues = solver.eigenvalues().cwiseMax(0.0);
  out.eigenvectors = solver.eigenvectors();
  // Collinear or coincident neighbours: the middle eigenvalue vanishes.
  out.degenerate = out.eigenvalues[2] <= 0.0 || out.eigenvalues[1] <= kRankTol * out.eigenvalues[2];
  return out;
}

void check_neighbourhood_size(const PointCloud& cloud, std::size_t k) {
  if (cloud.empty()) {
    throw Error(ErrorCode::EmptyCloud, "normal/curvature estimation on empty cloud");
  }
  if (k < 3 || cloud.size() <= k) {
    throw Error(ErrorCode::InvalidArgument, "need cloud size > k >= 3");
  }
}

using VoxelKey = std::array<std::int64_t, 3>;

VoxelKey voxel_key(const Vec3& p, const Vec3& origin, double edge) {
  return {static_cast<std::int64_t>(std::floor((p.x() - origin.x()) / edge)),
          static_cast<std::int64_t>(std::floor((p.y() - origin.y()) / edge)),
          static_cast<std::int64_t>(std::floor((p.z() - origin.z()) / edge))};
}

std::size_t occupied_voxels(const std::vector<Vec3>& points, const Vec3& origin, double edge) {
  std::vector<VoxelKey> keys;
  keys.reserve(points.size());
  for (const Vec3& p : points) {
    keys.push_back(voxel_key(p, origin, edge));
  }
  std::sort(keys.begin(), keys.end());
  return static_cast<std::size_t>(std::unique(keys.begin(), keys.end()) - keys.begin());
}

}  // namespace

PointCloud voxel_grid(const PointCloud& cloud, double edge) {
  if (cloud.empty()) {
    throw Error(ErrorCode::EmptyCloud, "voxel grid of empty cloud");
  }
  if (!(edge > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "voxel edge must be positive");
  }
  const Vec3 origin = bounding_box(cloud.points).min;
  std::vector<std::pair<VoxelKey, std::size_t>> keyed;
  keyed.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    keyed.emplace_back(voxel_key(cloud.points[i], origin, edge), i);
  }
  std::sort(keyed.begin(), keyed.end());
  PointCloud out;
  out.id = cloud.id;
  for (std::size_t i = 0; i < keyed.size();) {
    std::size_t j = i;
    Vec3 sum = Vec3::Zero();
    while (j < keyed.size() && keyed[j].first == keyed[i].first) {
      sum += cloud.points[keyed[j].second];
      ++j;
    }
    out.points.push_back(sum / static_cast<double>(j - i));
    i = j;
  }
  return out;
}

PointCloud voxel_downsample(const PointCloud& cloud, std::size_t target_count) {
  const double edge = voxel_downsample_edge(cloud, target_count);
  if (edge == 0.0) {
    return cloud;
  }
  return voxel_grid(cloud, edge);
}

double voxel_downsample_edge(const PointCloud& cloud, std::size_t target_count) {
  if (target_count == 0) {
    throw Error(ErrorCode::InvalidArgument, "target_count must be >= 1");
  }
  if (cloud.size() <= target_count) {
    return 0.0;
  }
  const Aabb box = bounding_box(cloud.points);
  const double diag = box.extent().norm();
  if (diag <= 0.0) {
    return 1.0;  // all points coincide
  }
  const auto within = [&](std::size_t n) {
    const double t = static_cast<double>(target_count);
    return std::abs(static_cast<double>(n) - t) <= 0.1 * t;
  };
  // Smaller edge -> more voxels. Bisect log(edge).
  double lo = std::log(diag * 1e-7);
  double hi = std::log(diag * 2.0);
  double best_edge = std::exp(hi);
  std::size_t best_count = occupied_voxels(cloud.points, box.min, best_edge);
  for (int iter = 0; iter < 80; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double edge = std::exp(mid);
    const std::size_t n = occupied_voxels(cloud.points, box.min, edge);
    const auto err = [&](std::size_t c) {
      return std::abs(static_cast<double>(c) - static_cast<double>(target_count));
    };
    if (err(n) < err(best_count)) {
      best_count = n;
      best_edge = edge;
    }
    if (within(n)) {
      break;
    }
    if (n > target_count) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return best_edge;
}

PointCloud estimate_normals_and_curvature(const PointCloud& cloud, std::size_t k, const Vec3& viewpoint) {
  check_neighbourhood_size(cloud, k);
  const NeighborIndex index(cloud);
  PointCloud out = cloud;
  out.normals.emplace(cloud.size());
  out.curvatures.emplace(cloud.size());
  const Vec3 nan_normal = Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const LocalPca pca = local_pca(index, cloud.points[i], k);
    if (pca.degenerate) {
      (*out.normals)[i] = nan_normal;
      (*out.curvatures)[i] = 0.0;
      continue;
    }
    Vec3 n = pca.eigenvectors.col(0).normalized();
    if (n.dot(viewpoint - cloud.points[i]) < 0.0) {
      n = -n;
    }
    (*out.normals)[i] = n;
    const double total = pca.eigenvalues.sum();
    (*out.curvatures)[i] = total > 0.0 ? pca.eigenvalues[0] / total : 0.0;
  }
  return out;
}

PointCloud estimate_normals(const PointCloud& cloud, std::size_t k, const Vec3& viewpoint) {
  PointCloud out = estimate_normals_and_curvature(cloud, k, viewpoint);
  out.curvatures = cloud.curvatures;
  return out;
}

PointCloud estimate_curvature(const PointCloud& cloud, std::size_t k) {
  PointCloud out = estimate_normals_and_curvature(cloud, k);
  out.normals = cloud.normals;
  return out;
}

void orient_normals_away_from(PointCloud& cloud, const Vec3& center) {
  if (!cloud.normals) {
    return;
  }
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    Vec3& n = (*cloud.normals)[i];
    if (n.allFinite() && n.dot(cloud.points[i] - center) < 0.0) {
      n = -n;
    }
  }
}

void orient_normals_consistent(PointCloud& cloud, std::size_t k) {
  if (!cloud.normals || cloud.size() < 2) {
    return;
  }
  auto& normals = *cloud.normals;
  const std::size_t n = cloud.size();
  const NeighborIndex index(cloud);
  const std::size_t kk = std::min(k + 1, n);
  std::vector<std::vector<std::size_t>> graph(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!cloud.has_normal(i)) continue;
    for (const auto& nb : index.knn(cloud.points[i], kk)) {
      if (nb.index == i || !cloud.has_normal(nb.index)) continue;
      graph[i].push_back(nb.index);
      graph[nb.index].push_back(i);
    }
  }
  const Vec3 center = cloud.centroid();
  std::vector<char> done(n, 0);
  std::vector<std::size_t> component;
  // Prim's algorithm on 1 - |n_i . n_j|: normals are propagated across the
  // flattest connections first, so sharp creases are crossed last.
  using Item = std::tuple<double, std::size_t, std::size_t>;  // cost, node, parent
  for (std::size_t root = 0; root < n; ++root) {
    if (done[root] || !cloud.has_normal(root)) continue;
    component.clear();
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    heap.emplace(0.0, root, root);
    while (!heap.empty()) {
      const auto [cost, v, parent] = heap.top();
      heap.pop();
      if (done[v]) continue;
      done[v] = 1;
      if (v != parent && normals[v].dot(normals[parent]) < 0.0) normals[v] = -normals[v];
      component.push_back(v);
      for (std::size_t u : graph[v]) {
        if (!done[u]) heap.emplace(1.0 - std::fabs(normals[v].dot(normals[u])), u, v);
      }
    }
    // Global sign per component: most normals point away from the centroid.
    double vote = 0.0;
    for (std::size_t v : component) vote += normals[v].dot(cloud.points[v] - center) >= 0.0 ? 1.0 : -1.0;
    if (vote < 0.0) {
      for (std::size_t v : component) normals[v] = -normals[v];
    }
  }
}

Plane fit_plane_least_squares(std::span<const Vec3> points) {
  if (points.size() < 3) {
    throw Error(ErrorCode::DegenerateInput, "plane fit needs at least 3 points");
  }
  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : points) {
    mean += p;
  }
  mean /= static_cast<double>(points.size());
  Mat3 cov = Mat3::Zero();
  for (const Vec3& p : points) {
    const Vec3 d = p - mean;
    cov.noalias() += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
  const Vec3 ev = solver.eigenvalues();
  if (ev[2] <= 0.0 || ev[1] <= kRankTol * ev[2]) {
    throw Error(ErrorCode::DegenerateInput, "plane fit on collinear or coincident points");
  }
  Vec3 n = solver.eigenvectors().col(0).normalized();
  Eigen::Index big = 0;
  n.cwiseAbs().maxCoeff(&big);
  if (n[big] < 0.0) {
    n = -n;
  }
  return Plane{n, -n.dot(mean)};
}

Vec3 project_onto_plane(const Vec3& point, const Plane& plane) {
  const double nn = plane.normal.squaredNorm();
  return point - (plane.normal.dot(point) + plane.offset) / nn * plane.normal;
}

RigidTransform kabsch_align(std::span<const Vec3> source, std::span<const Vec3> target) {
  const std::vector<double> ones(source.size(), 1.0);
  return kabsch_align(source, target, ones);
}

RigidTransform kabsch_align(std::span<const Vec3> source, std::span<const Vec3> target,
                            std::span<const double> weights) {
  if (source.size() != target.size() || source.size() != weights.size()) {
    throw Error(ErrorCode::DegenerateInput, "kabsch_align: mismatched input lengths");
  }
  if (source.size() < 3) {
    throw Error(ErrorCode::DegenerateInput, "kabsch_align: need at least 3 pairs");
  }
  double wsum = 0.0;
  Vec3 src_mean = Vec3::Zero();
  Vec3 tgt_mean = Vec3::Zero();
  for (std::size_t i = 0; i < source.size(); ++i) {
    wsum += weights[i];
    src_mean += weights[i] * source[i];
    tgt_mean += weights[i] * target[i];
  }
  if (!(wsum > 0.0)) {
    throw Error(ErrorCode::DegenerateInput, "kabsch_align: zero total weight");
  }
  src_mean /= wsum;
  tgt_mean /= wsum;
  // H = sum w (p - p_bar)(l - l_bar)^T
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < source.size(); ++i) {
    h.noalias() += weights[i] * (source[i] - src_mean) * (target[i] - tgt_mean).transpose();
  }
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (sv[0] <= 0.0 || sv[1] <= kRankTol * sv[0]) {
    throw Error(ErrorCode::DegenerateInput, "kabsch_align: rank-deficient covariance");
  }
  Mat3 v = svd.matrixV();
  const Mat3 u = svd.matrixU();
  Mat3 r = v * u.transpose();
  if (r.determinant() < 0.0) {
    v.col(2) *= -1.0;
    r = v * u.transpose();
  }
  RigidTransform out;
  out.rotation = r;
  out.translation = tgt_mean - r * src_mean;
  return out;
}

Mat3 weighted_rotation(std::span<const Vec3> source, std::span<const Vec3> target,
                       std::span<const double> weights) {
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < source.size(); ++i) {
    h.noalias() += weights[i] * source[i] * target[i].transpose();
  }
  if (h.isZero(0.0)) {
    return Mat3::Identity();
  }
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 v = svd.matrixV();
  const Mat3 u = svd.matrixU();
  Mat3 r = v * u.transpose();
  if (r.determinant() < 0.0) {
    v.col(2) *= -1.0;
    r = v * u.transpose();
  }
  return r;
}

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t) {
  PointCloud out = cloud;
  for (Vec3& p : out.points) {
    p = t.apply(p);
  }
  if (out.normals) {
    for (Vec3& n : *out.normals) {
      if (n.allFinite()) {
        n = t.rotation * n;
      }
    }
  }
  return out;
}

double alignment_rmse(const PointCloud& source, const PointCloud& target, const RigidTransform& t,
                      Pairing pairing) {
  if (source.empty() || target.empty()) {
    throw Error(ErrorCode::EmptyCloud, "alignment_rmse on empty cloud");
  }
  if (pairing == Pairing::NearestNeighbor) {
    return alignment_rmse(source, NeighborIndex(target), t);
  }
  if (source.size() != target.size()) {
    throw Error(ErrorCode::InvalidArgument, "index-matched RMSE needs equal lengths");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    sum += (t.apply(source.points[i]) - target.points[i]).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(source.size()));
}

double alignment_rmse(const PointCloud& source, const NeighborIndex& target_index, const RigidTransform& t) {
  if (source.empty() || target_index.empty()) {
    throw Error(ErrorCode::EmptyCloud, "alignment_rmse on empty cloud");
  }
  double sum = 0.0;
  for (const Vec3& p : source.points) {
    sum += target_index.nearest(t.apply(p)).sq_distance;
  }
  return std::sqrt(sum / static_cast<double>(source.size()));
}

double median_spacing(const PointCloud& cloud) {
  if (cloud.size() < 2) {
    return 0.0;
  }
  const NeighborIndex index(cloud);
  std::vector<double> d;
  d.reserve(cloud.size());
  for (const Vec3& p : cloud.points) {
    const auto nn = index.knn(p, 2);
    d.push_back(std::sqrt(nn.back().sq_distance));
  }
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid;
}

}  // namespace regkit
