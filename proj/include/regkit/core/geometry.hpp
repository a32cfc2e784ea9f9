#pragma once

#include "regkit/core/neighbor_index.hpp"
#include "regkit/core/point_cloud.hpp"
#include "regkit/core/rigid_transform.hpp"

#include <span>
#include <vector>

namespace regkit {

/// Plane A x + B y + C z + D = 0 with (A, B, C) of unit length.
struct Plane {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;

  double signed_distance(const Vec3& p) const { return normal.dot(p) + offset; }
};

/// Voxel-centroid downsampling to roughly `target_count` points.
///
/// The voxel edge is found by bisection (in log space) until the occupied
/// voxel count is within +-10 % of the target. Clouds already at or below
/// the target are returned unchanged. Output is ordered by voxel key.
PointCloud voxel_downsample(const PointCloud& cloud, std::size_t target_count);

/// Voxel edge chosen by voxel_downsample for this cloud and target (0 when
/// the cloud is returned unchanged).
double voxel_downsample_edge(const PointCloud& cloud, std::size_t target_count);

/// One pass of voxel-centroid downsampling with a fixed edge length; voxels
/// are anchored at the cloud's bounding-box minimum.
PointCloud voxel_grid(const PointCloud& cloud, double edge);

/// PCA normals over the k nearest neighbours (the point itself included),
/// flipped to face `viewpoint`. Degenerate (collinear) neighbourhoods get a
/// NaN normal; see PointCloud::has_normal.
PointCloud estimate_normals(const PointCloud& cloud, std::size_t k, const Vec3& viewpoint = Vec3::Zero());

/// Surface variation lambda0 / (lambda0 + lambda1 + lambda2) over the k nearest
/// neighbours; 0 on degenerate neighbourhoods. Values lie in [0, 1/3].
PointCloud estimate_curvature(const PointCloud& cloud, std::size_t k = 30);

/// Both attributes from a single neighbourhood pass.
PointCloud estimate_normals_and_curvature(const PointCloud& cloud, std::size_t k,
                                          const Vec3& viewpoint = Vec3::Zero());

/// Flips every normal so that it points away from `center`.
void orient_normals_away_from(PointCloud& cloud, const Vec3& center);

/// Makes normals agree across a k-nearest-neighbour graph by propagation
/// along a minimum spanning tree weighted by 1 - |n_i . n_j|. Each connected
/// component then gets the sign under which most of its normals point away
/// from the cloud centroid. Null normals are left alone.
void orient_normals_consistent(PointCloud& cloud, std::size_t k = 10);

/// Total least-squares plane. Throws DegenerateInput for fewer than three
/// points or collinear/duplicate input. The normal's largest component is
/// made positive so the result is deterministic.
Plane fit_plane_least_squares(std::span<const Vec3> points);

Vec3 project_onto_plane(const Vec3& point, const Plane& plane);

/// Least-squares rigid alignment of source onto target (SVD of the centred
/// cross-covariance, reflection fixed by flipping the last column of V).
/// Throws DegenerateInput on size mismatch, fewer than 3 pairs, or a
/// rank-deficient covariance.
RigidTransform kabsch_align(std::span<const Vec3> source, std::span<const Vec3> target);
RigidTransform kabsch_align(std::span<const Vec3> source, std::span<const Vec3> target,
                            std::span<const double> weights);

/// Rotation-only weighted alignment (no centring), as used for translation-
/// invariant measurements. Zero total weight yields the identity.
Mat3 weighted_rotation(std::span<const Vec3> source, std::span<const Vec3> target,
                       std::span<const double> weights);

/// Points mapped by T; normals rotated; curvatures carried over.
PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t);

enum class Pairing { IndexMatched, NearestNeighbor };

/// sqrt(mean |T(source_i) - target_pair(i)|^2) in mm.
double alignment_rmse(const PointCloud& source, const PointCloud& target, const RigidTransform& t,
                      Pairing pairing);
/// Nearest-neighbour variant reusing a prebuilt index over the target.
double alignment_rmse(const PointCloud& source, const NeighborIndex& target_index, const RigidTransform& t);

/// Median distance from each point to its nearest other point.
double median_spacing(const PointCloud& cloud);

}  // namespace regkit
