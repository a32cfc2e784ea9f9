#include "regkit/core/point_cloud.hpp"

#include "regkit/core/error.hpp"

#include <cmath>

namespace regkit {

bool PointCloud::has_normal(std::size_t i) const {
  return normals && i < normals->size() && (*normals)[i].allFinite();
}

bool PointCloud::is_consistent(double normal_tol) const {
  if (normals) {
    if (normals->size() != points.size()) {
      return false;
    }
    for (const Vec3& n : *normals) {
      if (n.allFinite() && std::abs(n.norm() - 1.0) > normal_tol) {
        return false;
      }
    }
  }
  if (curvatures) {
    if (curvatures->size() != points.size()) {
      return false;
    }
    for (double c : *curvatures) {
      if (!(c >= 0.0)) {
        return false;
      }
    }
  }
  return true;
}

Vec3 PointCloud::centroid() const {
  if (points.empty()) {
    throw Error(ErrorCode::EmptyCloud, "centroid of empty cloud");
  }
  Vec3 sum = Vec3::Zero();
  for (const Vec3& p : points) {
    sum += p;
  }
  return sum / static_cast<double>(points.size());
}

PointCloud PointCloud::select(const std::vector<std::size_t>& indices) const {
  PointCloud out;
  out.id = id;
  out.region_corrected = region_corrected;
  out.points.reserve(indices.size());
  for (std::size_t i : indices) {
    out.points.push_back(points.at(i));
  }
  if (normals) {
    out.normals.emplace();
    out.normals->reserve(indices.size());
    for (std::size_t i : indices) {
      out.normals->push_back((*normals)[i]);
    }
  }
  if (curvatures) {
    out.curvatures.emplace();
    out.curvatures->reserve(indices.size());
    for (std::size_t i : indices) {
      out.curvatures->push_back((*curvatures)[i]);
    }
  }
  return out;
}

PointCloud make_cloud(std::vector<Vec3> points, std::string id) {
  PointCloud c;
  c.points = std::move(points);
  c.id = std::move(id);
  return c;
}

Aabb bounding_box(const std::vector<Vec3>& points) {
  if (points.empty()) {
    throw Error(ErrorCode::EmptyCloud, "bounding box of empty point list");
  }
  Aabb box{points.front(), points.front()};
  for (const Vec3& p : points) {
    box.min = box.min.cwiseMin(p);
    box.max = box.max.cwiseMax(p);
  }
  return box;
}

}  // namespace regkit
