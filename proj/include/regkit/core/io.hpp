#pragma once

#include "regkit/core/point_cloud.hpp"

#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

namespace regkit {

enum class CloudFormat { PlyAscii, PlyBinaryLE, Obj };

/// Reads vertices from a PLY (ASCII or binary little-endian) or OBJ file.
/// PLY normals (nx, ny, nz) are kept when present; faces are ignored.
/// Throws ParseError on malformed input and EmptyCloud when no vertex is found.
PointCloud load_point_cloud(const std::filesystem::path& path, CloudFormat format);

/// Picks the format from the extension and, for PLY, the header's format line.
PointCloud load_point_cloud(const std::filesystem::path& path);

std::optional<CloudFormat> parse_cloud_format(std::string_view name);

/// ASCII PLY with x y z, plus nx ny nz and curvature when the cloud carries them.
void write_ply_ascii(const std::filesystem::path& path, const PointCloud& cloud);

/// Binary little-endian PLY with float64 x y z (and normals when present).
void write_ply_binary(const std::filesystem::path& path, const PointCloud& cloud);

/// Rows of x,y,z in millimetres. A non-numeric first row is treated as a header.
std::vector<Vec3> load_points_csv(const std::filesystem::path& path);

/// Ground-truth style point list: CSV, or any cloud format by extension.
std::vector<Vec3> load_point_list(const std::filesystem::path& path);

}  // namespace regkit
