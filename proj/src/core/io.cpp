#include "regkit/core/io.hpp"

#include "regkit/core/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

namespace regkit {

namespace {

static_assert(std::endian::native == std::endian::little, "binary PLY reader assumes a little-endian host");

enum class Scalar { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

std::optional<Scalar> parse_scalar(const std::string& s) {
  if (s == "char" || s == "int8") return Scalar::Int8;
  if (s == "uchar" || s == "uint8") return Scalar::UInt8;
  if (s == "short" || s == "int16") return Scalar::Int16;
  if (s == "ushort" || s == "uint16") return Scalar::UInt16;
  if (s == "int" || s == "int32") return Scalar::Int32;
  if (s == "uint" || s == "uint32") return Scalar::UInt32;
  if (s == "float" || s == "float32") return Scalar::Float32;
  if (s == "double" || s == "float64") return Scalar::Float64;
  return std::nullopt;
}

std::size_t scalar_size(Scalar s) {
  switch (s) {
    case Scalar::Int8:
    case Scalar::UInt8: return 1;
    case Scalar::Int16:
    case Scalar::UInt16: return 2;
    case Scalar::Int32:
    case Scalar::UInt32:
    case Scalar::Float32: return 4;
    case Scalar::Float64: return 8;
  }
  return 0;
}

struct Property {
  std::string name;
  Scalar type = Scalar::Float32;
  bool is_list = false;
  Scalar count_type = Scalar::UInt8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
};

struct Header {
  CloudFormat format = CloudFormat::PlyAscii;
  std::vector<Element> elements;
};

[[noreturn]] void parse_fail(const std::filesystem::path& path, const std::string& what) {
  throw Error(ErrorCode::ParseError, path.string() + ": " + what);
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) {
    out.push_back(tok);
  }
  return out;
}

Header read_header(std::istream& in, const std::filesystem::path& path) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) {
    parse_fail(path, "missing 'ply' magic");
  }
  Header header;
  bool have_format = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") {
      continue;
    }
    if (tok[0] == "end_header") {
      if (!have_format) {
        parse_fail(path, "missing format line");
      }
      return header;
    }
    if (tok[0] == "format") {
      if (tok.size() < 2) parse_fail(path, "bad format line");
      if (tok[1] == "ascii") {
        header.format = CloudFormat::PlyAscii;
      } else if (tok[1] == "binary_little_endian") {
        header.format = CloudFormat::PlyBinaryLE;
      } else {
        parse_fail(path, "unsupported PLY format '" + tok[1] + "'");
      }
      have_format = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) parse_fail(path, "bad element line");
      Element e;
      e.name = tok[1];
      std::size_t count = 0;
      const auto* first = tok[2].data();
      const auto* last = first + tok[2].size();
      if (std::from_chars(first, last, count).ptr != last) parse_fail(path, "bad element count");
      e.count = count;
      header.elements.push_back(std::move(e));
    } else if (tok[0] == "property") {
      if (header.elements.empty()) parse_fail(path, "property before element");
      Property p;
      if (tok.size() == 5 && tok[1] == "list") {
        const auto ct = parse_scalar(tok[2]);
        const auto it = parse_scalar(tok[3]);
        if (!ct || !it) parse_fail(path, "bad list property types");
        p.is_list = true;
        p.count_type = *ct;
        p.type = *it;
        p.name = tok[4];
      } else if (tok.size() == 3) {
        const auto t = parse_scalar(tok[1]);
        if (!t) parse_fail(path, "unknown property type '" + tok[1] + "'");
        p.type = *t;
        p.name = tok[2];
      } else {
        parse_fail(path, "bad property line");
      }
      header.elements.back().properties.push_back(std::move(p));
    } else {
      parse_fail(path, "unexpected header line '" + line + "'");
    }
  }
  parse_fail(path, "unterminated header");
}

template <typename T>
T read_raw(std::istream& in, const std::filesystem::path& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) parse_fail(path, "unexpected end of binary data");
  return v;
}

double read_binary_scalar(std::istream& in, Scalar s, const std::filesystem::path& path) {
  switch (s) {
    case Scalar::Int8: return read_raw<std::int8_t>(in, path);
    case Scalar::UInt8: return read_raw<std::uint8_t>(in, path);
    case Scalar::Int16: return read_raw<std::int16_t>(in, path);
    case Scalar::UInt16: return read_raw<std::uint16_t>(in, path);
    case Scalar::Int32: return read_raw<std::int32_t>(in, path);
    case Scalar::UInt32: return read_raw<std::uint32_t>(in, path);
    case Scalar::Float32: return read_raw<float>(in, path);
    case Scalar::Float64: return read_raw<double>(in, path);
  }
  return 0.0;
}

struct VertexSlots {
  std::array<int, 3> xyz{-1, -1, -1};
  std::array<int, 3> normal{-1, -1, -1};
  int curvature = -1;
};

VertexSlots locate_slots(const Element& e, const std::filesystem::path& path) {
  VertexSlots slots;
  for (std::size_t i = 0; i < e.properties.size(); ++i) {
    const auto& n = e.properties[i].name;
    const int idx = static_cast<int>(i);
    if (n == "x") slots.xyz[0] = idx;
    if (n == "y") slots.xyz[1] = idx;
    if (n == "z") slots.xyz[2] = idx;
    if (n == "nx") slots.normal[0] = idx;
    if (n == "ny") slots.normal[1] = idx;
    if (n == "nz") slots.normal[2] = idx;
    if (n == "curvature") slots.curvature = idx;
  }
  for (int s : slots.xyz) {
    if (s < 0) parse_fail(path, "vertex element lacks x/y/z");
    if (e.properties[static_cast<std::size_t>(s)].is_list) parse_fail(path, "list-typed coordinate");
  }
  return slots;
}

void store_vertex(PointCloud& cloud, const VertexSlots& slots, const std::vector<double>& values,
                  bool with_normals, bool with_curvature) {
  cloud.points.emplace_back(values[slots.xyz[0]], values[slots.xyz[1]], values[slots.xyz[2]]);
  if (with_normals) {
    Vec3 n(values[slots.normal[0]], values[slots.normal[1]], values[slots.normal[2]]);
    const double len = n.norm();
    if (std::isfinite(len) && len > 0.0) {
      n /= len;
    } else {
      n.setConstant(std::numeric_limits<double>::quiet_NaN());
    }
    cloud.normals->push_back(n);
  }
  if (with_curvature) {
    cloud.curvatures->push_back(std::max(0.0, values[slots.curvature]));
  }
}

PointCloud read_ply(const std::filesystem::path& path, std::optional<CloudFormat> expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  const Header header = read_header(in, path);
  if (expected && *expected != header.format) {
    parse_fail(path, "PLY format does not match the requested format");
  }
  PointCloud cloud;
  cloud.id = path.stem().string();
  bool seen_vertex = false;
  for (const Element& e : header.elements) {
    const bool is_vertex = e.name == "vertex";
    VertexSlots slots;
    bool with_normals = false;
    bool with_curvature = false;
    if (is_vertex) {
      if (seen_vertex) parse_fail(path, "duplicate vertex element");
      seen_vertex = true;
      slots = locate_slots(e, path);
      with_normals = std::all_of(slots.normal.begin(), slots.normal.end(), [](int s) { return s >= 0; });
      with_curvature = slots.curvature >= 0;
      cloud.points.reserve(e.count);
      if (with_normals) cloud.normals.emplace();
      if (with_curvature) cloud.curvatures.emplace();
    }
    std::vector<double> values(e.properties.size(), 0.0);
    for (std::size_t row = 0; row < e.count; ++row) {
      if (header.format == CloudFormat::PlyAscii) {
        std::string line;
        do {
          if (!std::getline(in, line)) parse_fail(path, "unexpected end of ASCII data");
        } while (line.find_first_not_of(" \t\r") == std::string::npos);
        std::istringstream ls(line);
        for (std::size_t p = 0; p < e.properties.size(); ++p) {
          const Property& prop = e.properties[p];
          double v = 0.0;
          if (!(ls >> v)) parse_fail(path, "malformed row " + std::to_string(row) + " of " + e.name);
          if (prop.is_list) {
            if (v < 0 || v != std::floor(v)) parse_fail(path, "bad list count");
            for (std::size_t k = 0; k < static_cast<std::size_t>(v); ++k) {
              double skip = 0.0;
              if (!(ls >> skip)) parse_fail(path, "short list in " + e.name);
            }
          } else {
            values[p] = v;
          }
        }
      } else {
        for (std::size_t p = 0; p < e.properties.size(); ++p) {
          const Property& prop = e.properties[p];
          if (prop.is_list) {
            const double count = read_binary_scalar(in, prop.count_type, path);
            if (count < 0) parse_fail(path, "negative list count");
            in.seekg(static_cast<std::streamoff>(count * static_cast<double>(scalar_size(prop.type))),
                     std::ios::cur);
            if (!in) parse_fail(path, "unexpected end of binary data");
          } else {
            values[p] = read_binary_scalar(in, prop.type, path);
          }
        }
      }
      if (is_vertex) {
        store_vertex(cloud, slots, values, with_normals, with_curvature);
      }
    }
  }
  if (!seen_vertex) parse_fail(path, "no vertex element");
  for (const Vec3& p : cloud.points) {
    if (!p.allFinite()) parse_fail(path, "non-finite vertex coordinate");
  }
  if (cloud.points.empty()) {
    throw Error(ErrorCode::EmptyCloud, path.string() + " has no vertices");
  }
  return cloud;
}

PointCloud read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  PointCloud cloud;
  cloud.id = path.stem().string();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.size() < 2 || line[0] != 'v' || !std::isspace(static_cast<unsigned char>(line[1]))) {
      continue;
    }
    std::istringstream ls(line.substr(1));
    Vec3 p;
    if (!(ls >> p.x() >> p.y() >> p.z()) || !p.allFinite()) {
      parse_fail(path, "malformed vertex on line " + std::to_string(line_no));
    }
    cloud.points.push_back(p);
  }
  if (cloud.points.empty()) {
    throw Error(ErrorCode::EmptyCloud, path.string() + " has no vertices");
  }
  return cloud;
}

std::string lower_ext(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace

PointCloud load_point_cloud(const std::filesystem::path& path, CloudFormat format) {
  if (format == CloudFormat::Obj) {
    return read_obj(path);
  }
  return read_ply(path, format);
}

PointCloud load_point_cloud(const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".obj") {
    return read_obj(path);
  }
  if (ext == ".ply") {
    return read_ply(path, std::nullopt);
  }
  throw Error(ErrorCode::ParseError, "unrecognised point cloud extension: " + path.string());
}

std::optional<CloudFormat> parse_cloud_format(std::string_view name) {
  if (name == "ply-ascii") return CloudFormat::PlyAscii;
  if (name == "ply-binary-le") return CloudFormat::PlyBinaryLE;
  if (name == "obj") return CloudFormat::Obj;
  return std::nullopt;
}

void write_ply_ascii(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::IoError, "cannot write " + path.string());
  }
  out << "ply\nformat ascii 1.0\n";
  if (!cloud.id.empty()) {
    out << "comment id " << cloud.id << "\n";
  }
  out << "element vertex " << cloud.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.normals) {
    out << "property double nx\nproperty double ny\nproperty double nz\n";
  }
  if (cloud.curvatures) {
    out << "property double curvature\n";
  }
  out << "end_header\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    out << p.x() << ' ' << p.y() << ' ' << p.z();
    if (cloud.normals) {
      // Unknown normals are written as zeros; the reader maps them back to "no normal".
      const Vec3 n = cloud.has_normal(i) ? (*cloud.normals)[i] : Vec3::Zero();
      out << ' ' << n.x() << ' ' << n.y() << ' ' << n.z();
    }
    if (cloud.curvatures) {
      out << ' ' << (*cloud.curvatures)[i];
    }
    out << '\n';
  }
  if (!out) {
    throw Error(ErrorCode::IoError, "write failed for " + path.string());
  }
}

void write_ply_binary(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::IoError, "cannot write " + path.string());
  }
  out << "ply\nformat binary_little_endian 1.0\n";
  out << "element vertex " << cloud.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.normals) {
    out << "property double nx\nproperty double ny\nproperty double nz\n";
  }
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    out.write(reinterpret_cast<const char*>(cloud.points[i].data()), 3 * sizeof(double));
    if (cloud.normals) {
      const Vec3 n = cloud.has_normal(i) ? (*cloud.normals)[i] : Vec3::Zero();
      out.write(reinterpret_cast<const char*>(n.data()), 3 * sizeof(double));
    }
  }
  if (!out) {
    throw Error(ErrorCode::IoError, "write failed for " + path.string());
  }
}

std::vector<Vec3> load_points_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open " + path.string());
  }
  std::vector<Vec3> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') {
      continue;
    }
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    Vec3 p;
    if (!(ls >> p.x() >> p.y() >> p.z())) {
      if (out.empty() && line_no == 1) {
        continue;  // header row
      }
      parse_fail(path, "malformed CSV row on line " + std::to_string(line_no));
    }
    out.push_back(p);
  }
  return out;
}

std::vector<Vec3> load_point_list(const std::filesystem::path& path) {
  if (lower_ext(path) == ".csv" || lower_ext(path) == ".txt") {
    return load_points_csv(path);
  }
  return load_point_cloud(path).points;
}

}  // namespace regkit
