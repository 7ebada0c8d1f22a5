#pragma once

// PLY (ascii / binary_little_endian) and XYZ readers and writers.

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "gpsimp/cloud.hpp"
#include "gpsimp/error.hpp"

namespace gpsimp {

enum class CloudFormat { Auto, PlyAscii, PlyBinaryLE, Xyz };

namespace detail {

enum class PlyScalar { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

inline std::optional<PlyScalar> ply_scalar_from_name(std::string_view name) {
  if (name == "char" || name == "int8") return PlyScalar::Int8;
  if (name == "uchar" || name == "uint8") return PlyScalar::UInt8;
  if (name == "short" || name == "int16") return PlyScalar::Int16;
  if (name == "ushort" || name == "uint16") return PlyScalar::UInt16;
  if (name == "int" || name == "int32") return PlyScalar::Int32;
  if (name == "uint" || name == "uint32") return PlyScalar::UInt32;
  if (name == "float" || name == "float32") return PlyScalar::Float32;
  if (name == "double" || name == "float64") return PlyScalar::Float64;
  return std::nullopt;
}

inline std::size_t ply_scalar_size(PlyScalar t) {
  switch (t) {
    case PlyScalar::Int8:
    case PlyScalar::UInt8: return 1;
    case PlyScalar::Int16:
    case PlyScalar::UInt16: return 2;
    case PlyScalar::Int32:
    case PlyScalar::UInt32:
    case PlyScalar::Float32: return 4;
    case PlyScalar::Float64: return 8;
  }
  return 0;
}

inline bool ply_is_float(PlyScalar t) { return t == PlyScalar::Float32 || t == PlyScalar::Float64; }

struct PlyProperty {
  std::string name;
  PlyScalar type = PlyScalar::Float32;
  bool is_list = false;
  PlyScalar count_type = PlyScalar::UInt8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

struct PlyHeader {
  CloudFormat format = CloudFormat::PlyAscii;
  std::vector<PlyElement> elements;
  std::size_t body_offset = 0;
};

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool parse_double(std::string_view tok, double& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

inline bool parse_size(std::string_view tok, std::size_t& out) {
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

inline PlyHeader parse_ply_header(std::string_view bytes) {
  PlyHeader header;
  std::size_t pos = 0;
  bool saw_format = false;
  bool first = true;
  while (true) {
    if (pos >= bytes.size()) throw Error(ErrorKind::MalformedHeader, "missing end_header");
    std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string_view::npos) throw Error(ErrorKind::MalformedHeader, "missing end_header");
    std::string_view line = bytes.substr(pos, eol - pos);
    pos = eol + 1;
    auto tokens = split_ws(line);
    if (first) {
      if (tokens.size() != 1 || tokens[0] != "ply") throw Error(ErrorKind::MalformedHeader, "missing 'ply' magic");
      first = false;
      continue;
    }
    if (tokens.empty()) continue;
    const auto& kw = tokens[0];
    if (kw == "comment" || kw == "obj_info") continue;
    if (kw == "end_header") break;
    if (kw == "format") {
      if (tokens.size() != 3) throw Error(ErrorKind::MalformedHeader, "bad format line");
      if (tokens[1] == "ascii")
        header.format = CloudFormat::PlyAscii;
      else if (tokens[1] == "binary_little_endian")
        header.format = CloudFormat::PlyBinaryLE;
      else if (tokens[1] == "binary_big_endian")
        throw Error(ErrorKind::UnsupportedFormat, "big-endian PLY is not supported");
      else
        throw Error(ErrorKind::MalformedHeader, "unknown PLY format '" + std::string(tokens[1]) + "'");
      if (tokens[2] != "1.0") throw Error(ErrorKind::UnsupportedFormat, "PLY version " + std::string(tokens[2]));
      saw_format = true;
    } else if (kw == "element") {
      PlyElement el;
      if (tokens.size() != 3 || !parse_size(tokens[2], el.count))
        throw Error(ErrorKind::MalformedHeader, "bad element line");
      el.name = std::string(tokens[1]);
      header.elements.push_back(std::move(el));
    } else if (kw == "property") {
      if (header.elements.empty()) throw Error(ErrorKind::MalformedHeader, "property before element");
      PlyProperty prop;
      if (tokens.size() == 5 && tokens[1] == "list") {
        auto ct = ply_scalar_from_name(tokens[2]);
        auto it = ply_scalar_from_name(tokens[3]);
        if (!ct || !it || ply_is_float(*ct)) throw Error(ErrorKind::MalformedHeader, "bad list property");
        prop.is_list = true;
        prop.count_type = *ct;
        prop.type = *it;
        prop.name = std::string(tokens[4]);
      } else if (tokens.size() == 3) {
        auto t = ply_scalar_from_name(tokens[1]);
        if (!t) throw Error(ErrorKind::MalformedHeader, "unknown property type '" + std::string(tokens[1]) + "'");
        prop.type = *t;
        prop.name = std::string(tokens[2]);
      } else {
        throw Error(ErrorKind::MalformedHeader, "bad property line");
      }
      header.elements.back().properties.push_back(std::move(prop));
    } else {
      throw Error(ErrorKind::MalformedHeader, "unexpected header keyword '" + std::string(kw) + "'");
    }
  }
  if (!saw_format) throw Error(ErrorKind::MalformedHeader, "missing format line");
  header.body_offset = pos;
  return header;
}

template <typename T>
T load_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    auto* b = reinterpret_cast<unsigned char*>(&v);
    std::reverse(b, b + sizeof(T));
  }
  return v;
}

inline double load_scalar(const char* p, PlyScalar t) {
  switch (t) {
    case PlyScalar::Int8: return load_le<std::int8_t>(p);
    case PlyScalar::UInt8: return load_le<std::uint8_t>(p);
    case PlyScalar::Int16: return load_le<std::int16_t>(p);
    case PlyScalar::UInt16: return load_le<std::uint16_t>(p);
    case PlyScalar::Int32: return load_le<std::int32_t>(p);
    case PlyScalar::UInt32: return load_le<std::uint32_t>(p);
    case PlyScalar::Float32: return load_le<float>(p);
    case PlyScalar::Float64: return load_le<double>(p);
  }
  return 0.0;
}

// Column roles for the vertex element.
struct VertexLayout {
  int x = -1, y = -1, z = -1;
  std::vector<int> attribute_props;  // property indices loaded as attributes
};

inline VertexLayout vertex_layout(const PlyElement& el) {
  VertexLayout layout;
  for (int i = 0; i < static_cast<int>(el.properties.size()); ++i) {
    const auto& p = el.properties[i];
    if (p.is_list) continue;
    if (p.name == "x" || p.name == "y" || p.name == "z") {
      if (!ply_is_float(p.type))
        throw Error(ErrorKind::UnsupportedFormat, "vertex coordinate '" + p.name + "' must be float or double");
      (p.name == "x" ? layout.x : p.name == "y" ? layout.y : layout.z) = i;
    } else if (ply_is_float(p.type)) {
      layout.attribute_props.push_back(i);
    }
  }
  if (layout.x < 0 || layout.y < 0 || layout.z < 0)
    throw Error(ErrorKind::MalformedHeader, "vertex element lacks x, y or z");
  return layout;
}

inline PointCloud finish_cloud(std::vector<Point3> pts, const PlyElement& vertex, const VertexLayout& layout,
                               std::vector<std::vector<double>> attr_values) {
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (!pts[i].allFinite())
      throw Error(ErrorKind::NonFiniteCoordinate, "vertex " + std::to_string(i) + " has a non-finite coordinate");
  std::vector<Attribute> attrs;
  for (std::size_t a = 0; a < layout.attribute_props.size(); ++a)
    attrs.push_back({vertex.properties[layout.attribute_props[a]].name, std::move(attr_values[a])});
  return PointCloud(std::move(pts), std::move(attrs));
}

inline PointCloud parse_ply_ascii(std::string_view bytes, const PlyHeader& header) {
  std::string_view body = bytes.substr(header.body_offset);
  std::size_t pos = 0;
  auto next_line_tokens = [&]() -> std::optional<std::vector<std::string_view>> {
    while (pos < body.size()) {
      std::size_t eol = body.find('\n', pos);
      if (eol == std::string_view::npos) eol = body.size();
      auto tokens = split_ws(body.substr(pos, eol - pos));
      pos = eol + 1;
      if (!tokens.empty()) return tokens;
    }
    return std::nullopt;
  };

  for (std::size_t e = 0; e < header.elements.size(); ++e) {
    const auto& el = header.elements[e];
    if (el.name != "vertex") {
      for (std::size_t r = 0; r < el.count; ++r)
        if (!next_line_tokens())
          throw Error(ErrorKind::MalformedHeader, "body ended inside element '" + el.name + "'");
      continue;
    }
    VertexLayout layout = vertex_layout(el);
    std::vector<Point3> pts;
    pts.reserve(el.count);
    std::vector<std::vector<double>> attr_values(layout.attribute_props.size());
    for (auto& v : attr_values) v.reserve(el.count);
    std::vector<double> row(el.properties.size(), 0.0);
    for (std::size_t r = 0; r < el.count; ++r) {
      auto tokens = next_line_tokens();
      if (!tokens)
        throw Error(ErrorKind::MalformedHeader, "header declares " + std::to_string(el.count) +
                                                    " vertices but body holds " + std::to_string(r));
      std::size_t t = 0;
      for (std::size_t p = 0; p < el.properties.size(); ++p) {
        const auto& prop = el.properties[p];
        if (prop.is_list) {
          std::size_t n = 0;
          if (t >= tokens->size() || !parse_size((*tokens)[t], n))
            throw Error(ErrorKind::MalformedRecord, "bad list count in vertex " + std::to_string(r));
          t += 1 + n;
          continue;
        }
        if (t >= tokens->size())
          throw Error(ErrorKind::MalformedRecord, "vertex " + std::to_string(r) + " has too few values");
        double v = 0.0;
        if (!parse_double((*tokens)[t], v))
          throw Error(ErrorKind::MalformedRecord, "cannot parse '" + std::string((*tokens)[t]) + "'");
        row[p] = v;
        ++t;
      }
      if (t > tokens->size())
        throw Error(ErrorKind::MalformedRecord, "vertex " + std::to_string(r) + " has too few values");
      pts.emplace_back(row[layout.x], row[layout.y], row[layout.z]);
      for (std::size_t a = 0; a < layout.attribute_props.size(); ++a)
        attr_values[a].push_back(row[layout.attribute_props[a]]);
    }
    if (e + 1 == header.elements.size() && next_line_tokens())
      throw Error(ErrorKind::MalformedHeader,
                  "body holds more than the declared " + std::to_string(el.count) + " vertices");
    return finish_cloud(std::move(pts), el, layout, std::move(attr_values));
  }
  throw Error(ErrorKind::MalformedHeader, "no vertex element");
}

inline PointCloud parse_ply_binary(std::string_view bytes, const PlyHeader& header) {
  const char* data = bytes.data();
  std::size_t pos = header.body_offset;
  auto need = [&](std::size_t n, const std::string& what) {
    if (pos + n > bytes.size()) throw Error(ErrorKind::MalformedHeader, "body truncated in " + what);
  };
  auto skip_record = [&](const PlyElement& el) {
    for (const auto& prop : el.properties) {
      if (prop.is_list) {
        need(ply_scalar_size(prop.count_type), el.name);
        auto n = static_cast<std::size_t>(load_scalar(data + pos, prop.count_type));
        pos += ply_scalar_size(prop.count_type);
        need(n * ply_scalar_size(prop.type), el.name);
        pos += n * ply_scalar_size(prop.type);
      } else {
        need(ply_scalar_size(prop.type), el.name);
        pos += ply_scalar_size(prop.type);
      }
    }
  };

  for (std::size_t e = 0; e < header.elements.size(); ++e) {
    const auto& el = header.elements[e];
    if (el.name != "vertex") {
      for (std::size_t r = 0; r < el.count; ++r) skip_record(el);
      continue;
    }
    VertexLayout layout = vertex_layout(el);
    std::vector<Point3> pts;
    pts.reserve(el.count);
    std::vector<std::vector<double>> attr_values(layout.attribute_props.size());
    std::vector<double> row(el.properties.size(), 0.0);
    for (std::size_t r = 0; r < el.count; ++r) {
      for (std::size_t p = 0; p < el.properties.size(); ++p) {
        const auto& prop = el.properties[p];
        if (prop.is_list) {
          need(ply_scalar_size(prop.count_type), "vertex " + std::to_string(r));
          auto n = static_cast<std::size_t>(load_scalar(data + pos, prop.count_type));
          pos += ply_scalar_size(prop.count_type);
          need(n * ply_scalar_size(prop.type), "vertex " + std::to_string(r));
          pos += n * ply_scalar_size(prop.type);
          continue;
        }
        std::size_t sz = ply_scalar_size(prop.type);
        if (pos + sz > bytes.size())
          throw Error(ErrorKind::MalformedHeader, "header declares " + std::to_string(el.count) +
                                                      " vertices but body holds " + std::to_string(r));
        row[p] = load_scalar(data + pos, prop.type);
        pos += sz;
      }
      pts.emplace_back(row[layout.x], row[layout.y], row[layout.z]);
      for (std::size_t a = 0; a < layout.attribute_props.size(); ++a)
        attr_values[a].push_back(row[layout.attribute_props[a]]);
    }
    if (e + 1 == header.elements.size() && pos != bytes.size())
      throw Error(ErrorKind::MalformedHeader,
                  "body holds more than the declared " + std::to_string(el.count) + " vertices");
    return finish_cloud(std::move(pts), el, layout, std::move(attr_values));
  }
  throw Error(ErrorKind::MalformedHeader, "no vertex element");
}

inline PointCloud parse_xyz(std::string_view bytes) {
  std::vector<Point3> pts;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < bytes.size()) {
    std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string_view::npos) eol = bytes.size();
    auto line = bytes.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    auto tokens = split_ws(line);
    if (tokens.empty() || tokens[0].front() == '#') continue;
    if (tokens.size() < 3)
      throw Error(ErrorKind::MalformedRecord, "line " + std::to_string(line_no) + " has fewer than 3 columns");
    Point3 p;
    for (int c = 0; c < 3; ++c) {
      if (!parse_double(tokens[c], p[c]))
        throw Error(ErrorKind::MalformedRecord,
                    "line " + std::to_string(line_no) + ": cannot parse '" + std::string(tokens[c]) + "'");
    }
    if (!p.allFinite())
      throw Error(ErrorKind::NonFiniteCoordinate, "line " + std::to_string(line_no) + " has a non-finite coordinate");
    pts.push_back(p);
  }
  return PointCloud(std::move(pts));
}

inline void append_double(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

template <typename T>
void append_le(std::string& out, T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto* b = reinterpret_cast<unsigned char*>(&v);
    std::reverse(b, b + sizeof(T));
  }
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace detail

/// Parses a point cloud from an in-memory byte stream.
///
/// `CloudFormat::Auto` treats input starting with the "ply" magic line as PLY
/// and anything else as whitespace-separated XYZ. Float/double vertex
/// properties other than x, y, z are loaded as attributes; integer and list
/// properties and non-vertex elements are skipped.
inline PointCloud parse_cloud(std::string_view bytes, CloudFormat format = CloudFormat::Auto) {
  if (bytes.empty()) throw Error(ErrorKind::EmptyInput, "no bytes to parse");
  bool looks_ply = bytes.size() >= 4 && bytes.substr(0, 3) == "ply" && (bytes[3] == '\n' || bytes[3] == '\r');
  if (format == CloudFormat::Xyz || (format == CloudFormat::Auto && !looks_ply)) return detail::parse_xyz(bytes);

  detail::PlyHeader header = detail::parse_ply_header(bytes);
  if (format != CloudFormat::Auto && format != header.format)
    throw Error(ErrorKind::MalformedHeader, "PLY flavor does not match the requested format");
  if (header.format == CloudFormat::PlyAscii) return detail::parse_ply_ascii(bytes, header);
  return detail::parse_ply_binary(bytes, header);
}

/// Serializes `cloud`. Coordinates and attributes are written as doubles so
/// that both ASCII (shortest round-trip text) and binary output reproduce the
/// in-memory values exactly.
inline std::string write_cloud(const PointCloud& cloud, CloudFormat format, bool include_attributes = true) {
  std::string out;
  const auto& attrs = cloud.attributes();
  const std::size_t n_attrs = include_attributes ? attrs.size() : 0;

  if (format == CloudFormat::Xyz) {
    out.reserve(cloud.size() * 40);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const auto& p = cloud[i];
      detail::append_double(out, p.x());
      out.push_back(' ');
      detail::append_double(out, p.y());
      out.push_back(' ');
      detail::append_double(out, p.z());
      for (std::size_t a = 0; a < n_attrs; ++a) {
        out.push_back(' ');
        detail::append_double(out, attrs[a].values[i]);
      }
      out.push_back('\n');
    }
    return out;
  }
  if (format != CloudFormat::PlyAscii && format != CloudFormat::PlyBinaryLE)
    throw Error(ErrorKind::UnsupportedFormat, "an explicit output format is required");

  out += "ply\n";
  out += format == CloudFormat::PlyAscii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n";
  out += "element vertex " + std::to_string(cloud.size()) + "\n";
  out += "property double x\nproperty double y\nproperty double z\n";
  for (std::size_t a = 0; a < n_attrs; ++a) out += "property double " + attrs[a].name + "\n";
  out += "end_header\n";

  if (format == CloudFormat::PlyAscii) {
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const auto& p = cloud[i];
      detail::append_double(out, p.x());
      out.push_back(' ');
      detail::append_double(out, p.y());
      out.push_back(' ');
      detail::append_double(out, p.z());
      for (std::size_t a = 0; a < n_attrs; ++a) {
        out.push_back(' ');
        detail::append_double(out, attrs[a].values[i]);
      }
      out.push_back('\n');
    }
  } else {
    out.reserve(out.size() + cloud.size() * 8 * (3 + n_attrs));
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const auto& p = cloud[i];
      detail::append_le(out, p.x());
      detail::append_le(out, p.y());
      detail::append_le(out, p.z());
      for (std::size_t a = 0; a < n_attrs; ++a) detail::append_le(out, attrs[a].values[i]);
    }
  }
  return out;
}

/// Output format implied by a file name: ".xyz"/".txt" give XYZ, anything
/// else binary PLY (ASCII PLY when `ascii` is set).
inline CloudFormat format_for_path(const std::filesystem::path& path, bool ascii = false) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".xyz" || ext == ".txt" || ext == ".pts") return CloudFormat::Xyz;
  return ascii ? CloudFormat::PlyAscii : CloudFormat::PlyBinaryLE;
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorKind::IoFailure, "read error on '" + path.string() + "'");
  return bytes;
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`,
/// so a failed write never leaves a partial file behind.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error(ErrorKind::IoFailure, "write error on '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorKind::IoFailure, "cannot rename onto '" + path.string() + "'");
  }
}

inline PointCloud read_cloud_file(const std::filesystem::path& path, CloudFormat format = CloudFormat::Auto) {
  return parse_cloud(read_file_bytes(path), format);
}

inline void write_cloud_file(const std::filesystem::path& path, const PointCloud& cloud,
                             std::optional<CloudFormat> format = std::nullopt, bool include_attributes = true) {
  write_file_atomic(path, write_cloud(cloud, format.value_or(format_for_path(path)), include_attributes));
}

}  // namespace gpsimp
