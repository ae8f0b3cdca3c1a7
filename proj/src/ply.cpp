#include "gpnav/cloud.hpp"
#include "gpnav/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace gpnav {
namespace {

struct PlyProperty {
  std::string name;
  std::size_t size = 0;  // bytes; 0 for list properties
  bool is_float = false;
  bool is_list = false;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;

  std::size_t stride() const {
    std::size_t s = 0;
    for (const auto& p : properties) s += p.size;
    return s;
  }
};

std::size_t scalar_size(const std::string& type) {
  static const std::array<std::pair<const char*, std::size_t>, 16> kTypes{{
      {"char", 1}, {"int8", 1}, {"uchar", 1}, {"uint8", 1},
      {"short", 2}, {"int16", 2}, {"ushort", 2}, {"uint16", 2},
      {"int", 4}, {"int32", 4}, {"uint", 4}, {"uint32", 4},
      {"float", 4}, {"float32", 4}, {"double", 8}, {"float64", 8},
  }};
  for (const auto& [name, size] : kTypes)
    if (type == name) return size;
  return 0;
}

bool is_float_type(const std::string& type) {
  return type == "float" || type == "float32" || type == "double" || type == "float64";
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  return {std::istream_iterator<std::string>(in), std::istream_iterator<std::string>()};
}

template <typename T>
T read_le(const char* bytes) {
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    auto raw = std::bit_cast<std::array<char, sizeof(T)>>(value);
    std::reverse(raw.begin(), raw.end());
    value = std::bit_cast<T>(raw);
  }
  return value;
}

template <typename T>
void write_le(std::ostream& out, T value) {
  auto raw = std::bit_cast<std::array<char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
  out.write(raw.data(), raw.size());
}

}  // namespace

Points3 load_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open PLY file '" + path.string() + "'");
  const std::string source = path.string();

  auto header_error = [&](int line_no, const std::string& line, const std::string& why) {
    return parse_error(source + ": PLY header line " + std::to_string(line_no) + " '" + line +
                       "': " + why);
  };

  std::string line;
  int line_no = 0;
  bool binary = false;
  bool saw_format = false;
  std::vector<PlyElement> elements;

  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next_line() || line != "ply") throw header_error(1, line, "expected magic 'ply'");
  for (;;) {
    if (!next_line()) throw parse_error(source + ": PLY header ended without 'end_header'");
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    const std::string& key = tok[0];
    if (key == "end_header") break;
    if (key == "comment" || key == "obj_info") continue;
    if (key == "format") {
      if (tok.size() != 3) throw header_error(line_no, line, "malformed format line");
      if (tok[1] == "ascii") {
        binary = false;
      } else if (tok[1] == "binary_little_endian") {
        binary = true;
      } else {
        throw header_error(line_no, line, "unsupported encoding '" + tok[1] + "'");
      }
      saw_format = true;
    } else if (key == "element") {
      if (tok.size() != 3) throw header_error(line_no, line, "malformed element line");
      PlyElement el;
      el.name = tok[1];
      const auto res =
          std::from_chars(tok[2].data(), tok[2].data() + tok[2].size(), el.count);
      if (res.ec != std::errc() || res.ptr != tok[2].data() + tok[2].size())
        throw header_error(line_no, line, "invalid element count");
      elements.push_back(std::move(el));
    } else if (key == "property") {
      if (elements.empty()) throw header_error(line_no, line, "property before any element");
      PlyProperty prop;
      if (tok.size() == 5 && tok[1] == "list") {
        if (!scalar_size(tok[2]) || !scalar_size(tok[3]))
          throw header_error(line_no, line, "unknown list type");
        prop.is_list = true;
        prop.name = tok[4];
      } else if (tok.size() == 3) {
        prop.size = scalar_size(tok[1]);
        if (prop.size == 0) throw header_error(line_no, line, "unknown property type '" + tok[1] + "'");
        prop.is_float = is_float_type(tok[1]);
        prop.name = tok[2];
      } else {
        throw header_error(line_no, line, "malformed property line");
      }
      elements.back().properties.push_back(std::move(prop));
    } else {
      throw header_error(line_no, line, "unknown keyword '" + key + "'");
    }
  }
  if (!saw_format) throw parse_error(source + ": PLY header has no format line");

  std::size_t vertex_idx = elements.size();
  for (std::size_t i = 0; i < elements.size(); ++i)
    if (elements[i].name == "vertex") {
      vertex_idx = i;
      break;
    }
  if (vertex_idx == elements.size()) throw parse_error(source + ": PLY has no vertex element");
  const PlyElement& vertex = elements[vertex_idx];

  std::array<int, 3> xyz{-1, -1, -1};
  std::array<std::size_t, 3> offset{};
  {
    std::size_t off = 0;
    for (std::size_t p = 0; p < vertex.properties.size(); ++p) {
      const auto& prop = vertex.properties[p];
      if (prop.is_list) throw parse_error(source + ": list property in vertex element is unsupported");
      for (int axis = 0; axis < 3; ++axis) {
        if (prop.name == std::string(1, static_cast<char>('x' + axis))) {
          if (!prop.is_float)
            throw parse_error(source + ": vertex property '" + prop.name + "' must be float");
          xyz[axis] = static_cast<int>(p);
          offset[axis] = off;
        }
      }
      off += prop.size;
    }
  }
  if (xyz[0] < 0 || xyz[1] < 0 || xyz[2] < 0)
    throw parse_error(source + ": vertex element lacks x, y, z properties");

  // Skip elements that precede the vertex block.
  for (std::size_t e = 0; e < vertex_idx; ++e) {
    const auto& el = elements[e];
    if (binary) {
      for (const auto& p : el.properties)
        if (p.is_list)
          throw parse_error(source + ": cannot skip list element '" + el.name +
                            "' before vertices in binary PLY");
      in.ignore(static_cast<std::streamsize>(el.count * el.stride()));
    } else {
      for (std::size_t i = 0; i < el.count; ++i) next_line();
    }
  }

  Points3 points;
  points.reserve(vertex.count);
  auto truncated = [&](std::size_t got) {
    return parse_error(source + ": truncated PLY, expected " + std::to_string(vertex.count) +
                       " vertices but read " + std::to_string(got));
  };

  if (binary) {
    const std::size_t stride = vertex.stride();
    std::vector<char> buf(stride);
    for (std::size_t i = 0; i < vertex.count; ++i) {
      if (!in.read(buf.data(), static_cast<std::streamsize>(stride))) throw truncated(i);
      Point3 p;
      for (int axis = 0; axis < 3; ++axis) {
        const auto& prop = vertex.properties[xyz[axis]];
        const char* src = buf.data() + offset[axis];
        p[axis] = prop.size == 4 ? static_cast<double>(read_le<float>(src)) : read_le<double>(src);
      }
      points.push_back(p);
    }
  } else {
    for (std::size_t i = 0; i < vertex.count; ++i) {
      do {
        if (!next_line()) throw truncated(i);
      } while (split_ws(line).empty());
      const auto tok = split_ws(line);
      if (tok.size() < vertex.properties.size())
        throw parse_error(source + ": line " + std::to_string(line_no) + " '" + line +
                          "': expected " + std::to_string(vertex.properties.size()) + " values");
      Point3 p;
      for (int axis = 0; axis < 3; ++axis) {
        try {
          std::size_t used = 0;
          p[axis] = std::stod(tok[xyz[axis]], &used);
          if (used != tok[xyz[axis]].size()) throw std::invalid_argument("trailing");
          if (vertex.properties[xyz[axis]].size == 4) p[axis] = static_cast<float>(p[axis]);
        } catch (const std::exception&) {
          throw parse_error(source + ": line " + std::to_string(line_no) + " '" + line +
                            "': bad coordinate");
        }
      }
      points.push_back(p);
    }
  }
  return points;
}

void save_ply(const Points3& points, const std::filesystem::path& path, PlyEncoding encoding) {
  if (points.empty()) throw validation_error("save_ply: point list is empty");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write PLY file '" + path.string() + "'");

  out << "ply\n"
      << "format " << (encoding == PlyEncoding::kAscii ? "ascii" : "binary_little_endian")
      << " 1.0\n"
      << "element vertex " << points.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "end_header\n";
  if (encoding == PlyEncoding::kAscii) {
    out.precision(9);  // float32 round trip
    for (const auto& p : points)
      out << static_cast<float>(p.x()) << ' ' << static_cast<float>(p.y()) << ' '
          << static_cast<float>(p.z()) << '\n';
  } else {
    for (const auto& p : points)
      for (int axis = 0; axis < 3; ++axis) write_le(out, static_cast<float>(p[axis]));
  }
  if (!out) throw io_error("failed while writing PLY file '" + path.string() + "'");
}

}  // namespace gpnav
