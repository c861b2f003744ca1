#include <charconv>
#include <cstring>
#include <sstream>
#include <string_view>

#include "hsn/binary_io.hpp"
#include "hsn/error.hpp"
#include "hsn/mesh.hpp"

namespace hsn {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_double(std::string_view tok, size_t line) {
  // from_chars for double is available in libstdc++ 11
  double v = 0.0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size())
    throw FormatError("line " + std::to_string(line) + ": expected a number, got '" + std::string(tok) + "'");
  return v;
}

long parse_long(std::string_view tok, size_t line) {
  long v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size())
    throw FormatError("line " + std::to_string(line) + ": expected an integer, got '" + std::string(tok) + "'");
  return v;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  size_t line = 0, pos = 0;
  while (pos <= text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++line;
    fn(text.substr(pos, end - pos), line);
    pos = end + 1;
  }
}

TriangleMesh parse_obj(std::string_view text) {
  TriangleMesh mesh;
  for_each_line(text, [&](std::string_view raw, size_t line) {
    auto s = trim(raw);
    if (s.empty() || s[0] == '#') return;
    auto tok = split_ws(s);
    if (tok[0] == "v") {
      if (tok.size() < 4) throw FormatError("line " + std::to_string(line) + ": vertex needs 3 coordinates");
      mesh.vertices.emplace_back(parse_double(tok[1], line), parse_double(tok[2], line), parse_double(tok[3], line));
    } else if (tok[0] == "f") {
      if (tok.size() != 4)
        throw FormatError("line " + std::to_string(line) + ": only triangular faces are supported");
      Face face{};
      for (int k = 0; k < 3; ++k) {
        auto t = tok[k + 1];
        t = t.substr(0, t.find('/'));
        long idx = parse_long(t, line);
        if (idx < 0) idx = static_cast<long>(mesh.vertices.size()) + idx + 1;
        if (idx < 1) throw FormatError("line " + std::to_string(line) + ": invalid vertex index");
        face[k] = static_cast<Index>(idx - 1);
      }
      mesh.faces.push_back(face);
    }
    // other records (vn, vt, g, o, s, usemtl, ...) are ignored
  });
  return mesh;
}

TriangleMesh parse_off(std::string_view text) {
  std::vector<std::pair<std::string_view, size_t>> lines;
  for_each_line(text, [&](std::string_view raw, size_t line) {
    auto s = raw.substr(0, raw.find('#'));
    s = trim(s);
    if (!s.empty()) lines.emplace_back(s, line);
  });
  if (lines.empty()) throw FormatError("empty OFF file");
  size_t cur = 0;
  auto header = split_ws(lines[0].first);
  if (header[0] != "OFF") throw FormatError("line 1: missing OFF header");
  std::vector<std::string_view> counts(header.begin() + 1, header.end());
  if (counts.empty()) {
    if (lines.size() < 2) throw FormatError("OFF file has no element counts");
    counts = split_ws(lines[++cur].first);
  }
  if (counts.size() < 2) throw FormatError("OFF element counts malformed");
  const long nv = parse_long(counts[0], lines[cur].second);
  const long nf = parse_long(counts[1], lines[cur].second);
  if (nv < 0 || nf < 0) throw FormatError("negative OFF element counts");
  if (lines.size() < cur + 1 + static_cast<size_t>(nv + nf)) throw FormatError("OFF file truncated");

  TriangleMesh mesh;
  mesh.vertices.reserve(nv);
  for (long v = 0; v < nv; ++v) {
    auto [s, line] = lines[++cur];
    auto tok = split_ws(s);
    if (tok.size() < 3) throw FormatError("line " + std::to_string(line) + ": vertex needs 3 coordinates");
    mesh.vertices.emplace_back(parse_double(tok[0], line), parse_double(tok[1], line), parse_double(tok[2], line));
  }
  for (long f = 0; f < nf; ++f) {
    auto [s, line] = lines[++cur];
    auto tok = split_ws(s);
    if (tok.empty() || parse_long(tok[0], line) != 3 || tok.size() < 4)
      throw FormatError("line " + std::to_string(line) + ": only triangular faces are supported");
    Face face{};
    for (int k = 0; k < 3; ++k) {
      const long idx = parse_long(tok[k + 1], line);
      if (idx < 0) throw FormatError("line " + std::to_string(line) + ": negative vertex index");
      face[k] = static_cast<Index>(idx);
    }
    mesh.faces.push_back(face);
  }
  return mesh;
}

struct PlyScalar {
  std::string name;
  size_t size = 0;
  bool is_float = false;
  bool is_signed = false;
};

PlyScalar ply_type(std::string_view t) {
  if (t == "char" || t == "int8") return {"", 1, false, true};
  if (t == "uchar" || t == "uint8") return {"", 1, false, false};
  if (t == "short" || t == "int16") return {"", 2, false, true};
  if (t == "ushort" || t == "uint16") return {"", 2, false, false};
  if (t == "int" || t == "int32") return {"", 4, false, true};
  if (t == "uint" || t == "uint32") return {"", 4, false, false};
  if (t == "float" || t == "float32") return {"", 4, true, true};
  if (t == "double" || t == "float64") return {"", 8, true, true};
  throw FormatError("unsupported PLY property type '" + std::string(t) + "'");
}

double read_scalar(io::ByteReader& in, const PlyScalar& t) {
  if (t.is_float) return t.size == 4 ? static_cast<double>(in.get<float>()) : in.get<double>();
  switch (t.size) {
    case 1: return t.is_signed ? in.get<int8_t>() : in.get<uint8_t>();
    case 2: return t.is_signed ? in.get<int16_t>() : in.get<uint16_t>();
    default: return t.is_signed ? in.get<int32_t>() : static_cast<double>(in.get<uint32_t>());
  }
}

TriangleMesh parse_ply(std::span<const uint8_t> bytes) {
  const std::string_view all(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  const auto header_end = all.find("end_header");
  if (all.substr(0, 3) != "ply" || header_end == std::string_view::npos) throw FormatError("missing PLY header");
  size_t body = all.find('\n', header_end);
  if (body == std::string_view::npos) throw FormatError("PLY header not terminated");
  ++body;

  struct Element {
    std::string name;
    size_t count = 0;
    std::vector<PlyScalar> props;
    bool has_list = false;
    PlyScalar list_count, list_item;
  };
  std::vector<Element> elements;
  bool binary_le = false;
  size_t line_no = 0;
  for_each_line(all.substr(0, header_end), [&](std::string_view raw, size_t line) {
    line_no = line;
    auto tok = split_ws(trim(raw));
    if (tok.empty()) return;
    if (tok[0] == "format") {
      if (tok.size() < 2 || tok[1] != "binary_little_endian")
        throw FormatError("only binary_little_endian PLY files are supported");
      binary_le = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3) throw FormatError("line " + std::to_string(line) + ": malformed element");
      elements.push_back({std::string(tok[1]), static_cast<size_t>(parse_long(tok[2], line)), {}, false, {}, {}});
    } else if (tok[0] == "property") {
      if (elements.empty()) throw FormatError("line " + std::to_string(line) + ": property before element");
      auto& el = elements.back();
      if (tok.size() >= 5 && tok[1] == "list") {
        el.has_list = true;
        el.list_count = ply_type(tok[2]);
        el.list_item = ply_type(tok[3]);
        el.list_item.name = std::string(tok[4]);
      } else if (tok.size() == 3) {
        auto t = ply_type(tok[1]);
        t.name = std::string(tok[2]);
        el.props.push_back(t);
      } else {
        throw FormatError("line " + std::to_string(line) + ": malformed property");
      }
    }
  });
  if (!binary_le) throw FormatError("PLY format line missing");

  TriangleMesh mesh;
  io::ByteReader in(bytes.subspan(body));
  for (const auto& el : elements) {
    if (el.name == "vertex") {
      int ix = -1, iy = -1, iz = -1;
      for (size_t p = 0; p < el.props.size(); ++p) {
        if (el.props[p].name == "x") ix = static_cast<int>(p);
        if (el.props[p].name == "y") iy = static_cast<int>(p);
        if (el.props[p].name == "z") iz = static_cast<int>(p);
      }
      if (ix < 0 || iy < 0 || iz < 0) throw FormatError("PLY vertex element lacks x/y/z");
      mesh.vertices.reserve(el.count);
      std::vector<double> vals(el.props.size());
      for (size_t v = 0; v < el.count; ++v) {
        for (size_t p = 0; p < el.props.size(); ++p) vals[p] = read_scalar(in, el.props[p]);
        mesh.vertices.emplace_back(vals[ix], vals[iy], vals[iz]);
      }
    } else if (el.name == "face") {
      if (!el.has_list || !el.props.empty()) throw FormatError("PLY face element must be a single index list");
      for (size_t f = 0; f < el.count; ++f) {
        const auto n = static_cast<long>(read_scalar(in, el.list_count));
        if (n != 3) throw FormatError("PLY face " + std::to_string(f) + " is not a triangle");
        Face face{};
        for (int k = 0; k < 3; ++k) {
          const double idx = read_scalar(in, el.list_item);
          if (idx < 0) throw FormatError("PLY face " + std::to_string(f) + " has a negative index");
          face[k] = static_cast<Index>(idx);
        }
        mesh.faces.push_back(face);
      }
    } else {
      // skip unknown fixed-size elements
      if (el.has_list) throw FormatError("unsupported PLY list element '" + el.name + "'");
      size_t stride = 0;
      for (const auto& p : el.props) stride += p.size;
      in.get_bytes(stride * el.count);
    }
  }
  (void)line_no;
  return mesh;
}

}  // namespace

MeshFormat format_from_path(const std::string& path) {
  auto dot = path.find_last_of('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == "obj") return MeshFormat::OBJ;
  if (ext == "off") return MeshFormat::OFF;
  if (ext == "ply") return MeshFormat::PLY;
  throw IoError("unrecognized mesh extension in '" + path + "'");
}

TriangleMesh load_mesh(std::span<const uint8_t> bytes, MeshFormat format) {
  TriangleMesh mesh;
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  switch (format) {
    case MeshFormat::OBJ: mesh = parse_obj(text); break;
    case MeshFormat::OFF: mesh = parse_off(text); break;
    case MeshFormat::PLY: mesh = parse_ply(bytes); break;
  }
  if (mesh.faces.empty()) throw GeometryError("mesh has no faces");
  validate_mesh(mesh);
  return mesh;
}

TriangleMesh load_mesh_file(const std::string& path) {
  const auto format = format_from_path(path);
  const auto bytes = io::read_file(path);
  return load_mesh(bytes, format);
}

std::string write_obj(const TriangleMesh& mesh) {
  std::ostringstream out;
  out.precision(17);
  for (const auto& p : mesh.vertices) out << "v " << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  return out.str();
}

std::string write_off(const TriangleMesh& mesh) {
  std::ostringstream out;
  out.precision(17);
  out << "OFF\n" << mesh.n_vertices() << ' ' << mesh.n_faces() << " 0\n";
  for (const auto& p : mesh.vertices) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  for (const auto& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  return out.str();
}

std::vector<uint8_t> write_ply(const TriangleMesh& mesh, std::span<const PlyProperty> properties) {
  for (const auto& p : properties)
    if (p.values.size() != mesh.n_vertices()) throw ShapeError("PLY property '" + p.name + "' has wrong length");

  std::ostringstream header;
  header << "ply\nformat binary_little_endian 1.0\n"
         << "element vertex " << mesh.n_vertices() << "\n"
         << "property float x\nproperty float y\nproperty float z\n";
  for (const auto& p : properties)
    header << "property " << (p.type == PlyProperty::Type::U8 ? "uchar " : "float ") << p.name << "\n";
  header << "element face " << mesh.n_faces() << "\n"
         << "property list uchar int vertex_indices\nend_header\n";

  io::ByteWriter out;
  const auto h = header.str();
  out.put_bytes(std::span(reinterpret_cast<const uint8_t*>(h.data()), h.size()));
  for (size_t v = 0; v < mesh.n_vertices(); ++v) {
    for (int k = 0; k < 3; ++k) out.put(static_cast<float>(mesh.vertices[v][k]));
    for (const auto& p : properties) {
      if (p.type == PlyProperty::Type::U8)
        out.put(static_cast<uint8_t>(p.values[v]));
      else
        out.put(static_cast<float>(p.values[v]));
    }
  }
  for (const auto& f : mesh.faces) {
    out.put(static_cast<uint8_t>(3));
    for (Index v : f) out.put(static_cast<int32_t>(v));
  }
  return out.take();
}

}  // namespace hsn
