#include "hsn/precompute.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hsn/binary_io.hpp"
#include "hsn/error.hpp"

namespace hsn {

std::vector<double> interpolation_weights(double r, int rings, double eps) {
  if (rings < 1) throw ShapeError("need at least one ring");
  if (!(eps > 0.0) || !(r >= 0.0)) throw GeometryError("interpolation needs r >= 0 and eps > 0");
  std::vector<double> mu(rings + 1, 0.0);
  double s = r * rings / eps;
  if (std::abs(s - std::round(s)) < 1e-12) s = std::round(s);
  if (s >= rings) {
    mu[rings] = 1.0;
    return mu;
  }
  const auto q = static_cast<int>(std::floor(s));
  const double alpha = s - q;
  mu[q] = 1.0 - alpha;
  mu[q + 1] = alpha;
  return mu;
}

std::vector<double> normalize_neighborhood_weights(std::span<const double> weights) {
  if (weights.empty()) throw GeometryError("cannot normalize an empty neighborhood");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw GeometryError("neighborhood weights must be positive");
    sum += w;
  }
  std::vector<double> out(weights.begin(), weights.end());
  for (double& w : out) w /= sum;
  return out;
}

int ConvSupportTensor::order_slot(int m) const {
  for (size_t s = 0; s < orders.size(); ++s)
    if (orders[s] == m) return static_cast<int>(s);
  throw ShapeError("rotation order " + std::to_string(m) + " is not stored in this tensor");
}

std::complex<double> ConvSupportTensor::entry(size_t edge, int m, int q) const {
  const size_t at = edge * edge_stride() + order_slot(m) * block_stride() + 2 * static_cast<size_t>(q);
  return {values[at], values[at + 1]};
}

void ConvSupportTensor::append(const ConvSupportTensor& other) {
  if (rings == 0 && orders.empty()) {
    rings = other.rings;
    orders = other.orders;
  }
  if (rings != other.rings || orders != other.orders) throw ShapeError("appending tensors with different layouts");
  target.insert(target.end(), other.target.begin(), other.target.end());
  source.insert(source.end(), other.source.begin(), other.source.end());
  transport.insert(transport.end(), other.transport.begin(), other.transport.end());
  values.insert(values.end(), other.values.begin(), other.values.end());
}

ConvSupportTensor assemble_conv_tensor(const LogMapChart& chart, std::span<const double> weights,
                                       std::span<const int> orders, int rings, double eps) {
  if (chart.size() == 0) throw GeometryError("empty support for vertex " + std::to_string(chart.source));
  std::vector<double> local(chart.size());
  for (size_t e = 0; e < chart.size(); ++e) local[e] = weights[chart.neighbors[e]];
  const auto w = normalize_neighborhood_weights(local);

  ConvSupportTensor t;
  t.rings = rings;
  t.orders.assign(orders.begin(), orders.end());
  t.values.assign(chart.size() * t.edge_stride(), 0.0);
  for (size_t e = 0; e < chart.size(); ++e) {
    const Index j = chart.neighbors[e];
    t.target.push_back(chart.source);
    t.source.push_back(j);
    t.transport.push_back(chart.transport[e]);
    const auto mu = interpolation_weights(chart.radius[e], rings, eps);
    for (size_t s = 0; s < orders.size(); ++s) {
      const int m = orders[s];
      if (m != 0 && j == chart.source) continue;
      const std::complex<double> phase = std::polar(1.0, m * chart.angle[e]);
      for (int q = 0; q < rings; ++q) {
        if (mu[q] == 0.0) continue;
        const auto v = w[e] * mu[q] * phase;
        const size_t at = e * t.edge_stride() + s * t.block_stride() + 2 * static_cast<size_t>(q);
        t.values[at] = v.real();
        t.values[at + 1] = v.imag();
      }
    }
  }
  return t;
}

PrecomputedGraph assemble_graph(const MultiScaleGraph& graph, std::span<const double> vertex_weights, int rings,
                                std::span<const int> orders) {
  if (vertex_weights.size() != graph.n_mesh_vertices) throw ShapeError("vertex weights do not match the mesh");
  PrecomputedGraph out;
  out.n_mesh_vertices = static_cast<uint32_t>(graph.n_mesh_vertices);
  out.rings = rings;
  out.orders.assign(orders.begin(), orders.end());
  for (const auto& level : graph.levels) {
    LevelOperators ops;
    ops.vertices = level.vertices;
    ops.radius = level.radius;
    ops.cluster = level.cluster;
    ops.cluster_transport = level.cluster_transport;
    ops.conv.rings = rings;
    ops.conv.orders = out.orders;
    std::vector<double> w(level.size());
    for (size_t k = 0; k < level.size(); ++k) w[k] = vertex_weights[level.vertices[k]];
    for (const auto& chart : level.charts) ops.conv.append(assemble_conv_tensor(chart, w, orders, rings, level.radius));
    out.levels.push_back(std::move(ops));
  }
  return out;
}

std::vector<uint8_t> serialize_cache(const PrecomputedGraph& graph) {
  io::ByteWriter out;
  out.put_bytes(std::span(reinterpret_cast<const uint8_t*>("HSNP"), 4));
  out.put(kCacheVersion);
  out.put(graph.n_mesh_vertices);
  out.put(static_cast<uint8_t>(graph.levels.size()));
  out.put(static_cast<uint8_t>(graph.rings));
  out.put(static_cast<uint8_t>(graph.orders.size()));
  for (int m : graph.orders) out.put(static_cast<int8_t>(m));
  for (const auto& level : graph.levels) out.put(level.radius);
  out.put_crc(0);

  for (const auto& level : graph.levels) {
    const size_t start = out.size();
    out.put(static_cast<uint32_t>(level.size()));
    for (Index v : level.vertices) out.put(static_cast<uint32_t>(v));
    const auto& t = level.conv;
    out.put(static_cast<uint32_t>(t.n_edges()));
    for (size_t e = 0; e < t.n_edges(); ++e) {
      out.put(static_cast<uint32_t>(t.target[e]));
      out.put(static_cast<uint32_t>(t.source[e]));
      out.put(t.transport[e]);
      for (size_t k = 0; k < t.edge_stride(); ++k) out.put(t.values[e * t.edge_stride() + k]);
    }
    out.put(static_cast<uint32_t>(level.cluster.size()));
    for (size_t k = 0; k < level.cluster.size(); ++k) {
      out.put(static_cast<uint32_t>(level.cluster[k]));
      out.put(level.cluster_transport[k]);
    }
    out.put_crc(start);
  }
  return out.take();
}

PrecomputedGraph parse_cache(std::span<const uint8_t> bytes) {
  io::ByteReader in(bytes);
  const auto magic = in.get_bytes(4);
  if (!std::equal(magic.begin(), magic.end(), "HSNP")) throw FormatError("not an HSNP cache (bad magic)");
  const auto version = in.get<uint16_t>();
  if (version != kCacheVersion)
    throw FormatError("unsupported cache version " + std::to_string(version) + " (expected " +
                      std::to_string(kCacheVersion) + ")");
  PrecomputedGraph g;
  g.n_mesh_vertices = in.get<uint32_t>();
  const auto n_levels = in.get<uint8_t>();
  g.rings = in.get<uint8_t>();
  const auto n_orders = in.get<uint8_t>();
  for (int k = 0; k < n_orders; ++k) g.orders.push_back(in.get<int8_t>());
  g.levels.resize(n_levels);
  for (auto& level : g.levels) level.radius = in.get<double>();
  in.check_crc(0, "header");

  for (size_t l = 0; l < g.levels.size(); ++l) {
    auto& level = g.levels[l];
    const size_t start = in.position();
    const auto n_nodes = in.get<uint32_t>();
    level.vertices.resize(n_nodes);
    for (auto& v : level.vertices) v = in.get<uint32_t>();
    auto& t = level.conv;
    t.rings = g.rings;
    t.orders = g.orders;
    const auto n_edges = in.get<uint32_t>();
    t.target.resize(n_edges);
    t.source.resize(n_edges);
    t.transport.resize(n_edges);
    t.values.resize(n_edges * t.edge_stride());
    for (size_t e = 0; e < n_edges; ++e) {
      t.target[e] = in.get<uint32_t>();
      t.source[e] = in.get<uint32_t>();
      t.transport[e] = in.get<double>();
      for (size_t k = 0; k < t.edge_stride(); ++k) t.values[e * t.edge_stride() + k] = in.get<double>();
    }
    const auto n_cluster = in.get<uint32_t>();
    level.cluster.resize(n_cluster);
    level.cluster_transport.resize(n_cluster);
    for (size_t k = 0; k < n_cluster; ++k) {
      level.cluster[k] = in.get<uint32_t>();
      level.cluster_transport[k] = in.get<double>();
    }
    in.check_crc(start, "level " + std::to_string(l));
  }
  if (!in.at_end()) throw FormatError("trailing bytes after the last cache section");

  // structural checks so a corrupted-but-checksummed file cannot index out of range
  for (size_t l = 0; l < g.levels.size(); ++l) {
    const auto& level = g.levels[l];
    for (size_t e = 0; e < level.conv.n_edges(); ++e)
      if (level.conv.target[e] >= level.size() || level.conv.source[e] >= level.size())
        throw FormatError("cache edge index out of range at level " + std::to_string(l));
    const size_t next = l + 1 < g.levels.size() ? g.levels[l + 1].size() : 0;
    if (!level.cluster.empty() && level.cluster.size() != level.size())
      throw FormatError("cache cluster map has the wrong size at level " + std::to_string(l));
    for (Index c : level.cluster)
      if (c >= next) throw FormatError("cache cluster index out of range at level " + std::to_string(l));
  }
  return g;
}

void save_cache(const PrecomputedGraph& graph, const std::string& path) { io::write_file(path, serialize_cache(graph)); }

PrecomputedGraph load_cache(const std::string& path) { return parse_cache(io::read_file(path)); }

PrecomputedGraph precompute_mesh(const TriangleMesh& mesh, const TangentFrameField& frames,
                                 const MultiScaleOptions& options, int rings, std::span<const int> orders) {
  const auto graph = build_multiscale(mesh, frames, options);
  return assemble_graph(graph, lumped_vertex_areas(mesh), rings, orders);
}

}  // namespace hsn
