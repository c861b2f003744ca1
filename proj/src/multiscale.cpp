#include "hsn/multiscale.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hsn/error.hpp"

namespace hsn {

size_t ScaleLevel::n_edges() const {
  size_t n = 0;
  for (const auto& c : charts) n += c.size();
  return n;
}

std::vector<Index> farthest_point_sampling(const GeodesicDistance& geodesic, std::span<const Index> level_vertices,
                                           double ratio, Index seed) {
  if (level_vertices.empty()) throw GeometryError("farthest point sampling over an empty vertex set");
  if (!(ratio > 0.0 && ratio <= 1.0)) throw GeometryError("sampling ratio must lie in (0, 1]");
  if (std::find(level_vertices.begin(), level_vertices.end(), seed) == level_vertices.end())
    throw GeometryError("sampling seed is not part of the vertex set");

  const auto target = static_cast<size_t>(std::ceil(ratio * static_cast<double>(level_vertices.size()) - 1e-9));
  std::vector<Index> candidates(level_vertices.begin(), level_vertices.end());
  std::sort(candidates.begin(), candidates.end());

  std::vector<Index> samples = {seed};
  std::vector<double> nearest = geodesic.from(seed);
  std::vector<bool> taken(geodesic.n_vertices(), false);
  taken[seed] = true;
  while (samples.size() < target) {
    Index best = candidates.front();
    double best_d = -1.0;
    for (Index c : candidates) {
      if (!taken[c] && nearest[c] > best_d) {
        best_d = nearest[c];
        best = c;
      }
    }
    samples.push_back(best);
    taken[best] = true;
    const auto d = geodesic.from(best);
    for (size_t j = 0; j < nearest.size(); ++j) nearest[j] = std::min(nearest[j], d[j]);
  }
  return samples;
}

std::vector<Index> farthest_point_sampling(const TriangleMesh& mesh, std::span<const Index> level_vertices,
                                           double ratio, Index seed) {
  return farthest_point_sampling(GeodesicDistance(mesh), level_vertices, ratio, seed);
}

std::vector<Index> geodesic_disc_support(std::span<const double> distance, double eps, Index center) {
  std::vector<Index> out;
  for (Index j = 0; j < static_cast<Index>(distance.size()); ++j)
    if (j == center || distance[j] <= eps) out.push_back(j);
  return out;
}

namespace {

// Chart with level-local neighbor ids, re-sorted ascending.
LogMapChart relabel(const LogMapChart& chart, const std::vector<Index>& local, Index source) {
  std::vector<size_t> order(chart.size());
  for (size_t e = 0; e < order.size(); ++e) order[e] = e;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return local[chart.neighbors[a]] < local[chart.neighbors[b]]; });
  LogMapChart out;
  out.source = source;
  for (size_t e : order) {
    out.neighbors.push_back(local[chart.neighbors[e]]);
    out.radius.push_back(chart.radius[e]);
    out.angle.push_back(chart.angle[e]);
    out.transport.push_back(chart.transport[e]);
  }
  return out;
}

}  // namespace

MultiScaleGraph build_multiscale(const TriangleMesh& mesh, const TangentFrameField& frames,
                                 const MultiScaleOptions& options) {
  if (options.levels < 1) throw GeometryError("need at least one level");
  if (!(options.radius > 0.0)) throw GeometryError("support radius must be positive");
  if (options.ratios.empty() && options.levels > 1) throw GeometryError("missing pooling ratios");
  if (!options.radii.empty() && options.radii.size() != static_cast<size_t>(options.levels))
    throw GeometryError("explicit radii must list one radius per level");

  const size_t nv = mesh.n_vertices();
  const GeodesicDistance geodesic(mesh);
  MultiScaleGraph graph;
  graph.n_mesh_vertices = nv;
  graph.levels.resize(options.levels);

  auto& base = graph.levels[0];
  base.vertices.resize(nv);
  for (Index i = 0; i < nv; ++i) base.vertices[i] = i;
  base.radius = options.radii.empty() ? options.radius : options.radii[0];

  for (int l = 1; l < options.levels; ++l) {
    const double ratio = options.ratios[std::min<size_t>(l - 1, options.ratios.size() - 1)];
    const auto& prev = graph.levels[l - 1];
    auto samples = farthest_point_sampling(geodesic, prev.vertices, ratio, prev.vertices.front());
    auto& level = graph.levels[l];
    level.vertices = std::move(samples);
    level.radius = options.radii.empty() ? prev.radius / std::sqrt(ratio) : options.radii[l];
  }

  // level-local ids of every mesh vertex, per level (npos when absent)
  constexpr Index npos = std::numeric_limits<Index>::max();
  std::vector<std::vector<Index>> local(options.levels, std::vector<Index>(nv, npos));
  for (int l = 0; l < options.levels; ++l)
    for (Index k = 0; k < graph.levels[l].size(); ++k) local[l][graph.levels[l].vertices[k]] = k;

  for (int l = 0; l + 1 < options.levels; ++l) {
    const auto& coarse = graph.levels[l + 1].vertices;
    const auto nearest = index_diffusion_clusters(mesh, coarse, options.cluster_time);
    auto& level = graph.levels[l];
    level.cluster.resize(level.size());
    level.cluster_transport.assign(level.size(), 0.0);
    for (Index k = 0; k < level.size(); ++k) level.cluster[k] = local[l + 1][nearest[level.vertices[k]]];
  }

  // one vector-heat solve per mesh vertex serves every level containing it
  const VectorHeatSolver solver(mesh, frames);
  for (int l = 0; l < options.levels; ++l) graph.levels[l].charts.resize(graph.levels[l].size());

  // members of each coarse cluster, keyed by the representative's mesh id
  std::vector<std::vector<std::pair<int, Index>>> members(nv);
  for (int l = 0; l + 1 < options.levels; ++l) {
    const auto& level = graph.levels[l];
    for (Index k = 0; k < level.size(); ++k)
      members[graph.levels[l + 1].vertices[level.cluster[k]]].emplace_back(l, k);
  }

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(nv); ++s) {
    const auto src = static_cast<Index>(s);
    const auto field = solver.log_map(src);
    const auto dist = geodesic.from(src);
    for (int l = 0; l < options.levels; ++l) {
      auto& level = graph.levels[l];
      const Index k = local[l][src];
      if (k == npos) continue;
      auto chart = make_chart(field, dist, level.radius, level.vertices);
      level.charts[k] = relabel(chart, local[l], k);
    }
    // written once per member: each fine node has exactly one representative
    for (const auto& [l, k] : members[src])
      graph.levels[l].cluster_transport[k] = field.transport[graph.levels[l].vertices[k]];
  }
  return graph;
}

}  // namespace hsn
