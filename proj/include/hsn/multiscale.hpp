#pragma once

#include <span>
#include <vector>

#include "hsn/geometry.hpp"
#include "hsn/mesh.hpp"

namespace hsn {

/// Greedy farthest point sampling over `level_vertices`, starting at `seed`.
/// Returns ceil(ratio * n) mesh vertex ids; ties go to the lowest vertex id.
std::vector<Index> farthest_point_sampling(const GeodesicDistance& geodesic, std::span<const Index> level_vertices,
                                           double ratio, Index seed);
std::vector<Index> farthest_point_sampling(const TriangleMesh& mesh, std::span<const Index> level_vertices,
                                           double ratio, Index seed);

/// {j : distance[j] <= eps} together with `center`, ascending.
std::vector<Index> geodesic_disc_support(std::span<const double> distance, double eps, Index center);

/// One scale of the hierarchy. Node ids are positions in `vertices`; charts
/// use those level-local ids.
struct ScaleLevel {
  std::vector<Index> vertices;       // mesh vertex ids
  double radius = 0.0;               // support radius eps_l
  std::vector<LogMapChart> charts;   // one per node, neighbors as level-local ids
  // Pooling into the next level (empty on the coarsest level):
  std::vector<Index> cluster;          // level-(l+1) node representing each node
  std::vector<double> cluster_transport;  // phi carrying each node's frame to its representative's

  size_t size() const { return vertices.size(); }
  size_t n_edges() const;
};

struct MultiScaleGraph {
  size_t n_mesh_vertices = 0;
  std::vector<ScaleLevel> levels;
};

struct MultiScaleOptions {
  int levels = 2;
  std::vector<double> ratios = {0.25};   // per pooling step; the last entry repeats
  double radius = 0.2;                   // eps_0
  std::vector<double> radii;             // explicit per-level radii; empty -> eps_l = eps_{l-1} / sqrt(ratio)
  double cluster_time = 1e-4;            // index diffusion time for unit-area meshes
};

/// Samples the hierarchy, computes every level's charts with the vector heat
/// solver in the caller's frames, and the pooling clusters with their
/// transport angles. Chart solves run in parallel over source vertices.
MultiScaleGraph build_multiscale(const TriangleMesh& mesh, const TangentFrameField& frames,
                                 const MultiScaleOptions& options);

}  // namespace hsn
