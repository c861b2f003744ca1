#pragma once

#include <complex>
#include <span>
#include <string>
#include <vector>

#include "hsn/geometry.hpp"
#include "hsn/multiscale.hpp"

namespace hsn {

/// Hat-basis weights mu_0..mu_Q for rings at q * eps / Q. Sums to 1; every
/// r >= eps puts all mass on ring Q, whose profile value is fixed to zero.
std::vector<double> interpolation_weights(double r, int rings, double eps);

/// Rescales positive weights so they sum to one.
std::vector<double> normalize_neighborhood_weights(std::span<const double> weights);

/// Per-edge convolution blocks w_j mu_q(r_ij) e^{i m theta_ij} for each
/// rotation order m, stored as Q x 2 real blocks, plus the transport angle.
struct ConvSupportTensor {
  int rings = 0;
  std::vector<int> orders;
  std::vector<Index> target;       // i
  std::vector<Index> source;       // j
  std::vector<double> transport;   // phi_ji
  std::vector<double> values;      // [edge][order slot][q][re, im]

  size_t n_edges() const { return target.size(); }
  size_t block_stride() const { return static_cast<size_t>(rings) * 2; }
  size_t edge_stride() const { return orders.size() * block_stride(); }
  int order_slot(int m) const;
  std::complex<double> entry(size_t edge, int m, int q) const;

  void append(const ConvSupportTensor& other);
};

/// Assembles the blocks of one chart. `weights` are indexed by the chart's
/// neighbor ids and are normalized over the chart before use. For m != 0 the
/// entry of the source itself is zero (its angle is undefined).
ConvSupportTensor assemble_conv_tensor(const LogMapChart& chart, std::span<const double> weights,
                                       std::span<const int> orders, int rings, double eps);

/// Everything a network needs at one scale.
struct LevelOperators {
  std::vector<Index> vertices;        // mesh ids of the level's nodes
  double radius = 0.0;
  ConvSupportTensor conv;
  std::vector<Index> cluster;         // representative in the next level
  std::vector<double> cluster_transport;

  size_t size() const { return vertices.size(); }
};

struct PrecomputedGraph {
  uint32_t n_mesh_vertices = 0;
  int rings = 0;
  std::vector<int> orders;
  std::vector<LevelOperators> levels;
};

/// Assembles every level. `vertex_weights` are per mesh vertex (lumped areas).
PrecomputedGraph assemble_graph(const MultiScaleGraph& graph, std::span<const double> vertex_weights, int rings,
                                std::span<const int> orders);

/// Hierarchy plus assembly in the given frames, weighted by lumped areas.
PrecomputedGraph precompute_mesh(const TriangleMesh& mesh, const TangentFrameField& frames,
                                 const MultiScaleOptions& options, int rings, std::span<const int> orders);

inline constexpr uint16_t kCacheVersion = 1;

std::vector<uint8_t> serialize_cache(const PrecomputedGraph& graph);
PrecomputedGraph parse_cache(std::span<const uint8_t> bytes);
void save_cache(const PrecomputedGraph& graph, const std::string& path);
PrecomputedGraph load_cache(const std::string& path);

}  // namespace hsn
