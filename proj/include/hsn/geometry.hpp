#pragma once

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <complex>
#include <span>
#include <vector>

#include "hsn/mesh.hpp"

namespace hsn {

using Complex = std::complex<double>;
using SparseReal = Eigen::SparseMatrix<double>;
using SparseComplex = Eigen::SparseMatrix<Complex>;

/// Positive semi-definite cotan Laplacian: off-diagonal (i,j) = -(cot a + cot b)/2,
/// diagonal = minus the off-diagonal row sum.
SparseReal cotan_laplacian(const TriangleMesh& mesh);

/// Angle of edge i->j, projected into the tangent plane of i, measured in frame i.
double edge_angle(const TriangleMesh& mesh, const TangentFrameField& frames, Index i, Index j);

/// Angle rho_ij rotating frame j into frame i across edge ij: a tangent vector
/// with coordinates z at j is transported to e^{i rho_ij} z at i.
double edge_transport_angle(const TriangleMesh& mesh, const TangentFrameField& frames, Index i, Index j);

/// Hermitian connection Laplacian; entry (i,j) is the cotan entry times e^{i rho_ij}.
SparseComplex connection_laplacian(const TriangleMesh& mesh, const TangentFrameField& frames);

/// Transport of an order-M feature by angle phi: e^{i M phi} x.
inline Complex transport_vector(double phi, Complex x, int order) { return std::polar(1.0, order * phi) * x; }

/// Logarithmic map from one source to every vertex.
struct LogMapField {
  Index source = 0;
  std::vector<Complex> log;        // log_source(j) in the frame of the source
  std::vector<double> transport;   // phi_{j -> source}
};

/// Chart of a geodesic disc around one vertex.
struct LogMapChart {
  Index source = 0;
  std::vector<Index> neighbors;    // sorted ascending, contains the source
  std::vector<double> radius;      // r_ij
  std::vector<double> angle;       // theta_ij in [0, 2pi), 0 for the source itself
  std::vector<double> transport;   // phi_ji, carries frame j to frame i

  size_t size() const { return neighbors.size(); }
};

/// Heat-flow solver for the log map and parallel transport. Owns the
/// factorizations of M + tL (scalar) and M + tL_conn (vector), built once and
/// reused for every source. Read-only after construction; safe to share.
///
/// The log map comes from diffusing an affine section (position of the source
/// expressed in each tangent plane, plus a homogeneous weight) with the
/// connection Laplacian. The homogeneous part is the scalar heat kernel, the
/// translation part solves the vector system with an edge-vector source term.
/// On flat meshes the result is exact up to solver round-off.
class VectorHeatSolver {
 public:
  /// t <= 0 selects the default diffusion time (mean edge length)^2.
  VectorHeatSolver(const TriangleMesh& mesh, const TangentFrameField& frames, double t = 0.0);

  double diffusion_time() const { return t_; }
  size_t n_vertices() const { return mass_.size(); }

  /// (M + tL)^{-1} applied to the indicator of `sources`.
  Eigen::VectorXd scalar_heat(std::span<const Index> sources) const;
  /// Horizontal transport of the unit vector e1 at `source` (unnormalized).
  Eigen::VectorXcd horizontal_field(Index source) const;
  LogMapField log_map(Index source) const;

 private:
  struct Spoke {
    Index to;
    double weight;   // cotan weight
    Complex edge;    // p_to - p_from in the frame of `from`, full edge length
  };

  double t_ = 0.0;
  std::vector<double> mass_;
  std::vector<std::vector<Spoke>> spokes_;
  Eigen::SimplicialLDLT<SparseReal> scalar_;
  Eigen::SimplicialLDLT<SparseComplex> vector_;
};

/// Frame-independent geodesic distances. The log-map radius (computed in the
/// mesh's own deterministic frames) is accurate up to well past half the
/// diameter but collapses towards the cut locus, where the diffused
/// displacements cancel. A heat-method distance (normalized heat gradient
/// followed by a Poisson solve) is globally reliable but less accurate near
/// the source and along boundaries. The radius is used unless it falls below
/// 90% of the heat-method value.
class GeodesicDistance {
 public:
  explicit GeodesicDistance(const TriangleMesh& mesh, double t = 0.0);

  std::vector<double> from(Index source) const;
  /// Multi-source distance: pointwise minimum of single-source distances.
  std::vector<double> from(std::span<const Index> sources) const;
  /// Plain heat-method distance (gradient normalization + Poisson solve).
  std::vector<double> heat_method(Index source) const;

  size_t n_vertices() const { return solver_.n_vertices(); }

 private:
  struct FaceGeometry {
    Vec3 grad[3];   // gradient of the hat function of each corner
    Vec3 cot_edge[3];  // sum over the corner's two edges of cot(opposite) * edge / 2
  };

  VectorHeatSolver solver_;
  std::vector<Face> faces_;
  std::vector<FaceGeometry> face_geometry_;
  Eigen::SimplicialLDLT<SparseReal> poisson_;
};

/// Heat-method geodesic distance from a vertex set (0 at the sources).
std::vector<double> heat_geodesic_distance(const TriangleMesh& mesh, std::span<const Index> sources, double t = 0.0);

/// Nearest sampled vertex for every vertex, by diffusing each sampled index for
/// a short time and taking the strongest response. `t` is relative to a mesh of
/// unit area and is rescaled by the actual total area.
std::vector<Index> index_diffusion_clusters(const TriangleMesh& mesh, std::span<const Index> sampled, double t = 1e-4);

/// Restricts a log-map field to {j : distance[j] <= eps} intersected with
/// `candidates` (all vertices when empty), always including the source.
LogMapChart make_chart(const LogMapField& field, std::span<const double> distance, double eps,
                       std::span<const Index> candidates = {});

/// Chart of the geodesic disc of radius eps around vertex i.
LogMapChart vector_heat_logmap(const TriangleMesh& mesh, const TangentFrameField& frames, Index i, double eps);

}  // namespace hsn
