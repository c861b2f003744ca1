#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace hsn {

using Index = uint32_t;
using Vec3 = Eigen::Vector3d;
using Face = std::array<Index, 3>;

/// Triangle soup with validated, orientable, edge-manifold connectivity.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;

  size_t n_vertices() const { return vertices.size(); }
  size_t n_faces() const { return faces.size(); }
};

enum class MeshFormat { OBJ, OFF, PLY };

struct MeshReport {
  size_t boundary_edges = 0;
  double total_area = 0.0;
};

/// Checks every TriangleMesh invariant and throws GeometryError naming the
/// offending face/edge. Degenerate faces are those with area below
/// 1e-14 times the mean face area (or repeating a vertex).
MeshReport validate_mesh(const TriangleMesh& mesh);

TriangleMesh load_mesh(std::span<const uint8_t> bytes, MeshFormat format);
TriangleMesh load_mesh_file(const std::string& path);
MeshFormat format_from_path(const std::string& path);

std::string write_obj(const TriangleMesh& mesh);
std::string write_off(const TriangleMesh& mesh);

/// Extra per-vertex property written after x,y,z.
struct PlyProperty {
  enum class Type { U8, F32 };
  std::string name;
  Type type = Type::F32;
  std::vector<double> values;
};

/// Binary little-endian PLY with float32 positions, the given vertex
/// properties and uint8-counted int32 face lists.
std::vector<uint8_t> write_ply(const TriangleMesh& mesh, std::span<const PlyProperty> properties = {});

double face_area(const TriangleMesh& mesh, size_t f);
double total_area(const TriangleMesh& mesh);
double mean_edge_length(const TriangleMesh& mesh);

/// Uniformly rescales about the origin so the total area is 1.
TriangleMesh normalize_area(const TriangleMesh& mesh);

/// w_j = (1/3) * sum of areas of faces containing j.
std::vector<double> lumped_vertex_areas(const TriangleMesh& mesh);

/// Per-vertex orthonormal tangent frames. A complex number a+ib denotes the
/// tangent vector a*e1 + b*e2.
struct TangentFrameField {
  std::vector<Vec3> normal;
  std::vector<Vec3> e1;
  std::vector<Vec3> e2;

  size_t size() const { return normal.size(); }

  /// Coordinates of a 3D vector projected into the tangent plane of vertex i.
  std::complex<double> to_tangent(size_t i, const Vec3& v) const { return {v.dot(e1[i]), v.dot(e2[i])}; }
  Vec3 to_ambient(size_t i, std::complex<double> z) const { return z.real() * e1[i] + z.imag() * e2[i]; }
};

/// Angle-weighted vertex normals; e1 is the first incident edge (lowest
/// neighbor index) projected onto the tangent plane.
TangentFrameField build_tangent_frames(const TriangleMesh& mesh);

/// Rotates the frame at each vertex i by -angles[i], so tangent coordinates
/// expressed in the returned frames equal e^{i angles[i]} times the old ones.
TangentFrameField rotate_frames(const TangentFrameField& frames, std::span<const double> angles);

// Mesh generators used by tests, the CLI and the sphere-MNIST task.

/// Unit-radius icosphere; subdivision level 3 has 642 vertices.
TriangleMesh make_icosphere(int subdivisions);
/// Flat n x n grid over [-half, half]^2 in the xy-plane; interior vertices
/// are jittered by jitter * spacing.
TriangleMesh make_grid(int n, double half, double jitter = 0.0, uint64_t seed = 0);
/// Flat equilateral-triangle patch with `rings` hexagonal rings around the origin.
TriangleMesh make_hex_patch(int rings, double spacing);
/// Flat disc of the given radius; ring k carries 8k vertices so the mesh maps
/// onto itself under rotations by multiples of 45 degrees.
TriangleMesh make_octagonal_disc(int rings, double radius);
/// Torus with nu x nv vertices, parameters jittered and a radial bump field
/// added so triangles and curvature are irregular.
TriangleMesh make_irregular_torus(int nu, int nv, double jitter, uint64_t seed);

}  // namespace hsn
