#include "hsn/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "hsn/error.hpp"

namespace hsn {

double face_area(const TriangleMesh& mesh, size_t f) {
  const auto& [a, b, c] = mesh.faces[f];
  const Vec3& pa = mesh.vertices[a];
  return 0.5 * (mesh.vertices[b] - pa).cross(mesh.vertices[c] - pa).norm();
}

double total_area(const TriangleMesh& mesh) {
  double area = 0.0;
  for (size_t f = 0; f < mesh.n_faces(); ++f) area += face_area(mesh, f);
  return area;
}

double mean_edge_length(const TriangleMesh& mesh) {
  double sum = 0.0;
  for (const auto& face : mesh.faces)
    for (int k = 0; k < 3; ++k) sum += (mesh.vertices[face[(k + 1) % 3]] - mesh.vertices[face[k]]).norm();
  return mesh.faces.empty() ? 0.0 : sum / (3.0 * static_cast<double>(mesh.n_faces()));
}

MeshReport validate_mesh(const TriangleMesh& mesh) {
  const size_t nv = mesh.n_vertices();
  for (size_t f = 0; f < mesh.n_faces(); ++f) {
    for (Index v : mesh.faces[f])
      if (v >= nv)
        throw GeometryError("face " + std::to_string(f) + " references vertex " + std::to_string(v) + " but the mesh has " +
                            std::to_string(nv) + " vertices");
  }

  MeshReport report;
  report.total_area = total_area(mesh);
  const double mean_area = mesh.n_faces() ? report.total_area / static_cast<double>(mesh.n_faces()) : 0.0;
  for (size_t f = 0; f < mesh.n_faces(); ++f) {
    const auto& [a, b, c] = mesh.faces[f];
    if (a == b || b == c || a == c || face_area(mesh, f) < 1e-14 * mean_area)
      throw GeometryError("degenerate face " + std::to_string(f) + " (" + std::to_string(a) + ", " + std::to_string(b) +
                          ", " + std::to_string(c) + ")");
  }

  // directed edge -> count; an undirected edge may carry one face per direction
  std::map<std::pair<Index, Index>, int> directed;
  for (size_t f = 0; f < mesh.n_faces(); ++f) {
    const auto& face = mesh.faces[f];
    for (int k = 0; k < 3; ++k) {
      const Index u = face[k], v = face[(k + 1) % 3];
      if (++directed[{u, v}] > 1) {
        const bool three = directed.count({v, u}) > 0;
        throw GeometryError(std::string(three ? "non-manifold edge (" : "inconsistent winding at edge (") +
                            std::to_string(u) + ", " + std::to_string(v) + ") in face " + std::to_string(f));
      }
    }
  }
  for (const auto& [edge, count] : directed) {
    (void)count;
    if (!directed.count({edge.second, edge.first})) ++report.boundary_edges;
  }
  return report;
}

TriangleMesh normalize_area(const TriangleMesh& mesh) {
  const double area = total_area(mesh);
  if (!(area > 0.0)) throw GeometryError("cannot normalize a mesh with zero total area");
  const double scale = 1.0 / std::sqrt(area);
  TriangleMesh out = mesh;
  for (auto& p : out.vertices) p *= scale;
  return out;
}

std::vector<double> lumped_vertex_areas(const TriangleMesh& mesh) {
  std::vector<double> w(mesh.n_vertices(), 0.0);
  std::vector<bool> used(mesh.n_vertices(), false);
  for (size_t f = 0; f < mesh.n_faces(); ++f) {
    const double third = face_area(mesh, f) / 3.0;
    for (Index v : mesh.faces[f]) {
      w[v] += third;
      used[v] = true;
    }
  }
  for (size_t v = 0; v < used.size(); ++v)
    if (!used[v]) throw GeometryError("isolated vertex " + std::to_string(v) + " is contained in no face");
  return w;
}

TangentFrameField build_tangent_frames(const TriangleMesh& mesh) {
  const size_t nv = mesh.n_vertices();
  TangentFrameField frames;
  frames.normal.assign(nv, Vec3::Zero());
  frames.e1.resize(nv);
  frames.e2.resize(nv);

  std::vector<std::vector<Index>> neighbors(nv);
  for (const auto& face : mesh.faces) {
    const Vec3 fn = (mesh.vertices[face[1]] - mesh.vertices[face[0]])
                        .cross(mesh.vertices[face[2]] - mesh.vertices[face[0]])
                        .normalized();
    for (int k = 0; k < 3; ++k) {
      const Index i = face[k], j = face[(k + 1) % 3], l = face[(k + 2) % 3];
      const Vec3 u = (mesh.vertices[j] - mesh.vertices[i]).normalized();
      const Vec3 v = (mesh.vertices[l] - mesh.vertices[i]).normalized();
      const double angle = std::atan2(u.cross(v).norm(), u.dot(v));
      frames.normal[i] += angle * fn;
      neighbors[i].push_back(j);
      neighbors[i].push_back(l);
    }
  }

  for (size_t i = 0; i < nv; ++i) {
    const double len = frames.normal[i].norm();
    if (!(len > 1e-300)) throw GeometryError("vertex " + std::to_string(i) + " has no well-defined normal");
    const Vec3 n = frames.normal[i] / len;
    frames.normal[i] = n;

    auto& nb = neighbors[i];
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    bool found = false;
    for (Index j : nb) {
      const Vec3 e = mesh.vertices[j] - mesh.vertices[i];
      const Vec3 t = e - e.dot(n) * n;
      if (t.norm() > 1e-12 * e.norm()) {
        frames.e1[i] = t.normalized();
        found = true;
        break;
      }
    }
    if (!found) throw GeometryError("vertex " + std::to_string(i) + " has no edge with a tangential component");
    frames.e2[i] = n.cross(frames.e1[i]);
  }
  return frames;
}

TangentFrameField rotate_frames(const TangentFrameField& frames, std::span<const double> angles) {
  if (angles.size() != frames.size()) throw ShapeError("rotate_frames: one angle per vertex expected");
  TangentFrameField out = frames;
  for (size_t i = 0; i < frames.size(); ++i) {
    // rotating the basis by -phi turns coordinates z into e^{i phi} z
    const double c = std::cos(angles[i]), s = std::sin(angles[i]);
    out.e1[i] = c * frames.e1[i] - s * frames.e2[i];
    out.e2[i] = s * frames.e1[i] + c * frames.e2[i];
  }
  return out;
}

}  // namespace hsn
