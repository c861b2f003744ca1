#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "hsn/error.hpp"
#include "hsn/mesh.hpp"

namespace hsn {

TriangleMesh make_icosphere(int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriangleMesh mesh;
  for (const auto& p : {Vec3(-1, t, 0), Vec3(1, t, 0), Vec3(-1, -t, 0), Vec3(1, -t, 0), Vec3(0, -1, t), Vec3(0, 1, t),
                        Vec3(0, -1, -t), Vec3(0, 1, -t), Vec3(t, 0, -1), Vec3(t, 0, 1), Vec3(-t, 0, -1), Vec3(-t, 0, 1)})
    mesh.vertices.push_back(p.normalized());
  mesh.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};

  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<Index, Index>, Index> midpoints;
    auto midpoint = [&](Index a, Index b) {
      const auto key = std::minmax(a, b);
      auto it = midpoints.find(key);
      if (it != midpoints.end()) return it->second;
      mesh.vertices.push_back((mesh.vertices[a] + mesh.vertices[b]).normalized());
      const auto id = static_cast<Index>(mesh.vertices.size() - 1);
      midpoints.emplace(key, id);
      return id;
    };
    std::vector<Face> faces;
    faces.reserve(mesh.faces.size() * 4);
    for (const auto& [a, b, c] : mesh.faces) {
      const Index ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
      faces.push_back({a, ab, ca});
      faces.push_back({b, bc, ab});
      faces.push_back({c, ca, bc});
      faces.push_back({ab, bc, ca});
    }
    mesh.faces = std::move(faces);
  }
  return mesh;
}

TriangleMesh make_grid(int n, double half, double jitter, uint64_t seed) {
  if (n < 2) throw GeometryError("grid needs at least 2 vertices per side");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  const double h = 2.0 * half / (n - 1);
  TriangleMesh mesh;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      Vec3 p(-half + j * h, -half + i * h, 0.0);
      if (i > 0 && j > 0 && i < n - 1 && j < n - 1 && jitter > 0.0) {
        p.x() += jitter * h * u(rng);
        p.y() += jitter * h * u(rng);
      }
      mesh.vertices.push_back(p);
    }
  }
  for (int i = 0; i + 1 < n; ++i) {
    for (int j = 0; j + 1 < n; ++j) {
      const auto a = static_cast<Index>(i * n + j), b = a + 1, c = a + static_cast<Index>(n), d = c + 1;
      mesh.faces.push_back({a, b, d});
      mesh.faces.push_back({a, d, c});
    }
  }
  return mesh;
}

TriangleMesh make_hex_patch(int rings, double spacing) {
  TriangleMesh mesh;
  std::map<std::pair<int, int>, Index> id;
  const Vec3 u(spacing, 0, 0), v(0.5 * spacing, 0.5 * std::sqrt(3.0) * spacing, 0);
  auto inside = [&](int a, int b) { return std::abs(a) <= rings && std::abs(b) <= rings && std::abs(a + b) <= rings; };
  for (int b = -rings; b <= rings; ++b)
    for (int a = -rings; a <= rings; ++a)
      if (inside(a, b)) {
        id[{a, b}] = static_cast<Index>(mesh.vertices.size());
        mesh.vertices.push_back(a * u + b * v);
      }
  for (int b = -rings; b <= rings; ++b) {
    for (int a = -rings; a <= rings; ++a) {
      if (inside(a, b) && inside(a + 1, b) && inside(a, b + 1))
        mesh.faces.push_back({id[{a, b}], id[{a + 1, b}], id[{a, b + 1}]});
      if (inside(a + 1, b) && inside(a + 1, b + 1) && inside(a, b + 1))
        mesh.faces.push_back({id[{a + 1, b}], id[{a + 1, b + 1}], id[{a, b + 1}]});
    }
  }
  return mesh;
}

TriangleMesh make_octagonal_disc(int rings, double radius) {
  if (rings < 1) throw GeometryError("disc needs at least one ring");
  TriangleMesh mesh;
  std::vector<Index> offset(rings + 1);
  mesh.vertices.emplace_back(0, 0, 0);
  for (int k = 1; k <= rings; ++k) {
    offset[k] = static_cast<Index>(mesh.vertices.size());
    const int count = 8 * k;
    for (int n = 0; n < count; ++n) {
      const double a = 2.0 * std::numbers::pi * n / count;
      const double r = radius * k / rings;
      mesh.vertices.emplace_back(r * std::cos(a), r * std::sin(a), 0.0);
    }
  }
  auto at = [&](int k, int n) -> Index {
    if (k == 0) return 0;
    return offset[k] + static_cast<Index>(((n % (8 * k)) + 8 * k) % (8 * k));
  };
  // each 45-degree sector is triangulated identically
  for (int k = 0; k < rings; ++k) {
    for (int s = 0; s < 8; ++s) {
      for (int t = 0; t <= k; ++t) mesh.faces.push_back({at(k, s * k + t), at(k + 1, s * (k + 1) + t), at(k + 1, s * (k + 1) + t + 1)});
      for (int t = 0; t < k; ++t) mesh.faces.push_back({at(k, s * k + t), at(k + 1, s * (k + 1) + t + 1), at(k, s * k + t + 1)});
    }
  }
  return mesh;
}

TriangleMesh make_irregular_torus(int nu, int nv, double jitter, uint64_t seed) {
  if (nu < 3 || nv < 3) throw GeometryError("torus needs at least 3 samples per direction");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-0.5, 0.5);
  const double R = 1.0, r = 0.4;
  const double du = 2.0 * std::numbers::pi / nu, dv = 2.0 * std::numbers::pi / nv;
  TriangleMesh mesh;
  for (int i = 0; i < nu; ++i) {
    for (int j = 0; j < nv; ++j) {
      // nonuniform spacing along u plus jitter gives irregular triangles
      const double u = i * du + 0.35 * std::sin(i * du) + jitter * du * unif(rng);
      const double v = j * dv + jitter * dv * unif(rng);
      const double rr = r * (1.0 + 0.2 * std::sin(3.0 * u) * std::cos(2.0 * v));
      mesh.vertices.emplace_back((R + rr * std::cos(v)) * std::cos(u), (R + rr * std::cos(v)) * std::sin(u), rr * std::sin(v));
    }
  }
  auto at = [&](int i, int j) { return static_cast<Index>(((i + nu) % nu) * nv + ((j + nv) % nv)); };
  for (int i = 0; i < nu; ++i) {
    for (int j = 0; j < nv; ++j) {
      mesh.faces.push_back({at(i, j), at(i + 1, j), at(i + 1, j + 1)});
      mesh.faces.push_back({at(i, j), at(i + 1, j + 1), at(i, j + 1)});
    }
  }
  return mesh;
}

}  // namespace hsn
