#include <cmath>
#include <numbers>
#include <string>

#include "doctest.h"
#include "hsn/error.hpp"
#include "hsn/mesh.hpp"

using namespace hsn;

namespace {

std::span<const uint8_t> as_bytes(const std::string& s) {
  return {reinterpret_cast<const uint8_t*>(s.data()), s.size()};
}

// Regular tetrahedron with unit edge length.
const std::string kTetraObj =
    "# regular tetrahedron\n"
    "v 0 0 0\n"
    "v 1 0 0\n"
    "v 0.5 0.8660254037844386 0\n"
    "v 0.5 0.28867513459481287 0.816496580927726\n"
    "f 1 3 2\n"
    "f 1 2 4\n"
    "f 2 3 4\n"
    "f 3 1 4\n";

}  // namespace

TEST_CASE("tetrahedron OBJ loads with 4 vertices and 4 faces") {
  const auto mesh = load_mesh(as_bytes(kTetraObj), MeshFormat::OBJ);
  CHECK(mesh.n_vertices() == 4);
  CHECK(mesh.n_faces() == 4);
  CHECK(validate_mesh(mesh).boundary_edges == 0);
}

TEST_CASE("icosphere OFF round trip has 642 vertices") {
  const auto sphere = make_icosphere(3);
  const auto mesh = load_mesh(as_bytes(write_off(sphere)), MeshFormat::OFF);
  CHECK(mesh.n_vertices() == 642);
  CHECK(mesh.n_faces() == 1280);
}

TEST_CASE("face reusing a vertex is rejected as degenerate") {
  const std::string obj = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 2\n";
  CHECK_THROWS_AS(load_mesh(as_bytes(obj), MeshFormat::OBJ), GeometryError);
  try {
    load_mesh(as_bytes(obj), MeshFormat::OBJ);
  } catch (const GeometryError& e) {
    CHECK(std::string(e.what()).find("face 0") != std::string::npos);
  }
}

TEST_CASE("near-zero-area face is rejected") {
  const std::string obj = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 2 0 0\nv 3 0 0\nv 2.5 1e-16 0\nf 1 2 3\nf 4 5 6\n";
  CHECK_THROWS_AS(load_mesh(as_bytes(obj), MeshFormat::OBJ), GeometryError);
}

TEST_CASE("non-manifold edge and inconsistent winding are rejected") {
  // three faces sharing edge (0,1)
  const std::string fan = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 -1 0\nv 0 0 1\nf 1 2 3\nf 2 1 4\nf 1 2 5\n";
  CHECK_THROWS_AS(load_mesh(as_bytes(fan), MeshFormat::OBJ), GeometryError);
  const std::string flipped = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3\nf 2 3 4\n";
  CHECK_THROWS_AS(load_mesh(as_bytes(flipped), MeshFormat::OBJ), GeometryError);
}

TEST_CASE("parse failures and out-of-range indices are reported") {
  CHECK_THROWS_AS(load_mesh(as_bytes("v 0 0 zero\n"), MeshFormat::OBJ), FormatError);
  CHECK_THROWS_AS(load_mesh(as_bytes("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 7\n"), MeshFormat::OBJ), GeometryError);
  CHECK_THROWS_AS(load_mesh(as_bytes("OFF\n3 1 0\n0 0 0\n1 0 0\n"), MeshFormat::OFF), FormatError);
  CHECK_THROWS_AS(load_mesh(as_bytes("ply\nformat ascii 1.0\nend_header\n"), MeshFormat::PLY), FormatError);
}

TEST_CASE("boundary edges are counted, not rejected") {
  const auto grid = make_grid(4, 1.0);
  CHECK(validate_mesh(grid).boundary_edges == 12);
}

TEST_CASE("binary PLY round trip preserves geometry within float precision") {
  const auto mesh = make_irregular_torus(8, 10, 0.3, 5);
  std::vector<PlyProperty> props = {{"label", PlyProperty::Type::U8, std::vector<double>(mesh.n_vertices(), 3.0)},
                                    {"feat_mag", PlyProperty::Type::F32, std::vector<double>(mesh.n_vertices(), 0.5)}};
  const auto bytes = write_ply(mesh, props);
  const auto back = load_mesh(bytes, MeshFormat::PLY);
  REQUIRE(back.n_vertices() == mesh.n_vertices());
  CHECK(back.faces == mesh.faces);
  for (size_t v = 0; v < mesh.n_vertices(); ++v) CHECK((back.vertices[v] - mesh.vertices[v]).norm() < 1e-6);
}

TEST_CASE("normalize_area") {
  SUBCASE("sphere is scaled by 1/sqrt(area)") {
    const auto sphere = make_icosphere(4);
    const double area = total_area(sphere);
    const auto unit = normalize_area(sphere);
    CHECK(std::abs(total_area(unit) - 1.0) < 1e-10);
    CHECK(unit.vertices[0].norm() == doctest::Approx(1.0 / std::sqrt(area)).epsilon(1e-12));
    // the icosphere approaches the analytic sphere area 4 pi
    CHECK(unit.vertices[0].norm() == doctest::Approx(1.0 / std::sqrt(4.0 * std::numbers::pi)).epsilon(1e-2));
  }
  SUBCASE("idempotent") {
    const auto once = normalize_area(make_irregular_torus(12, 9, 0.2, 1));
    const auto twice = normalize_area(once);
    for (size_t v = 0; v < once.n_vertices(); ++v) CHECK((once.vertices[v] - twice.vertices[v]).norm() < 1e-12);
  }
  SUBCASE("empty mesh") { CHECK_THROWS_AS(normalize_area(TriangleMesh{}), GeometryError); }
}

TEST_CASE("lumped vertex areas") {
  SUBCASE("regular tetrahedron: sqrt(3)/4 per vertex") {
    const auto mesh = load_mesh(as_bytes(kTetraObj), MeshFormat::OBJ);
    for (double w : lumped_vertex_areas(mesh)) CHECK(w == doctest::Approx(std::sqrt(3.0) / 4.0).epsilon(1e-12));
  }
  SUBCASE("single triangle: A/3 each") {
    TriangleMesh tri{{Vec3(0, 0, 0), Vec3(2, 0, 0), Vec3(0, 3, 0)}, {{0, 1, 2}}};
    for (double w : lumped_vertex_areas(tri)) CHECK(w == doctest::Approx(1.0));
  }
  SUBCASE("partition of total area") {
    const auto mesh = make_irregular_torus(20, 25, 0.3, 7);
    const auto w = lumped_vertex_areas(mesh);
    double sum = 0.0;
    for (double x : w) {
      CHECK(x > 0.0);
      sum += x;
    }
    CHECK(std::abs(sum - total_area(mesh)) < 1e-10 * total_area(mesh));
  }
  SUBCASE("isolated vertex") {
    TriangleMesh tri{{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(5, 5, 5)}, {{0, 1, 2}}};
    CHECK_THROWS_AS(lumped_vertex_areas(tri), GeometryError);
  }
}

TEST_CASE("tangent frames") {
  SUBCASE("planar grid normals are +z") {
    const auto frames = build_tangent_frames(make_grid(6, 1.0, 0.3, 2));
    for (const auto& n : frames.normal) CHECK((n - Vec3(0, 0, 1)).norm() < 1e-10);
  }
  SUBCASE("icosphere normals are radial within 2 degrees") {
    const auto sphere = make_icosphere(3);
    const auto frames = build_tangent_frames(sphere);
    double worst = 0.0;
    for (size_t i = 0; i < sphere.n_vertices(); ++i)
      worst = std::max(worst, std::acos(std::min(1.0, frames.normal[i].dot(sphere.vertices[i].normalized()))));
    CHECK(worst * 180.0 / std::numbers::pi < 2.0);
  }
  SUBCASE("orthonormal and right-handed on an irregular mesh") {
    const auto frames = build_tangent_frames(make_irregular_torus(20, 25, 0.4, 3));
    double residual = 0.0;
    for (size_t i = 0; i < frames.size(); ++i) {
      residual = std::max({residual, std::abs(frames.normal[i].norm() - 1.0), std::abs(frames.e1[i].norm() - 1.0),
                           std::abs(frames.e2[i].norm() - 1.0), std::abs(frames.e1[i].dot(frames.e2[i])),
                           std::abs(frames.e1[i].dot(frames.normal[i])), std::abs(frames.e2[i].dot(frames.normal[i]))});
      CHECK(frames.e1[i].cross(frames.e2[i]).dot(frames.normal[i]) > 0.0);
    }
    CHECK(residual < 1e-10);
  }
  SUBCASE("deterministic across loads") {
    const auto text = write_obj(make_irregular_torus(10, 12, 0.3, 9));
    const auto a = build_tangent_frames(load_mesh(as_bytes(text), MeshFormat::OBJ));
    const auto b = build_tangent_frames(load_mesh(as_bytes(text), MeshFormat::OBJ));
    CHECK(a.e1 == b.e1);
    CHECK(a.normal == b.normal);
  }
  SUBCASE("rotate_frames multiplies coordinates by e^{i phi}") {
    const auto mesh = make_icosphere(1);
    const auto frames = build_tangent_frames(mesh);
    std::vector<double> phi(frames.size());
    for (size_t i = 0; i < phi.size(); ++i) phi[i] = 0.37 * static_cast<double>(i) - 1.0;
    const auto rotated = rotate_frames(frames, phi);
    const Vec3 v = mesh.vertices[5] - mesh.vertices[0];
    for (size_t i = 0; i < frames.size(); ++i) {
      const auto expect = std::polar(1.0, phi[i]) * frames.to_tangent(i, v);
      CHECK(std::abs(rotated.to_tangent(i, v) - expect) < 1e-12);
    }
  }
}
