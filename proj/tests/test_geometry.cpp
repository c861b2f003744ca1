#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include "doctest.h"
#include "hsn/error.hpp"
#include "hsn/geometry.hpp"
#include "test_util.hpp"

using namespace hsn;
using namespace hsn::testing;

namespace {

double max_abs(const SparseComplex& A) {
  double m = 0.0;
  for (Eigen::Index k = 0; k < A.outerSize(); ++k)
    for (SparseComplex::InnerIterator it(A, k); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

}  // namespace

TEST_CASE("cotan Laplacian") {
  SUBCASE("rows sum to zero and the matrix is symmetric") {
    const auto mesh = make_irregular_torus(15, 12, 0.4, 4);
    const SparseReal L = cotan_laplacian(mesh);
    const Eigen::VectorXd rows = L * Eigen::VectorXd::Ones(L.cols());
    CHECK(rows.cwiseAbs().maxCoeff() < 1e-10);
    const SparseReal diff = L - SparseReal(L.transpose());
    CHECK(diff.norm() == 0.0);
  }
  SUBCASE("equilateral grid interior entries are -1/sqrt(3)") {
    const auto mesh = make_hex_patch(3, 0.7);
    const SparseReal L = cotan_laplacian(mesh);
    // vertex at the origin is interior; all six neighbors share two equilateral triangles
    Index center = 0;
    for (Index i = 0; i < mesh.n_vertices(); ++i)
      if (mesh.vertices[i].norm() < 1e-12) center = i;
    int count = 0;
    for (SparseReal::InnerIterator it(L, center); it; ++it) {
      if (it.row() == it.col()) continue;
      CHECK(it.value() == doctest::Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-12));
      ++count;
    }
    CHECK(count == 6);
  }
}

TEST_CASE("connection Laplacian") {
  SUBCASE("flat mesh with aligned frames equals the cotan Laplacian") {
    const auto mesh = make_grid(7, 1.0, 0.3, 11);
    const auto frames = aligned_planar_frames(mesh.n_vertices());
    const SparseComplex Lc = connection_laplacian(mesh, frames);
    const SparseComplex L = cotan_laplacian(mesh).cast<Complex>();
    CHECK(max_abs(Lc - L) < 1e-12);
  }
  SUBCASE("Hermitian") {
    const auto mesh = make_icosphere(2);
    const SparseComplex Lc = connection_laplacian(mesh, build_tangent_frames(mesh));
    CHECK(max_abs(Lc - SparseComplex(Lc.adjoint())) < 1e-12);
  }
  SUBCASE("rotating one frame conjugates its row and column") {
    const auto mesh = make_irregular_torus(10, 8, 0.3, 2);
    const auto frames = build_tangent_frames(mesh);
    const Index k = 17;
    const double phi = 0.83;
    std::vector<double> angles(mesh.n_vertices(), 0.0);
    angles[k] = phi;
    const SparseComplex H = connection_laplacian(mesh, frames);
    const SparseComplex Hr = connection_laplacian(mesh, rotate_frames(frames, angles));
    Eigen::VectorXcd d = Eigen::VectorXcd::Ones(static_cast<Eigen::Index>(mesh.n_vertices()));
    d[k] = std::polar(1.0, phi);
    const SparseComplex expect = d.asDiagonal() * H * d.conjugate().asDiagonal();
    CHECK(max_abs(Hr - expect) < 1e-12);
  }
}

TEST_CASE("heat geodesic distance") {
  const auto sphere = make_icosphere(3);
  const Index src = 0;
  const Index one[] = {src};
  const auto d = heat_geodesic_distance(sphere, one);
  CHECK(d[src] == 0.0);

  SUBCASE("matches great-circle distance within 2% on [0.1, pi/2]") {
    double worst = 0.0;
    for (size_t j = 0; j < sphere.n_vertices(); ++j) {
      const double g = great_circle(sphere.vertices[src], sphere.vertices[j]);
      CHECK(d[j] >= 0.0);
      if (g >= 0.1 && g <= std::numbers::pi / 2) worst = std::max(worst, std::abs(d[j] - g) / g);
    }
    MESSAGE("max relative error " << worst);
    CHECK(worst < 0.02);
  }
  SUBCASE("stays accurate through the cut locus") {
    // the far side is where diffused displacements cancel; the antipode must not read as near
    double worst = 0.0;
    for (size_t j = 0; j < sphere.n_vertices(); ++j) {
      const double g = great_circle(sphere.vertices[src], sphere.vertices[j]);
      if (g >= 0.1) worst = std::max(worst, std::abs(d[j] - g) / g);
      if (g >= 2.9) CHECK(d[j] > 2.8);
    }
    MESSAGE("max relative error on [0.1, pi] " << worst);
    CHECK(worst < 0.15);
  }
  SUBCASE("two sources give the pointwise minimum") {
    const Index other[] = {300};
    const Index both[] = {src, 300};
    const auto d2 = heat_geodesic_distance(sphere, other);
    const auto dboth = heat_geodesic_distance(sphere, both);
    for (size_t j = 0; j < d.size(); ++j) CHECK(std::abs(dboth[j] - std::min(d[j], d2[j])) < 1e-6);
  }
  SUBCASE("empty source set") { CHECK_THROWS_AS(heat_geodesic_distance(sphere, {}), GeometryError); }
}

TEST_CASE("index diffusion clusters") {
  const auto sphere = normalize_area(make_icosphere(3));
  SUBCASE("two antipodal samples split the sphere into hemispheres") {
    const Index a = 0;
    Index b = 0;
    for (Index i = 0; i < sphere.n_vertices(); ++i)
      if (sphere.vertices[i].dot(sphere.vertices[a]) < sphere.vertices[b].dot(sphere.vertices[a])) b = i;
    const Index sampled[] = {a, b};
    const auto cluster = index_diffusion_clusters(sphere, sampled);
    CHECK(cluster[a] == a);
    CHECK(cluster[b] == b);
    // reference assignment from geodesic distances
    const Index sa[] = {a}, sb[] = {b};
    const auto da = heat_geodesic_distance(sphere, sa), db = heat_geodesic_distance(sphere, sb);
    size_t agree = 0;
    for (size_t j = 0; j < sphere.n_vertices(); ++j) agree += cluster[j] == (da[j] <= db[j] ? a : b);
    CHECK(static_cast<double>(agree) / sphere.n_vertices() >= 0.95);
  }
  SUBCASE("all vertices sampled gives the identity") {
    std::vector<Index> all(sphere.n_vertices());
    for (Index i = 0; i < all.size(); ++i) all[i] = i;
    const auto cluster = index_diffusion_clusters(sphere, all);
    for (Index i = 0; i < all.size(); ++i) CHECK(cluster[i] == i);
  }
}

TEST_CASE("vector heat log map") {
  SUBCASE("planar square: Euclidean polar coordinates within 1e-3") {
    const auto mesh = make_grid(21, 1.0, 0.3, 3);
    const auto frames = build_tangent_frames(mesh);
    const Index i = 220;
    const auto chart = vector_heat_logmap(mesh, frames, i, 0.8);
    REQUIRE(std::find(chart.neighbors.begin(), chart.neighbors.end(), i) != chart.neighbors.end());
    double worst_r = 0.0, worst_theta = 0.0;
    for (size_t e = 0; e < chart.size(); ++e) {
      const Index j = chart.neighbors[e];
      if (j == i) {
        CHECK(chart.radius[e] == 0.0);
        continue;
      }
      const Complex exact = frames.to_tangent(i, mesh.vertices[j] - mesh.vertices[i]);
      worst_r = std::max(worst_r, std::abs(chart.radius[e] - std::abs(exact)) / std::abs(exact));
      worst_theta = std::max(worst_theta, std::abs(angle_diff(chart.angle[e], std::arg(exact))));
      CHECK(chart.angle[e] >= 0.0);
      CHECK(chart.angle[e] < 2.0 * std::numbers::pi);
    }
    CHECK(worst_r < 1e-3);
    CHECK(worst_theta < 1e-3);
  }
  SUBCASE("icosphere radii match great-circle distance within 2% up to pi/2") {
    const auto sphere = make_icosphere(3);
    const auto frames = build_tangent_frames(sphere);
    const VectorHeatSolver solver(sphere, frames);
    double worst = 0.0;
    for (Index i : {0u, 100u, 641u}) {
      const auto field = solver.log_map(i);
      for (size_t j = 0; j < sphere.n_vertices(); ++j) {
        const double g = great_circle(sphere.vertices[i], sphere.vertices[j]);
        if (g >= 0.1 && g <= std::numbers::pi / 2) worst = std::max(worst, std::abs(std::abs(field.log[j]) - g) / g);
      }
    }
    MESSAGE("max relative radius error " << worst);
    CHECK(worst < 0.02);
  }
  SUBCASE("transport coefficients have unit modulus and charts are frame covariant") {
    const auto mesh = make_irregular_torus(16, 12, 0.3, 8);
    const auto frames = build_tangent_frames(mesh);
    const auto angles = random_angles(mesh.n_vertices(), 42);
    const auto rotated = rotate_frames(frames, angles);
    const Index i = 33;
    const auto a = vector_heat_logmap(mesh, frames, i, 0.6);
    const auto b = vector_heat_logmap(mesh, rotated, i, 0.6);
    REQUIRE(a.neighbors == b.neighbors);
    for (size_t e = 0; e < a.size(); ++e) {
      const Index j = a.neighbors[e];
      CHECK(std::abs(std::abs(std::polar(1.0, a.transport[e])) - 1.0) < 1e-12);
      CHECK(a.radius[e] == b.radius[e]);
      if (j != i) CHECK(std::abs(angle_diff(b.angle[e], a.angle[e] + angles[i])) < 1e-10);
      CHECK(std::abs(angle_diff(b.transport[e], a.transport[e] + angles[i] - angles[j])) < 1e-10);
    }
  }
}

TEST_CASE("transport_vector") {
  const Complex x(0.3, -1.2);
  CHECK(transport_vector(1.234, x, 0) == x);
  for (double phi : {-2.0, 0.1, 3.0})
    for (int m : {-1, 0, 1}) CHECK(std::abs(std::abs(transport_vector(phi, x, m)) - std::abs(x)) < 1e-15);

  SUBCASE("transport back and forth is the identity on flat meshes") {
    const auto mesh = make_grid(11, 1.0, 0.3, 6);
    const auto frames = build_tangent_frames(mesh);
    const VectorHeatSolver solver(mesh, frames);
    const auto fi = solver.log_map(60), fj = solver.log_map(40);
    const Complex there = transport_vector(fi.transport[40], x, 1);   // 40 -> 60
    const Complex back = transport_vector(fj.transport[60], there, 1);  // 60 -> 40
    CHECK(std::abs(back - x) < 1e-12);
  }
}

TEST_CASE("holonomy around spherical triangles follows Gauss-Bonnet") {
  const auto sphere = make_icosphere(3);
  const auto frames = build_tangent_frames(sphere);
  const VectorHeatSolver solver(sphere, frames);
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<Index> pick(0, static_cast<Index>(sphere.n_vertices() - 1));
  int tested = 0;
  double worst = 0.0;
  std::vector<std::optional<LogMapField>> fields(sphere.n_vertices());
  auto field = [&](Index v) -> const LogMapField& {
    if (!fields[v]) fields[v] = solver.log_map(v);
    return *fields[v];
  };
  while (tested < 20) {
    const Index a = pick(rng), b = pick(rng), c = pick(rng);
    const auto& P = sphere.vertices;
    const double ab = great_circle(P[a], P[b]), bc = great_circle(P[b], P[c]), ca = great_circle(P[c], P[a]);
    if (std::min({ab, bc, ca}) < 0.4 || std::max({ab, bc, ca}) > 1.0) continue;
    const double area = spherical_triangle_area(P[a], P[b], P[c]);
    // a -> b -> c -> a
    const double loop = field(b).transport[a] + field(c).transport[b] + field(a).transport[c];
    const double err = std::abs(angle_diff(loop, area)) / std::abs(area);
    worst = std::max(worst, err);
    ++tested;
  }
  MESSAGE("worst relative holonomy error " << worst);
  CHECK(worst < 0.05);
}
