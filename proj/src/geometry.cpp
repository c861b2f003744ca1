#include "hsn/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "hsn/error.hpp"

namespace hsn {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  if (a >= kTwoPi) a = 0.0;
  return a;
}

struct HalfWeight {
  Index i, j;
  double w;  // half cotangent of the angle opposite edge ij in one face
};

std::vector<HalfWeight> cotan_half_weights(const TriangleMesh& mesh) {
  std::vector<HalfWeight> out;
  out.reserve(3 * mesh.n_faces());
  for (const auto& face : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      const Index o = face[k], i = face[(k + 1) % 3], j = face[(k + 2) % 3];
      const Vec3 u = mesh.vertices[i] - mesh.vertices[o];
      const Vec3 v = mesh.vertices[j] - mesh.vertices[o];
      out.push_back({i, j, 0.5 * u.dot(v) / u.cross(v).norm()});
    }
  }
  return out;
}

}  // namespace

SparseReal cotan_laplacian(const TriangleMesh& mesh) {
  const auto n = static_cast<Eigen::Index>(mesh.n_vertices());
  std::vector<Eigen::Triplet<double>> trips;
  for (const auto& [i, j, w] : cotan_half_weights(mesh)) {
    trips.emplace_back(i, j, -w);
    trips.emplace_back(j, i, -w);
    trips.emplace_back(i, i, w);
    trips.emplace_back(j, j, w);
  }
  SparseReal L(n, n);
  L.setFromTriplets(trips.begin(), trips.end());
  return L;
}

double edge_angle(const TriangleMesh& mesh, const TangentFrameField& frames, Index i, Index j) {
  return std::arg(frames.to_tangent(i, mesh.vertices[j] - mesh.vertices[i]));
}

double edge_transport_angle(const TriangleMesh& mesh, const TangentFrameField& frames, Index i, Index j) {
  // keep the angle to the edge: direction j->i at j maps to direction "away from j" at i
  return edge_angle(mesh, frames, i, j) - edge_angle(mesh, frames, j, i) + std::numbers::pi;
}

SparseComplex connection_laplacian(const TriangleMesh& mesh, const TangentFrameField& frames) {
  const auto n = static_cast<Eigen::Index>(mesh.n_vertices());
  std::vector<Eigen::Triplet<Complex>> trips;
  for (const auto& [i, j, w] : cotan_half_weights(mesh)) {
    const double rho = edge_transport_angle(mesh, frames, i, j);
    trips.emplace_back(i, j, -w * std::polar(1.0, rho));
    trips.emplace_back(j, i, -w * std::polar(1.0, -rho));
    trips.emplace_back(i, i, w);
    trips.emplace_back(j, j, w);
  }
  SparseComplex L(n, n);
  L.setFromTriplets(trips.begin(), trips.end());
  return L;
}

VectorHeatSolver::VectorHeatSolver(const TriangleMesh& mesh, const TangentFrameField& frames, double t)
    : t_(t > 0.0 ? t : std::pow(mean_edge_length(mesh), 2)), mass_(lumped_vertex_areas(mesh)) {
  const auto n = static_cast<Eigen::Index>(mesh.n_vertices());
  if (frames.size() != mesh.n_vertices()) throw ShapeError("frame field does not match mesh");

  const SparseReal L = cotan_laplacian(mesh);
  const SparseComplex Lc = connection_laplacian(mesh, frames);
  SparseReal M(n, n);
  SparseComplex Mc(n, n);
  {
    std::vector<Eigen::Triplet<double>> md;
    std::vector<Eigen::Triplet<Complex>> mc;
    for (Eigen::Index i = 0; i < n; ++i) {
      md.emplace_back(i, i, mass_[i]);
      mc.emplace_back(i, i, mass_[i]);
    }
    M.setFromTriplets(md.begin(), md.end());
    Mc.setFromTriplets(mc.begin(), mc.end());
  }

  scalar_.compute(M + t_ * L);
  if (scalar_.info() != Eigen::Success) throw NumericalError("singular factorization of the scalar heat operator");
  vector_.compute(Mc + t_ * Lc);
  if (vector_.info() != Eigen::Success) throw NumericalError("singular factorization of the vector heat operator");

  spokes_.resize(mesh.n_vertices());
  for (Eigen::Index k = 0; k < L.outerSize(); ++k) {
    for (SparseReal::InnerIterator it(L, k); it; ++it) {
      const auto from = static_cast<Index>(it.row()), to = static_cast<Index>(it.col());
      if (from == to) continue;
      const Vec3 e = mesh.vertices[to] - mesh.vertices[from];
      const Complex z = frames.to_tangent(from, e);
      // projected direction, full edge length
      spokes_[from].push_back({to, -it.value(), std::polar(e.norm(), std::arg(z))});
    }
  }
}

Eigen::VectorXd VectorHeatSolver::scalar_heat(std::span<const Index> sources) const {
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mass_.size()));
  for (Index s : sources) rhs[s] = 1.0;
  return scalar_.solve(rhs);
}

Eigen::VectorXcd VectorHeatSolver::horizontal_field(Index source) const {
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(mass_.size()));
  rhs[source] = 1.0;
  return vector_.solve(rhs);
}

LogMapField VectorHeatSolver::log_map(Index source) const {
  const auto n = static_cast<Eigen::Index>(mass_.size());
  const Index src[] = {source};
  const Eigen::VectorXd w = scalar_heat(src);

  // translation part of the diffused affine section
  Eigen::VectorXcd rhs(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Complex acc = 0.0;
    for (const auto& s : spokes_[j]) acc += s.weight * s.edge * w[s.to];
    rhs[j] = t_ * acc;
  }
  const Eigen::VectorXcd z = vector_.solve(rhs);
  const Eigen::VectorXcd h = horizontal_field(source);

  LogMapField field;
  field.source = source;
  field.log.resize(n);
  field.transport.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (!(std::abs(h[j]) > 0.0) || !(w[j] > 0.0)) {
      // heat underflowed: treat as unreachable
      field.log[j] = Complex(std::numeric_limits<double>::infinity(), 0.0);
      field.transport[j] = 0.0;
      continue;
    }
    const Complex to_source = std::conj(h[j] / std::abs(h[j]));
    // log_j(source) carried back to the source and reversed
    field.log[j] = -(z[j] / w[j]) * to_source;
    field.transport[j] = std::arg(to_source);
  }
  field.log[source] = 0.0;
  field.transport[source] = 0.0;
  return field;
}

GeodesicDistance::GeodesicDistance(const TriangleMesh& mesh, double t)
    : solver_(mesh, build_tangent_frames(mesh), t), faces_(mesh.faces) {
  face_geometry_.resize(mesh.n_faces());
  for (size_t f = 0; f < mesh.n_faces(); ++f) {
    const auto& face = mesh.faces[f];
    const Vec3 area_normal = (mesh.vertices[face[1]] - mesh.vertices[face[0]])
                                 .cross(mesh.vertices[face[2]] - mesh.vertices[face[0]]);
    const double twice_area = area_normal.norm();
    const Vec3 n = area_normal / twice_area;
    for (int k = 0; k < 3; ++k) {
      const Vec3& pi = mesh.vertices[face[k]];
      const Vec3& pj = mesh.vertices[face[(k + 1) % 3]];
      const Vec3& pk = mesh.vertices[face[(k + 2) % 3]];
      face_geometry_[f].grad[k] = n.cross(pk - pj) / twice_area;
      auto cot = [](const Vec3& u, const Vec3& v) { return u.dot(v) / u.cross(v).norm(); };
      const double cot_j = cot(pi - pj, pk - pj), cot_k = cot(pi - pk, pj - pk);
      face_geometry_[f].cot_edge[k] = 0.5 * (cot_k * (pj - pi) + cot_j * (pk - pi));
    }
  }
  // L is singular on closed meshes; a relative 1e-10 mass shift keeps the
  // factorization definite without visibly moving the solution
  const SparseReal L = cotan_laplacian(mesh);
  const auto area = lumped_vertex_areas(mesh);
  const double shift = 1e-10 * L.diagonal().mean() * static_cast<double>(area.size()) / total_area(mesh);
  SparseReal A = L;
  for (Eigen::Index i = 0; i < A.rows(); ++i) A.coeffRef(i, i) += shift * area[i];
  poisson_.compute(A);
  if (poisson_.info() != Eigen::Success) throw NumericalError("singular factorization of the Poisson operator");
}

std::vector<double> GeodesicDistance::heat_method(Index source) const {
  const Index src[] = {source};
  const Eigen::VectorXd u = solver_.scalar_heat(src);
  Eigen::VectorXd div = Eigen::VectorXd::Zero(u.size());
  for (size_t f = 0; f < faces_.size(); ++f) {
    const auto& face = faces_[f];
    const auto& g = face_geometry_[f];
    const Vec3 grad = u[face[0]] * g.grad[0] + u[face[1]] * g.grad[1] + u[face[2]] * g.grad[2];
    const double norm = grad.norm();
    if (!(norm > 0.0)) continue;
    const Vec3 X = -grad / norm;
    for (int k = 0; k < 3; ++k) div[face[k]] += g.cot_edge[k].dot(X);
  }
  // Neumann compatibility on meshes with boundary
  div.array() -= div.mean();
  const Eigen::VectorXd phi = poisson_.solve(-div);
  std::vector<double> d(phi.size());
  for (Eigen::Index j = 0; j < phi.size(); ++j) d[j] = std::max(0.0, phi[j] - phi[source]);
  return d;
}

std::vector<double> GeodesicDistance::from(Index source) const {
  const auto field = solver_.log_map(source);
  const auto guard = heat_method(source);
  std::vector<double> d(field.log.size());
  for (size_t j = 0; j < d.size(); ++j) {
    // the heat-method value is a few percent off at worst (near the source
    // and along boundaries); a radius well below it has collapsed
    const double r = std::abs(field.log[j]);
    d[j] = r >= 0.9 * guard[j] ? r : guard[j];
  }
  d[source] = 0.0;
  return d;
}

std::vector<double> GeodesicDistance::from(std::span<const Index> sources) const {
  if (sources.empty()) throw GeometryError("geodesic distance needs at least one source");
  std::vector<std::vector<double>> per(sources.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(sources.size()); ++s) per[s] = from(sources[s]);
  std::vector<double> d = std::move(per[0]);
  for (size_t s = 1; s < per.size(); ++s)
    for (size_t j = 0; j < d.size(); ++j) d[j] = std::min(d[j], per[s][j]);
  return d;
}

std::vector<double> heat_geodesic_distance(const TriangleMesh& mesh, std::span<const Index> sources, double t) {
  if (sources.empty()) throw GeometryError("geodesic distance needs at least one source");
  return GeodesicDistance(mesh, t).from(sources);
}

std::vector<Index> index_diffusion_clusters(const TriangleMesh& mesh, std::span<const Index> sampled, double t) {
  if (sampled.empty()) throw GeometryError("index diffusion needs at least one sampled vertex");
  const auto frames = build_tangent_frames(mesh);
  const VectorHeatSolver solver(mesh, frames, t * total_area(mesh));
  const size_t n = mesh.n_vertices();

  std::vector<Eigen::VectorXd> heat(sampled.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(sampled.size()); ++s) {
    const Index src[] = {sampled[s]};
    heat[s] = solver.scalar_heat(src);
  }

  std::vector<Index> nearest(n);
  std::vector<double> best(n, -1.0);
  for (size_t s = 0; s < sampled.size(); ++s) {
    for (size_t j = 0; j < n; ++j) {
      // strict comparison: ties go to the earlier sample
      if (heat[s][static_cast<Eigen::Index>(j)] > best[j]) {
        best[j] = heat[s][static_cast<Eigen::Index>(j)];
        nearest[j] = sampled[s];
      }
    }
  }
  for (Index s : sampled) nearest[s] = s;
  return nearest;
}

LogMapChart make_chart(const LogMapField& field, std::span<const double> distance, double eps,
                       std::span<const Index> candidates) {
  if (!(eps > 0.0)) throw GeometryError("support radius must be positive");
  LogMapChart chart;
  chart.source = field.source;
  auto consider = [&](Index j) {
    if (j != field.source && !(distance[j] <= eps)) return;
    chart.neighbors.push_back(j);
    chart.radius.push_back(j == field.source ? 0.0 : distance[j]);
    chart.angle.push_back(j == field.source ? 0.0 : wrap_angle(std::arg(field.log[j])));
    chart.transport.push_back(field.transport[j]);
  };
  if (candidates.empty()) {
    for (Index j = 0; j < static_cast<Index>(distance.size()); ++j) consider(j);
  } else {
    bool has_source = false;
    for (Index j : candidates) has_source |= (j == field.source);
    std::vector<Index> sorted(candidates.begin(), candidates.end());
    if (!has_source) sorted.push_back(field.source);
    std::sort(sorted.begin(), sorted.end());
    for (Index j : sorted) consider(j);
  }
  return chart;
}

LogMapChart vector_heat_logmap(const TriangleMesh& mesh, const TangentFrameField& frames, Index i, double eps) {
  const VectorHeatSolver solver(mesh, frames);
  const GeodesicDistance geodesic(mesh);
  const auto d = geodesic.from(i);
  return make_chart(solver.log_map(i), d, eps);
}

}  // namespace hsn
