#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "hsn/mesh.hpp"

namespace hsn {

/// Sparse complex operator between two node sets with `slots` coefficients
/// per edge. Applying it to an n_in x C complex feature map yields an
/// n_out x (slots * C) map whose column s * C + c holds
///   sum over edges e into row i of coef[e][s] * x[source[e]][c].
/// Convolution uses one slot per ring; pooling and unpooling use one slot.
struct GraphOperator {
  size_t n_out = 0;
  size_t n_in = 0;
  int slots = 1;
  std::vector<Index> target;
  std::vector<Index> source;
  std::vector<std::complex<double>> coef;  // [edge][slot]

  // filled by finalize()
  std::vector<size_t> by_target;        // CSR row starts into the target-sorted edge list
  std::vector<size_t> by_source;        // CSR row starts into source_edges
  std::vector<size_t> source_edges;     // edge ids grouped by source, ascending within a group

  size_t n_edges() const { return target.size(); }
  /// Sorts edges by target (stable) and builds both CSR indices.
  void finalize();
};

/// Feature planes are row-major n x C arrays.
template <typename Real>
struct PlaneView {
  const Real* re;
  const Real* im;
  size_t rows, cols;
};

template <typename Real>
struct MutablePlaneView {
  Real* re;
  Real* im;
  size_t rows, cols;
};

/// out = A x. `out` must be zeroed by the caller (accumulates).
template <typename Real>
void gather_scatter_serial(const GraphOperator& op, PlaneView<Real> x, MutablePlaneView<Real> out);
template <typename Real>
void gather_scatter_parallel(const GraphOperator& op, PlaneView<Real> x, MutablePlaneView<Real> out);

/// gx += A^H gout.
template <typename Real>
void gather_scatter_adjoint_serial(const GraphOperator& op, PlaneView<Real> gout, MutablePlaneView<Real> gx);
template <typename Real>
void gather_scatter_adjoint_parallel(const GraphOperator& op, PlaneView<Real> gout, MutablePlaneView<Real> gx);

}  // namespace hsn
