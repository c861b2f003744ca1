#include "hsn/kernels.hpp"

#include <algorithm>
#include <numeric>

#include "hsn/error.hpp"

namespace hsn {

void GraphOperator::finalize() {
  const size_t E = target.size();
  if (source.size() != E || coef.size() != E * static_cast<size_t>(slots))
    throw ShapeError("graph operator arrays disagree in length");
  for (size_t e = 0; e < E; ++e)
    if (target[e] >= n_out || source[e] >= n_in) throw ShapeError("graph operator edge out of range");

  std::vector<size_t> order(E);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return target[a] < target[b]; });
  if (!std::is_sorted(target.begin(), target.end())) {
    std::vector<Index> t(E), s(E);
    std::vector<std::complex<double>> c(coef.size());
    for (size_t k = 0; k < E; ++k) {
      t[k] = target[order[k]];
      s[k] = source[order[k]];
      std::copy_n(coef.begin() + order[k] * slots, slots, c.begin() + k * slots);
    }
    target = std::move(t);
    source = std::move(s);
    coef = std::move(c);
  }

  by_target.assign(n_out + 1, 0);
  for (Index t : target) ++by_target[t + 1];
  std::partial_sum(by_target.begin(), by_target.end(), by_target.begin());

  by_source.assign(n_in + 1, 0);
  for (Index s : source) ++by_source[s + 1];
  std::partial_sum(by_source.begin(), by_source.end(), by_source.begin());
  source_edges.resize(E);
  std::vector<size_t> fill(by_source.begin(), by_source.end() - 1);
  for (size_t e = 0; e < E; ++e) source_edges[fill[source[e]]++] = e;
}

namespace {

template <typename Real>
void check_shapes(const GraphOperator& op, size_t in_rows, size_t in_cols, size_t out_rows, size_t out_cols) {
  if (op.by_target.size() != op.n_out + 1) throw ShapeError("graph operator is not finalized");
  if (in_rows != op.n_in || out_rows != op.n_out || out_cols != in_cols * static_cast<size_t>(op.slots))
    throw ShapeError("graph operator applied to features of the wrong shape");
}

// out[i] += sum_s coef[e][s] x[j], one edge
template <typename Real>
inline void forward_edge(const GraphOperator& op, size_t e, PlaneView<Real> x, MutablePlaneView<Real> out) {
  const size_t C = x.cols;
  const Real* xr = x.re + op.source[e] * C;
  const Real* xi = x.im + op.source[e] * C;
  Real* orow = out.re + op.target[e] * out.cols;
  Real* irow = out.im + op.target[e] * out.cols;
  for (int s = 0; s < op.slots; ++s) {
    const auto c = op.coef[e * op.slots + s];
    if (c == 0.0) continue;
    const auto cr = static_cast<Real>(c.real()), ci = static_cast<Real>(c.imag());
    Real* o_r = orow + s * C;
    Real* o_i = irow + s * C;
    for (size_t k = 0; k < C; ++k) {
      o_r[k] += cr * xr[k] - ci * xi[k];
      o_i[k] += cr * xi[k] + ci * xr[k];
    }
  }
}

// gx[j] += sum_s conj(coef[e][s]) gout[i], one edge
template <typename Real>
inline void adjoint_edge(const GraphOperator& op, size_t e, PlaneView<Real> gout, MutablePlaneView<Real> gx) {
  const size_t C = gx.cols;
  const Real* gr = gout.re + op.target[e] * gout.cols;
  const Real* gi = gout.im + op.target[e] * gout.cols;
  Real* xr = gx.re + op.source[e] * C;
  Real* xi = gx.im + op.source[e] * C;
  for (int s = 0; s < op.slots; ++s) {
    const auto c = op.coef[e * op.slots + s];
    if (c == 0.0) continue;
    const auto cr = static_cast<Real>(c.real()), ci = static_cast<Real>(c.imag());
    const Real* g_r = gr + s * C;
    const Real* g_i = gi + s * C;
    for (size_t k = 0; k < C; ++k) {
      xr[k] += cr * g_r[k] + ci * g_i[k];
      xi[k] += cr * g_i[k] - ci * g_r[k];
    }
  }
}

}  // namespace

template <typename Real>
void gather_scatter_serial(const GraphOperator& op, PlaneView<Real> x, MutablePlaneView<Real> out) {
  check_shapes<Real>(op, x.rows, x.cols, out.rows, out.cols);
  for (size_t e = 0; e < op.n_edges(); ++e) forward_edge(op, e, x, out);
}

template <typename Real>
void gather_scatter_parallel(const GraphOperator& op, PlaneView<Real> x, MutablePlaneView<Real> out) {
  check_shapes<Real>(op, x.rows, x.cols, out.rows, out.cols);
  // rows are independent; each row accumulates in edge order, as the serial loop does
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(op.n_out); ++i)
    for (size_t e = op.by_target[i]; e < op.by_target[i + 1]; ++e) forward_edge(op, e, x, out);
}

template <typename Real>
void gather_scatter_adjoint_serial(const GraphOperator& op, PlaneView<Real> gout, MutablePlaneView<Real> gx) {
  check_shapes<Real>(op, gx.rows, gx.cols, gout.rows, gout.cols);
  for (size_t e = 0; e < op.n_edges(); ++e) adjoint_edge(op, e, gout, gx);
}

template <typename Real>
void gather_scatter_adjoint_parallel(const GraphOperator& op, PlaneView<Real> gout, MutablePlaneView<Real> gx) {
  check_shapes<Real>(op, gx.rows, gx.cols, gout.rows, gout.cols);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(op.n_in); ++j)
    for (size_t k = op.by_source[j]; k < op.by_source[j + 1]; ++k) adjoint_edge(op, op.source_edges[k], gout, gx);
}

template void gather_scatter_serial<float>(const GraphOperator&, PlaneView<float>, MutablePlaneView<float>);
template void gather_scatter_serial<double>(const GraphOperator&, PlaneView<double>, MutablePlaneView<double>);
template void gather_scatter_parallel<float>(const GraphOperator&, PlaneView<float>, MutablePlaneView<float>);
template void gather_scatter_parallel<double>(const GraphOperator&, PlaneView<double>, MutablePlaneView<double>);
template void gather_scatter_adjoint_serial<float>(const GraphOperator&, PlaneView<float>, MutablePlaneView<float>);
template void gather_scatter_adjoint_serial<double>(const GraphOperator&, PlaneView<double>, MutablePlaneView<double>);
template void gather_scatter_adjoint_parallel<float>(const GraphOperator&, PlaneView<float>, MutablePlaneView<float>);
template void gather_scatter_adjoint_parallel<double>(const GraphOperator&, PlaneView<double>,
                                                      MutablePlaneView<double>);

}  // namespace hsn
