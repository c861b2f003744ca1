// Serial vs OpenMP gather-scatter on the icosphere-3 convolution operator.

#include <benchmark/benchmark.h>

#include <random>

#include "hsn/kernels.hpp"
#include "hsn/model.hpp"

namespace {

using namespace hsn;

const GraphOperator& conv_operator() {
  static const GraphOps ops = [] {
    const auto mesh = make_icosphere(3);
    MultiScaleOptions opt;
    opt.levels = 1;
    opt.radius = 0.3;
    const std::vector<int> orders = required_orders({0, 1});
    return GraphOps(precompute_mesh(mesh, build_tangent_frames(mesh), opt, 6, orders), {0, 1});
  }();
  return ops.conv(0, 1, 0);
}

template <typename Real>
struct Buffers {
  std::vector<Real> xr, xi, yr, yi;
  size_t rows_in, rows_out, cols;

  Buffers(const GraphOperator& op, size_t channels) : rows_in(op.n_in), rows_out(op.n_out), cols(channels) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n;
    for (size_t k = 0; k < rows_in * cols; ++k) {
      xr.push_back(static_cast<Real>(n(rng)));
      xi.push_back(static_cast<Real>(n(rng)));
    }
    yr.assign(rows_out * cols * op.slots, Real(0));
    yi = yr;
  }
};

template <typename Real, bool Parallel, bool Adjoint>
void BM_gather_scatter(benchmark::State& state) {
  const auto& op = conv_operator();
  const auto channels = static_cast<size_t>(state.range(0));
  Buffers<Real> b(op, channels);
  const size_t out_cols = channels * op.slots;
  for (auto _ : state) {
    if constexpr (Adjoint) {
      // gradient wrt the input from an n_out x (slots C) upstream map
      std::fill(b.xr.begin(), b.xr.end(), Real(0));
      std::fill(b.xi.begin(), b.xi.end(), Real(0));
      PlaneView<Real> g{b.yr.data(), b.yi.data(), b.rows_out, out_cols};
      MutablePlaneView<Real> gx{b.xr.data(), b.xi.data(), b.rows_in, channels};
      if constexpr (Parallel) gather_scatter_adjoint_parallel(op, g, gx);
      else gather_scatter_adjoint_serial(op, g, gx);
    } else {
      std::fill(b.yr.begin(), b.yr.end(), Real(0));
      std::fill(b.yi.begin(), b.yi.end(), Real(0));
      PlaneView<Real> x{b.xr.data(), b.xi.data(), b.rows_in, channels};
      MutablePlaneView<Real> y{b.yr.data(), b.yi.data(), b.rows_out, out_cols};
      if constexpr (Parallel) gather_scatter_parallel(op, x, y);
      else gather_scatter_serial(op, x, y);
    }
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(op.n_edges() * op.slots * channels));
}

}  // namespace

BENCHMARK(BM_gather_scatter<double, false, false>)->Name("forward/f64/serial")->Arg(8)->Arg(32)->UseRealTime();
BENCHMARK(BM_gather_scatter<double, true, false>)->Name("forward/f64/parallel")->Arg(8)->Arg(32)->UseRealTime();
BENCHMARK(BM_gather_scatter<float, false, false>)->Name("forward/f32/serial")->Arg(8)->Arg(32)->UseRealTime();
BENCHMARK(BM_gather_scatter<float, true, false>)->Name("forward/f32/parallel")->Arg(8)->Arg(32)->UseRealTime();
BENCHMARK(BM_gather_scatter<double, false, true>)->Name("adjoint/f64/serial")->Arg(8)->Arg(32)->UseRealTime();
BENCHMARK(BM_gather_scatter<double, true, true>)->Name("adjoint/f64/parallel")->Arg(8)->Arg(32)->UseRealTime();

BENCHMARK_MAIN();
