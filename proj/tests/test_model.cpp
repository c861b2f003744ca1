#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "doctest.h"
#include "hsn/error.hpp"
#include "hsn/model.hpp"
#include "test_util.hpp"

using namespace hsn;
using namespace hsn::testing;
using ad::Tape;
using ad::Var;

namespace {

using M = ad::Plane<double>;
const std::vector<int> kOrders = {-1, 0, 1};

PrecomputedGraph graph_for(const TriangleMesh& mesh, const TangentFrameField& frames, int levels, double radius,
                           int rings, double ratio = 0.25) {
  MultiScaleOptions opt;
  opt.levels = levels;
  opt.radius = radius;
  opt.ratios = {ratio};
  return precompute_mesh(mesh, frames, opt, rings, kOrders);
}

M coordinates(const TriangleMesh& mesh) {
  M x(mesh.n_vertices(), 3);
  for (size_t i = 0; i < mesh.n_vertices(); ++i) x.row(i) = mesh.vertices[i].transpose();
  return x;
}

ModelConfig small_uresnet(int rings, std::vector<int> streams = {0, 1}) {
  ModelConfig c;
  c.arch = "uresnet";
  c.widths = {4, 6};
  c.in_channels = 3;
  c.n_classes = 5;
  c.rings = rings;
  c.blocks = 1;
  c.streams = std::move(streams);
  return c;
}

// Pooling graph by hand: three nodes, clusters {0, 1} -> 0 and {2} -> 1.
PrecomputedGraph hand_pooling_graph(std::vector<double> transport) {
  PrecomputedGraph g;
  g.rings = 1;
  g.orders = kOrders;
  g.levels.resize(2);
  for (auto& l : g.levels) {
    l.conv.rings = 1;
    l.conv.orders = kOrders;
  }
  g.levels[0].vertices = {0, 1, 2};
  g.levels[0].cluster = {0, 0, 1};
  g.levels[0].cluster_transport = std::move(transport);
  g.levels[1].vertices = {0, 2};
  return g;
}

double max_abs(const M& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

TEST_CASE("config text round trip and validation") {
  auto c = small_uresnet(4);
  c.radii = {0.3, 0.45};
  CHECK(ModelConfig::parse(c.to_text()) == c);
  CHECK(ModelConfig::parse("arch = classifier\n# comment\nwidths = 8, 16\n").widths == std::vector<int>{8, 16});
  CHECK_THROWS_AS(ModelConfig::parse("arch = uresnet\nbogus = 1\n"), FormatError);
  CHECK_THROWS_AS(ModelConfig::parse("rings = x\n"), FormatError);
  CHECK_THROWS_AS(ModelConfig::parse("streams = 1\n"), ShapeError);
  CHECK_THROWS_AS(ModelConfig::parse("arch = mnist\nwidths = 8,8,16\nlevels = 2\n"), ShapeError);
  CHECK(required_orders({0, 1}) == kOrders);
  CHECK(required_orders({0}) == std::vector<int>{0});
}

TEST_CASE("radial profile interpolates between rings and vanishes at eps") {
  const int Q = 4;
  const double eps = 2.0;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  M rho(Q * 2, 3);
  for (auto& v : rho.reshaped()) v = n(rng);
  for (int q = 0; q < Q; ++q)
    CHECK((radial_profile(rho, Q, q * eps / Q, eps) - rho.middleRows(q * 2, 2)).norm() < 1e-14);
  CHECK(radial_profile(rho, Q, eps, eps).isZero());
  CHECK(radial_profile(rho, Q, 3 * eps, eps).isZero());
  const double a = 0.3;
  const M mid = radial_profile(rho, Q, (1 + a) * eps / Q, eps);
  CHECK((mid - ((1 - a) * rho.middleRows(2, 2) + a * rho.middleRows(4, 2))).norm() < 1e-14);
}

TEST_CASE("parameter counts follow n_i n_o (Q + 1) n_m^2") {
  ModelConfig c;
  c.rings = 2;
  c.widths = {16, 32};
  c.blocks = 2;
  auto conv_sum = [](const ModelConfig& cfg, const std::string& prefix) {
    size_t n = 0;
    for (const auto& b : parameter_layout(cfg))
      if (b.name.rfind(prefix, 0) == 0 && (b.name.find(".rho.") != std::string::npos ||
                                            b.name.find(".beta.") != std::string::npos))
        n += static_cast<size_t>(b.rows * b.cols);
    return n;
  };
  CHECK(conv_sum(c, "s1.b0.conv1.") == 16u * 16 * 3 * 4);
  CHECK(conv_sum(c, "s") == 122880u);
  auto single = c;
  single.streams = {0};
  CHECK(4 * conv_sum(single, "s") == conv_sum(c, "s"));
  size_t total = 0;
  for (const auto& b : parameter_layout(c)) total += static_cast<size_t>(b.rows * b.cols);
  CHECK(count_parameters(c) == total);
  CHECK(Network(c).parameters().n_scalars() == total);
  CHECK(count_conv_parameters(c) == conv_sum(c, ""));
}

TEST_CASE("graph operators reject caches without the needed orders") {
  auto g = hand_pooling_graph({0, 0, 0});
  g.orders = {0};
  CHECK_NOTHROW(GraphOps(g, {0}));
  CHECK_THROWS_AS(GraphOps(g, {0, 1}), ShapeError);
  auto bad = hand_pooling_graph({0, 0, 0});
  bad.levels[0].cluster = {0, 0, 0};
  CHECK_THROWS_AS(GraphOps(bad, {0, 1}), ShapeError);  // coarse node 1 is empty
}

TEST_CASE("pooling transports, averages and unpools") {
  const double phi0 = 0.4, phi1 = -1.1, phi2 = 2.0;
  const GraphOps ops(hand_pooling_graph({phi0, phi1, phi2}), {0, 1});
  Tape<double> t;
  M re(3, 1), im(3, 1);
  re << 1, 2, 3;
  im << 0.5, -1, 0;
  const Var x = t.constant(re, im);
  const auto pooled = mean_pool(t, ops, 0, Streams{x, x}, {0, 1});
  // M = 0: arithmetic mean; M = 1: transported mean
  CHECK(t.re(pooled[0])(0, 0) == doctest::Approx(1.5));
  CHECK(t.im(pooled[0])(0, 0) == doctest::Approx(-0.25));
  const std::complex<double> z0(1, 0.5), z1(2, -1), z2(3, 0);
  const auto expect = 0.5 * (std::polar(1.0, phi0) * z0 + std::polar(1.0, phi1) * z1);
  CHECK(t.re(pooled[1])(0, 0) == doctest::Approx(expect.real()));
  CHECK(t.im(pooled[1])(0, 0) == doctest::Approx(expect.imag()));
  // singleton cluster: transported copy, undone by unpooling
  const auto back = unpool(t, ops, 0, pooled, {0, 1});
  CHECK(t.re(back[1])(2, 0) == doctest::Approx(z2.real()));
  CHECK(t.im(back[1])(2, 0) == doctest::Approx(z2.imag()));
  CHECK(t.re(back[0])(1, 0) == doctest::Approx(1.5));
  CHECK(std::hypot(t.re(back[1])(0, 0), t.im(back[1])(0, 0)) == doctest::Approx(std::abs(expect)));
}

TEST_CASE("complex linear, relu and mean pool basics") {
  ad::ParameterSet ps;
  auto& W = ps.add("lin.W", 2, 2);
  ps.add("lin.b", 1, 2).value << 0.5, -0.5;
  W.value.setIdentity();
  ps.add("r.b.0", 1, 2);
  ps.add("r.b.1", 1, 2);
  Tape<double> t;
  M re(2, 2), im(2, 2);
  re << 1, 2, 3, 4;
  im << -1, 0, 1, 2;
  const Var x = t.constant(re, im);
  const auto y = complex_linear(t, ps, "lin", Streams{x, x}, {0, 1});
  CHECK(t.re(y[1]) == re);  // identity, no bias on M = 1
  CHECK(t.im(y[1]) == im);
  CHECK(t.re(y[0]) == re + M::Constant(2, 1, 1).replicate(1, 1) * ps.get("lin.b").value);
  const auto r = relu_streams(t, ps, "r", Streams{x, x}, {0, 1});  // zero bias: identity
  CHECK((t.re(r[1]) - re).norm() < 1e-15);
  CHECK((t.im(r[1]) - im).norm() < 1e-15);
  const Var g = global_mean_pool_radial(t, t.constant(M::Constant(4, 2, 0.6), M::Constant(4, 2, 0.8)));
  CHECK(t.re(g).isApprox(M::Ones(1, 2)));
}

TEST_CASE("convolution of a constant with a flat profile is the weighted mean") {
  // hex lattice, spacing 1: with eps = 1.5 and Q = 4 the nearest neighbours
  // (r = 1) sit between rings 2 and 3, so R(r) = 1 on the whole support
  const auto mesh = make_hex_patch(4, 1.0);
  const auto g = graph_for(mesh, build_tangent_frames(mesh), 1, 1.5, 4);
  const GraphOps ops(g, {0});
  ad::ParameterSet ps;
  ps.add("c.rho.0>0", 4 * 2, 2).value.setOnes();
  ps.add("c.beta.0>0", 2, 2);  // beta = 0
  Tape<double> t;
  const size_t n = mesh.n_vertices();
  M re(n, 2), im(n, 2);
  re.col(0).setConstant(0.7);
  re.col(1).setConstant(-0.2);
  im.col(0).setConstant(0.1);
  im.col(1).setZero();
  const auto y = harmonic_conv(t, ps, "c", ops, 0, Streams{t.constant(re, im)}, {0}, {0});
  // both input channels feed both outputs
  CHECK((t.re(y[0]).array() - 0.5).abs().maxCoeff() < 1e-12);
  CHECK((t.im(y[0]).array() - 0.1).abs().maxCoeff() < 1e-12);

  Tape<double> z;
  const auto y0 = harmonic_conv(z, ps, "c", ops, 0, Streams{z.constant(M::Zero(n, 2), M::Zero(n, 2))}, {0}, {0});
  CHECK(z.re(y0[0]).isZero());
}

TEST_CASE("a residual block with zero kernels and biases is the identity") {
  const auto mesh = make_irregular_torus(10, 6, 0.2, 4);
  const auto g = graph_for(mesh, build_tangent_frames(mesh), 1, 1.0, 3);
  const GraphOps ops(g, {0, 1});
  auto c = small_uresnet(3);
  Network net(c);  // zero-initialized parameters
  Tape<double> t;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  M re(mesh.n_vertices(), 4), im(mesh.n_vertices(), 4);
  for (auto& v : re.reshaped()) v = nd(rng);
  for (auto& v : im.reshaped()) v = nd(rng);
  const Var x = t.constant(re, im);
  const auto y = resnet_block(t, net.parameters(), "s1.b0", ops, 0, Streams{x, x}, {0, 1});
  for (int a = 0; a < 2; ++a) {
    CHECK((t.re(y[a]) - re).norm() < 1e-14);
    CHECK((t.im(y[a]) - im).norm() < 1e-14);
  }
}

TEST_CASE("the U-ResNet commutes with frame rotations") {
  const auto mesh = make_icosphere(2);
  const auto frames = build_tangent_frames(mesh);
  const auto angles = random_angles(mesh.n_vertices(), 17);
  const auto g1 = graph_for(mesh, frames, 2, 0.5, 3);
  const auto g2 = graph_for(mesh, rotate_frames(frames, angles), 2, 0.5, 3);
  Network net(small_uresnet(3));
  net.initialize(5);
  const M x = coordinates(mesh);

  auto run = [&](const PrecomputedGraph& g, auto real_tag, M& logits, M& f_re, M& f_im) {
    using Real = decltype(real_tag);
    const GraphOps ops(g, {0, 1});
    Tape<Real> t;
    ForwardTrace<Real> trace;
    const Var y = net.forward(t, ops, ad::Plane<Real>(x.cast<Real>()), &trace);
    logits = t.re(y).template cast<double>();
    f_re = t.re(trace.features[1]).template cast<double>();
    f_im = t.im(trace.features[1]).template cast<double>();
  };

  for (const bool single : {false, true}) {
    M l1, r1, i1, l2, r2, i2;
    if (single) {
      run(g1, float{}, l1, r1, i1);
      run(g2, float{}, l2, r2, i2);
    } else {
      run(g1, double{}, l1, r1, i1);
      run(g2, double{}, l2, r2, i2);
    }
    const double tol = single ? 1e-4 : 1e-10;
    CHECK(max_abs(l1 - l2) / max_abs(l1) < tol);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < r1.rows(); ++i)
      for (Eigen::Index c = 0; c < r1.cols(); ++c) {
        const auto expect = std::polar(1.0, angles[i]) * std::complex<double>(r1(i, c), i1(i, c));
        worst = std::max(worst, std::abs(expect - std::complex<double>(r2(i, c), i2(i, c))));
      }
    CHECK(worst / std::max(max_abs(r1), max_abs(i1)) < tol);
  }
}

TEST_CASE("end-to-end gradients on a 50-vertex mesh match central differences") {
  const auto mesh = make_irregular_torus(10, 5, 0.2, 11);
  REQUIRE(mesh.n_vertices() == 50);
  const auto g = graph_for(mesh, build_tangent_frames(mesh), 2, 1.2, 3);
  const GraphOps ops(g, {0, 1});
  auto c = small_uresnet(3);
  c.widths = {3, 4};
  c.n_classes = 3;
  Network net(c);
  net.initialize(21);
  // nonzero biases so every parameter is exercised
  for (size_t k = 0; k < net.parameters().size(); ++k) {
    auto& p = net.parameters()[k];
    if (p.name.find(".b") != std::string::npos && p.name.find(".beta") == std::string::npos)
      p.value.setConstant(0.05);
  }
  const M x = coordinates(mesh);
  std::vector<int> labels(mesh.n_vertices());
  for (size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 3);
  auto loss = [&] {
    Tape<double> t;
    return t.scalar(ad::nll_loss(t, net.forward(t, ops, x), labels));
  };
  net.parameters().zero_grad();
  {
    Tape<double> t;
    t.backward(ad::nll_loss(t, net.forward(t, ops, x), labels));
  }
  double worst = 0.0, scale = 0.0;
  const double h = 1e-6;
  for (size_t k = 0; k < net.parameters().size(); ++k) {
    auto& p = net.parameters()[k];
    for (Eigen::Index e = 0; e < p.value.size(); ++e) {
      double& v = p.value.reshaped()(e);
      const double keep = v;
      v = keep + h;
      const double up = loss();
      v = keep - h;
      const double down = loss();
      v = keep;
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(fd - p.grad.reshaped()(e)));
      scale = std::max(scale, std::abs(fd));
    }
  }
  CHECK(scale > 0.0);
  CHECK(worst / scale < 1e-4);
}

TEST_CASE("classifier heads are invariant to frames and agree across precisions") {
  const auto mesh = make_icosphere(2);
  const auto frames = build_tangent_frames(mesh);
  const auto g1 = graph_for(mesh, frames, 2, 0.5, 3);
  const auto g2 = graph_for(mesh, rotate_frames(frames, random_angles(mesh.n_vertices(), 2)), 2, 0.5, 3);
  ModelConfig c = small_uresnet(3);
  c.arch = "classifier";
  c.n_classes = 4;
  Network net(c);
  net.initialize(9);
  const M x = coordinates(mesh);
  Tape<double> t1, t2;
  Tape<float> tf;
  const Var a = net.forward(t1, GraphOps(g1, {0, 1}), x);
  const Var b = net.forward(t2, GraphOps(g2, {0, 1}), x);
  const Var f = net.forward(tf, GraphOps(g1, {0, 1}), ad::Plane<float>(x.cast<float>()));
  REQUIRE(t1.rows(a) == 1);
  CHECK(max_abs(t1.re(a) - t2.re(b)) / max_abs(t1.re(a)) < 1e-10);
  CHECK(max_abs(t1.re(a) - tf.re(f).cast<double>()) / max_abs(t1.re(a)) < 1e-4);
}

TEST_CASE("forward passes are deterministic and shape-checked") {
  const auto mesh = make_icosphere(1);
  const auto g = graph_for(mesh, build_tangent_frames(mesh), 2, 0.8, 3);
  const GraphOps ops(g, {0, 1});
  Network a(small_uresnet(3)), b(small_uresnet(3));
  a.initialize(4);
  b.initialize(4);
  const M x = coordinates(mesh);
  Tape<double> ta, tb;
  const Var ya = a.forward(ta, ops, x), yb = b.forward(tb, ops, x);
  CHECK(ta.re(ya) == tb.re(yb));
  Tape<double> tc;
  CHECK_THROWS_AS(a.forward(tc, ops, M(M::Zero(3, 3))), ShapeError);
  Network wrong_rings(small_uresnet(4));
  CHECK_THROWS_AS(wrong_rings.forward(tc, ops, x), ShapeError);
}
