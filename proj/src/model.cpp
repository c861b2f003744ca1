#include "hsn/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "hsn/error.hpp"

namespace hsn {

// ---- config ----------------------------------------------------------------

namespace {

template <typename T>
std::string join(const std::vector<T>& v) {
  std::ostringstream s;
  s.precision(17);
  for (size_t k = 0; k < v.size(); ++k) s << (k ? "," : "") << v[k];
  return s.str();
}

template <typename T>
std::vector<T> split(std::string_view text, const std::string& key) {
  std::vector<T> out;
  std::string item;
  std::istringstream in{std::string(text)};
  while (std::getline(in, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    std::istringstream one(item);
    T v;
    if (!(one >> v)) throw FormatError("bad value '" + item + "' for '" + key + "'");
    out.push_back(v);
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return std::string(s.substr(a, b - a + 1));
}

}  // namespace

std::string ModelConfig::to_text() const {
  std::ostringstream s;
  s.precision(17);
  s << "arch = " << arch << "\n"
    << "widths = " << join(widths) << "\n"
    << "in_channels = " << in_channels << "\n"
    << "n_classes = " << n_classes << "\n"
    << "rings = " << rings << "\n"
    << "streams = " << join(streams) << "\n"
    << "blocks = " << blocks << "\n"
    << "epsilon = " << epsilon << "\n"
    << "levels = " << levels << "\n"
    << "ratios = " << join(ratios) << "\n"
    << "radii = " << join(radii) << "\n";
  return s.str();
}

ModelConfig ModelConfig::parse(std::string_view text) {
  ModelConfig c;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("config line " + std::to_string(lineno) + ": expected key = value");
    const auto key = trim(std::string_view(line).substr(0, eq));
    const auto value = trim(std::string_view(line).substr(eq + 1));
    auto one_int = [&] {
      const auto v = split<int>(value, key);
      if (v.size() != 1) throw FormatError("config key '" + key + "' takes one integer");
      return v[0];
    };
    if (key == "arch")
      c.arch = value;
    else if (key == "widths")
      c.widths = split<int>(value, key);
    else if (key == "in_channels")
      c.in_channels = one_int();
    else if (key == "n_classes")
      c.n_classes = one_int();
    else if (key == "rings")
      c.rings = one_int();
    else if (key == "streams")
      c.streams = split<int>(value, key);
    else if (key == "blocks")
      c.blocks = one_int();
    else if (key == "epsilon") {
      const auto v = split<double>(value, key);
      if (v.size() != 1) throw FormatError("config key 'epsilon' takes one number");
      c.epsilon = v[0];
    } else if (key == "levels")
      c.levels = one_int();
    else if (key == "ratios")
      c.ratios = split<double>(value, key);
    else if (key == "radii")
      c.radii = split<double>(value, key);
    else
      throw FormatError("unknown config key '" + key + "'");
  }
  c.validate();
  return c;
}

void ModelConfig::validate() const {
  if (arch != "uresnet" && arch != "classifier" && arch != "mnist") throw ShapeError("unknown architecture '" + arch + "'");
  if (streams != std::vector<int>{0} && streams != std::vector<int>{0, 1})
    throw ShapeError("streams must be {0} or {0,1}");
  if (rings < 1 || rings > 255) throw ShapeError("rings must lie in [1, 255]");
  if (in_channels < 1 || n_classes < 1) throw ShapeError("channel counts must be positive");
  for (int w : widths)
    if (w < 1) throw ShapeError("widths must be positive");
  if (arch == "mnist") {
    if (widths.size() != 2 * static_cast<size_t>(levels)) throw ShapeError("mnist needs two widths per level");
  } else {
    if (widths.size() != 2 || levels != 2) throw ShapeError(arch + " needs two widths and two levels");
    if (blocks < 1) throw ShapeError("blocks must be positive");
  }
  if (levels < 1) throw ShapeError("levels must be positive");
  if (!radii.empty() && radii.size() != static_cast<size_t>(levels)) throw ShapeError("radii must list one per level");
  if (levels > 1 && ratios.empty()) throw ShapeError("missing pooling ratios");
}

std::vector<int> required_orders(const std::vector<int>& streams) {
  std::set<int> m;
  for (int a : streams)
    for (int b : streams) m.insert(b - a);
  return {m.begin(), m.end()};
}

// ---- operators -------------------------------------------------------------

GraphOps::GraphOps(const PrecomputedGraph& graph, const std::vector<int>& streams) : rings_(graph.rings) {
  const auto orders = required_orders(streams);
  for (int m : orders)
    if (std::find(graph.orders.begin(), graph.orders.end(), m) == graph.orders.end())
      throw ShapeError("precomputed graph lacks rotation order " + std::to_string(m));

  for (size_t l = 0; l < graph.levels.size(); ++l) {
    const auto& level = graph.levels[l];
    const auto& t = level.conv;
    sizes_.push_back(level.size());
    for (int min : streams)
      for (int mout : streams) {
        const int m = mout - min;
        GraphOperator op;
        op.n_out = op.n_in = level.size();
        op.slots = t.rings;
        op.target = t.target;
        op.source = t.source;
        op.coef.resize(t.n_edges() * t.rings);
        for (size_t e = 0; e < t.n_edges(); ++e) {
          const auto P = std::polar(1.0, min * t.transport[e]);
          for (int q = 0; q < t.rings; ++q) op.coef[e * t.rings + q] = t.entry(e, m, q) * P;
        }
        op.finalize();
        conv_.emplace(std::make_tuple(l, m, min), std::move(op));
      }
    if (l + 1 < graph.levels.size()) {
      if (level.cluster.size() != level.size()) throw ShapeError("level " + std::to_string(l) + " has no cluster map");
      const size_t coarse = graph.levels[l + 1].size();
      std::vector<size_t> members(coarse, 0);
      for (Index c : level.cluster) ++members.at(c);
      if (std::find(members.begin(), members.end(), size_t{0}) != members.end())
        throw ShapeError("empty pooling cluster at level " + std::to_string(l + 1));
      for (int M : streams) {
        GraphOperator p, u;
        p.n_out = u.n_in = coarse;
        p.n_in = u.n_out = level.size();
        for (Index k = 0; k < level.size(); ++k) {
          const Index c = level.cluster[k];
          p.target.push_back(c);
          p.source.push_back(k);
          p.coef.push_back(std::polar(1.0 / static_cast<double>(members[c]), M * level.cluster_transport[k]));
          u.target.push_back(k);
          u.source.push_back(c);
          u.coef.push_back(std::polar(1.0, -M * level.cluster_transport[k]));
        }
        p.finalize();
        u.finalize();
        pool_.emplace(std::make_pair(l, M), std::move(p));
        unpool_.emplace(std::make_pair(l, M), std::move(u));
      }
    }
  }
}

const GraphOperator& GraphOps::conv(size_t level, int m, int order_in) const {
  const auto it = conv_.find({level, m, order_in});
  if (it == conv_.end()) throw ShapeError("no convolution operator for this level/order");
  return it->second;
}

const GraphOperator& GraphOps::pool(size_t level, int order) const {
  const auto it = pool_.find({level, order});
  if (it == pool_.end()) throw ShapeError("no pooling operator from level " + std::to_string(level));
  return it->second;
}

const GraphOperator& GraphOps::unpool(size_t level, int order) const {
  const auto it = unpool_.find({level, order});
  if (it == unpool_.end()) throw ShapeError("no unpooling operator into level " + std::to_string(level));
  return it->second;
}

// ---- parameter layout --------------------------------------------------------

namespace {

std::string conn(int min, int mout) { return std::to_string(min) + ">" + std::to_string(mout); }

struct Layout {
  const ModelConfig& c;
  std::vector<ParameterBlock> blocks;

  void conv(const std::string& p, int cin, int cout, const std::vector<int>& in, const std::vector<int>& out) {
    for (int a : in)
      for (int b : out) {
        blocks.push_back({p + ".rho." + conn(a, b), static_cast<Eigen::Index>(c.rings) * cin, cout});
        blocks.push_back({p + ".beta." + conn(a, b), cin, cout});
      }
  }
  void relu(const std::string& p, int ch) {
    for (int M : c.streams) blocks.push_back({p + ".b." + std::to_string(M), 1, ch});
  }
  void linear(const std::string& p, int cin, int cout) {
    blocks.push_back({p + ".W", cin, cout});
    blocks.push_back({p + ".b", 1, cout});
  }
  void resblock(const std::string& p, int ch) {
    conv(p + ".conv1", ch, ch, c.streams, c.streams);
    relu(p + ".relu1", ch);
    conv(p + ".conv2", ch, ch, c.streams, c.streams);
    relu(p + ".relu2", ch);
  }
};

std::string stack_name(int s, int b) { return "s" + std::to_string(s) + ".b" + std::to_string(b); }

}  // namespace

std::vector<ParameterBlock> parameter_layout(const ModelConfig& c) {
  c.validate();
  Layout L{c, {}};
  const std::vector<int> zero = {0};
  if (c.arch == "uresnet") {
    const int w0 = c.widths[0], w1 = c.widths[1];
    L.linear("lift0", c.in_channels, w0);
    for (int b = 0; b < c.blocks; ++b) L.resblock(stack_name(1, b), w0);
    L.linear("lift1", w0, w1);
    for (int b = 0; b < c.blocks; ++b) L.resblock(stack_name(2, b), w1);
    for (int b = 0; b < c.blocks; ++b) L.resblock(stack_name(3, b), w1);
    L.linear("merge", w1 + w0, w0);
    for (int b = 0; b < c.blocks; ++b) L.resblock(stack_name(4, b), w0);
    L.conv("head", w0, c.n_classes, c.streams, zero);
  } else if (c.arch == "classifier") {
    const int w0 = c.widths[0], w1 = c.widths[1];
    L.linear("lift0", c.in_channels, w0);
    for (int b = 0; b < c.blocks; ++b) L.resblock(stack_name(1, b), w0);
    L.linear("lift1", w0, w1);
    for (int b = 0; b < c.blocks; ++b) L.resblock(stack_name(2, b), w1);
    L.conv("head", w1, c.n_classes, c.streams, zero);
  } else {
    int cin = c.in_channels;
    for (size_t k = 0; k < c.widths.size(); ++k) {
      const std::string p = "c" + std::to_string(k);
      L.conv(p, cin, c.widths[k], k == 0 ? zero : c.streams, c.streams);
      L.relu("r" + std::to_string(k), c.widths[k]);
      cin = c.widths[k];
    }
    L.conv("head", cin, c.n_classes, c.streams, zero);
  }
  return L.blocks;
}

size_t count_parameters(const ModelConfig& config) {
  size_t n = 0;
  for (const auto& b : parameter_layout(config)) n += static_cast<size_t>(b.rows * b.cols);
  return n;
}

size_t count_conv_parameters(const ModelConfig& config) {
  size_t n = 0;
  for (const auto& b : parameter_layout(config))
    if (b.name.find(".rho.") != std::string::npos || b.name.find(".beta.") != std::string::npos)
      n += static_cast<size_t>(b.rows * b.cols);
  return n;
}

ad::ParamMatrix radial_profile(const ad::ParamMatrix& rho, int rings, double r, double eps) {
  if (rho.rows() % rings != 0) throw ShapeError("rho must have Q * C_in rows");
  const Eigen::Index cin = rho.rows() / rings;
  const auto mu = interpolation_weights(r, rings, eps);
  ad::ParamMatrix R = ad::ParamMatrix::Zero(cin, rho.cols());
  for (int q = 0; q < rings; ++q)
    if (mu[q] != 0.0) R += mu[q] * rho.middleRows(q * cin, cin);
  return R;
}

// ---- network -----------------------------------------------------------------

Network::Network(ModelConfig config) : config_(std::move(config)) {
  for (const auto& b : parameter_layout(config_)) params_.add(b.name, b.rows, b.cols);
}

size_t Network::feature_level() const {
  if (config_.arch == "uresnet") return 0;
  if (config_.arch == "classifier") return 1;
  return static_cast<size_t>(config_.levels - 1);
}

void Network::initialize(uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  for (size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k];
    const auto& name = p.name;
    if (name.find(".rho.") != std::string::npos) {
      const double cin = static_cast<double>(p.value.rows()) / config_.rings;
      // support weights sum to one and spread over Q rings, so each ring sees
      // about 1/Q of the mass: fan-in C_in / Q keeps smooth signals at unit gain
      std::normal_distribution<double> n(0.0, std::sqrt(config_.rings / cin));
      for (auto& v : p.value.reshaped()) v = n(rng);
    } else if (name.find(".beta.") != std::string::npos) {
      for (auto& v : p.value.reshaped()) v = phase(rng);
    } else if (name.size() > 2 && name.substr(name.size() - 2) == ".W") {
      std::normal_distribution<double> n(0.0, 1.0 / std::sqrt(static_cast<double>(p.value.rows())));
      for (auto& v : p.value.reshaped()) v = n(rng);
    } else {
      p.value.setZero();
    }
    p.grad.setZero();
  }
}

// ---- layers ------------------------------------------------------------------

template <typename Real>
ad::Var stream_mix(ad::Tape<Real>& t, const std::vector<ad::Var>& contributions) {
  if (contributions.empty()) throw ShapeError("stream_mix needs at least one contribution");
  ad::Var acc = contributions[0];
  for (size_t k = 1; k < contributions.size(); ++k) acc = ad::add(t, acc, contributions[k]);
  return acc;
}

template <typename Real>
Streams harmonic_conv(ad::Tape<Real>& t, ad::ParameterSet& params, const std::string& prefix, const GraphOps& ops,
                      size_t level, const Streams& x, const std::vector<int>& in_orders,
                      const std::vector<int>& out_orders) {
  if (x.size() != in_orders.size()) throw ShapeError("harmonic_conv: one input per input order required");
  const int max_order = *std::max_element(out_orders.begin(), out_orders.end());
  Streams out(static_cast<size_t>(max_order) + 1, ad::Var{});
  // gathered inputs are shared between the connections with the same (m, M_in)
  for (int mout : out_orders) {
    std::vector<ad::Var> parts;
    for (size_t a = 0; a < in_orders.size(); ++a) {
      const int min = in_orders[a];
      const auto& op = ops.conv(level, mout - min, min);
      const ad::Var gathered = ad::graph_apply(t, x[a], op);
      const auto tag = "." + conn(min, mout);
      const ad::Var K = ad::harmonic_kernel(t, t.parameter(params.get(prefix + ".rho" + tag)),
                                            t.parameter(params.get(prefix + ".beta" + tag)));
      parts.push_back(ad::complex_matmul(t, gathered, K));
    }
    out[static_cast<size_t>(mout)] = stream_mix(t, parts);
  }
  return out;
}

template <typename Real>
Streams mean_pool(ad::Tape<Real>& t, const GraphOps& ops, size_t level, const Streams& x,
                  const std::vector<int>& orders) {
  Streams out;
  for (size_t a = 0; a < orders.size(); ++a) out.push_back(ad::graph_apply(t, x[a], ops.pool(level, orders[a])));
  return out;
}

template <typename Real>
Streams unpool(ad::Tape<Real>& t, const GraphOps& ops, size_t level, const Streams& x, const std::vector<int>& orders) {
  Streams out;
  for (size_t a = 0; a < orders.size(); ++a) out.push_back(ad::graph_apply(t, x[a], ops.unpool(level, orders[a])));
  return out;
}

template <typename Real>
Streams complex_linear(ad::Tape<Real>& t, ad::ParameterSet& params, const std::string& prefix, const Streams& x,
                       const std::vector<int>& orders) {
  const ad::Var W = t.parameter(params.get(prefix + ".W"));
  Streams out;
  for (size_t a = 0; a < orders.size(); ++a) {
    ad::Var y = ad::real_matmul(t, x[a], W);
    // a bias on M != 0 would break equivariance
    if (orders[a] == 0) y = ad::add_bias(t, y, t.parameter(params.get(prefix + ".b")));
    out.push_back(y);
  }
  return out;
}

template <typename Real>
Streams relu_streams(ad::Tape<Real>& t, ad::ParameterSet& params, const std::string& prefix, const Streams& x,
                     const std::vector<int>& orders) {
  Streams out;
  for (size_t a = 0; a < orders.size(); ++a)
    out.push_back(ad::complex_relu(t, x[a], t.parameter(params.get(prefix + ".b." + std::to_string(orders[a])))));
  return out;
}

template <typename Real>
Streams resnet_block(ad::Tape<Real>& t, ad::ParameterSet& params, const std::string& prefix, const GraphOps& ops,
                     size_t level, const Streams& x, const std::vector<int>& orders) {
  auto h = harmonic_conv(t, params, prefix + ".conv1", ops, level, x, orders, orders);
  h = relu_streams(t, params, prefix + ".relu1", h, orders);
  h = harmonic_conv(t, params, prefix + ".conv2", ops, level, h, orders, orders);
  for (size_t a = 0; a < orders.size(); ++a) h[a] = ad::add(t, h[a], x[a]);
  return relu_streams(t, params, prefix + ".relu2", h, orders);
}

template <typename Real>
ad::Var global_mean_pool_radial(ad::Tape<Real>& t, ad::Var x) {
  return ad::mean_rows(t, ad::modulus(t, x));
}

template <typename Real>
ad::Var Network::forward(ad::Tape<Real>& t, const GraphOps& ops, const ad::Plane<Real>& input,
                         ForwardTrace<Real>* trace) {
  const auto& c = config_;
  const auto& S = c.streams;
  const std::vector<int> zero = {0};
  if (ops.n_levels() < static_cast<size_t>(c.levels)) throw ShapeError("graph has fewer levels than the model");
  if (ops.rings() != c.rings) throw ShapeError("graph ring count differs from the model's");
  if (input.rows() != static_cast<Eigen::Index>(ops.size(0)) || input.cols() != c.in_channels)
    throw ShapeError("input must have one row per vertex and in_channels columns");

  using Mat = ad::Plane<Real>;
  // real inputs seed the M = 0 stream; M = 1 starts at zero
  const ad::Var x0 = t.constant(input, Mat::Zero(input.rows(), input.cols()));
  auto zeros = [&](size_t level, int ch) {
    const auto n = static_cast<Eigen::Index>(ops.size(level));
    return t.constant(Mat::Zero(n, ch), Mat::Zero(n, ch));
  };

  Streams h;
  ad::Var head;
  if (c.arch == "uresnet" || c.arch == "classifier") {
    const int w0 = c.widths[0];
    h = complex_linear(t, params_, "lift0", Streams{x0}, zero);
    if (S.size() > 1) h.push_back(zeros(0, w0));
    for (int b = 0; b < c.blocks; ++b) h = resnet_block(t, params_, stack_name(1, b), ops, 0, h, S);
    const Streams skip = h;
    h = mean_pool(t, ops, 0, h, S);
    h = complex_linear(t, params_, "lift1", h, S);
    for (int b = 0; b < c.blocks; ++b) h = resnet_block(t, params_, stack_name(2, b), ops, 1, h, S);
    if (c.arch == "uresnet") {
      for (int b = 0; b < c.blocks; ++b) h = resnet_block(t, params_, stack_name(3, b), ops, 1, h, S);
      h = unpool(t, ops, 0, h, S);
      for (size_t a = 0; a < S.size(); ++a) h[a] = ad::concat_cols(t, h[a], skip[a]);
      h = complex_linear(t, params_, "merge", h, S);
      for (int b = 0; b < c.blocks; ++b) h = resnet_block(t, params_, stack_name(4, b), ops, 0, h, S);
      head = harmonic_conv(t, params_, "head", ops, 0, h, S, zero)[0];
    } else {
      head = harmonic_conv(t, params_, "head", ops, 1, h, S, zero)[0];
    }
  } else {
    h = Streams{x0};
    for (size_t k = 0; k < c.widths.size(); ++k) {
      const size_t level = k / 2;
      if (k > 0 && k % 2 == 0) h = mean_pool(t, ops, level - 1, h, S);
      h = harmonic_conv(t, params_, "c" + std::to_string(k), ops, level, h, k == 0 ? zero : S, S);
      h = relu_streams(t, params_, "r" + std::to_string(k), h, S);
    }
    head = harmonic_conv(t, params_, "head", ops, static_cast<size_t>(c.levels - 1), h, S, zero)[0];
  }
  if (trace) {
    trace->features = h;
    trace->head = head;
  }
  return c.classification() ? global_mean_pool_radial(t, head) : ad::modulus(t, head);
}

#define HSN_INSTANTIATE(R)                                                                                      \
  template ad::Var stream_mix<R>(ad::Tape<R>&, const std::vector<ad::Var>&);                                   \
  template Streams harmonic_conv<R>(ad::Tape<R>&, ad::ParameterSet&, const std::string&, const GraphOps&, size_t, \
                                    const Streams&, const std::vector<int>&, const std::vector<int>&);          \
  template Streams mean_pool<R>(ad::Tape<R>&, const GraphOps&, size_t, const Streams&, const std::vector<int>&); \
  template Streams unpool<R>(ad::Tape<R>&, const GraphOps&, size_t, const Streams&, const std::vector<int>&);    \
  template Streams complex_linear<R>(ad::Tape<R>&, ad::ParameterSet&, const std::string&, const Streams&,        \
                                     const std::vector<int>&);                                                  \
  template Streams relu_streams<R>(ad::Tape<R>&, ad::ParameterSet&, const std::string&, const Streams&,          \
                                   const std::vector<int>&);                                                    \
  template Streams resnet_block<R>(ad::Tape<R>&, ad::ParameterSet&, const std::string&, const GraphOps&, size_t, \
                                   const Streams&, const std::vector<int>&);                                    \
  template ad::Var global_mean_pool_radial<R>(ad::Tape<R>&, ad::Var);                                          \
  template ad::Var Network::forward<R>(ad::Tape<R>&, const GraphOps&, const ad::Plane<R>&, ForwardTrace<R>*);

HSN_INSTANTIATE(float)
HSN_INSTANTIATE(double)

#undef HSN_INSTANTIATE

}  // namespace hsn
