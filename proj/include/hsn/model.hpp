#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hsn/autodiff.hpp"
#include "hsn/kernels.hpp"
#include "hsn/precompute.hpp"

namespace hsn {

/// Architecture description; serialized as `key = value` lines.
///
///  uresnet     lift -> stack(w0) -> pool -> lift -> stack(w1) x2 -> unpool ->
///              merge skip -> stack(w0) -> conv head, per-vertex logits
///  classifier  lift -> block(w0) -> pool -> lift -> block(w1) -> conv head ->
///              radial global mean pool
///  mnist       two convs per scale at widths[2l], widths[2l+1], pooling between
///              scales, conv head, radial global mean pool
struct ModelConfig {
  std::string arch = "uresnet";
  std::vector<int> widths = {16, 32};
  int in_channels = 3;
  int n_classes = 8;
  int rings = 6;
  std::vector<int> streams = {0, 1};
  int blocks = 2;                        // ResNet blocks per stack
  // geometry the operators must be built with
  double epsilon = 0.2;
  int levels = 2;
  std::vector<double> ratios = {0.25};
  std::vector<double> radii;             // optional explicit per-level radii

  bool classification() const { return arch != "uresnet"; }
  int n_streams() const { return static_cast<int>(streams.size()); }

  std::string to_text() const;
  static ModelConfig parse(std::string_view text);
  /// Throws ShapeError on inconsistent settings.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Rotation orders every cache must carry for the stream set.
std::vector<int> required_orders(const std::vector<int>& streams);

/// Per-mesh sparse operators derived from a precomputed graph: one
/// convolution operator per (level, m, input order) with the transport
/// e^{i M_in phi} folded into the ring coefficients, and pooling/unpooling
/// operators per (level, order).
class GraphOps {
 public:
  GraphOps(const PrecomputedGraph& graph, const std::vector<int>& streams);

  size_t n_levels() const { return sizes_.size(); }
  size_t size(size_t level) const { return sizes_.at(level); }
  int rings() const { return rings_; }
  const GraphOperator& conv(size_t level, int m, int order_in) const;
  const GraphOperator& pool(size_t level, int order) const;    // level -> level + 1
  const GraphOperator& unpool(size_t level, int order) const;  // level + 1 -> level

 private:
  int rings_ = 0;
  std::vector<size_t> sizes_;
  std::map<std::tuple<size_t, int, int>, GraphOperator> conv_;
  std::map<std::pair<size_t, int>, GraphOperator> pool_, unpool_;
};

/// Intermediate results a caller may want besides the logits.
template <typename Real>
struct ForwardTrace {
  std::vector<ad::Var> features;   // streams entering the head, indexed by order position
  ad::Var head;                    // M = 0 output of the head conv (complex)
};

/// Parameter blocks of a config, in creation order, without building anything.
struct ParameterBlock {
  std::string name;
  Eigen::Index rows, cols;
};
std::vector<ParameterBlock> parameter_layout(const ModelConfig& config);

/// Learnable scalars of a config.
size_t count_parameters(const ModelConfig& config);
/// Learnable scalars in harmonic convolutions only (rho and beta).
size_t count_conv_parameters(const ModelConfig& config);

class Network {
 public:
  explicit Network(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  /// Level on which ForwardTrace features and the head live.
  size_t feature_level() const;
  ad::ParameterSet& parameters() { return params_; }
  const ad::ParameterSet& parameters() const { return params_; }

  /// rho ~ N(0, sqrt(Q / C_in)), beta ~ U[0, 2 pi), linear weights
  /// ~ N(0, 1/sqrt(C_in)), biases 0.
  void initialize(uint64_t seed);

  /// `input` holds one real row per level-0 node. Returns N x K logits
  /// (uresnet) or 1 x K (classifiers).
  template <typename Real>
  ad::Var forward(ad::Tape<Real>& tape, const GraphOps& ops, const ad::Plane<Real>& input,
                  ForwardTrace<Real>* trace = nullptr);

 private:
  ModelConfig config_;
  ad::ParameterSet params_;
};

// ---- layer functions (exposed for tests) --------------------------------------

using Streams = std::vector<ad::Var>;  // indexed by position in ModelConfig::streams

/// Radial profile R(r) = sum_q mu_q(r) rho_q for one connection; rho is
/// (Q C_in) x C_out and ring Q is fixed to zero.
ad::ParamMatrix radial_profile(const ad::ParamMatrix& rho, int rings, double r, double eps);

/// Harmonic convolution from `in_orders` to `out_orders`; parameters named
/// `<prefix>.rho.<Min>><Mout>` and `<prefix>.beta.<Min>><Mout>`.
template <typename Real>
Streams harmonic_conv(ad::Tape<Real>& t, ad::ParameterSet& params, const std::string& prefix, const GraphOps& ops,
                      size_t level, const Streams& x, const std::vector<int>& in_orders,
                      const std::vector<int>& out_orders);

/// Sum of the contributions landing in each destination order.
template <typename Real>
ad::Var stream_mix(ad::Tape<Real>& t, const std::vector<ad::Var>& contributions);

template <typename Real>
Streams mean_pool(ad::Tape<Real>& t, const GraphOps& ops, size_t level, const Streams& x,
                  const std::vector<int>& orders);
template <typename Real>
Streams unpool(ad::Tape<Real>& t, const GraphOps& ops, size_t level, const Streams& x, const std::vector<int>& orders);

/// Real matrix on both planes of every stream; bias only on M = 0.
template <typename Real>
Streams complex_linear(ad::Tape<Real>& t, ad::ParameterSet& params, const std::string& prefix, const Streams& x,
                       const std::vector<int>& orders);

/// C-ReLU with one bias per channel per stream.
template <typename Real>
Streams relu_streams(ad::Tape<Real>& t, ad::ParameterSet& params, const std::string& prefix, const Streams& x,
                     const std::vector<int>& orders);

/// conv -> C-ReLU -> conv, residual add, C-ReLU.
template <typename Real>
Streams resnet_block(ad::Tape<Real>& t, ad::ParameterSet& params, const std::string& prefix, const GraphOps& ops,
                     size_t level, const Streams& x, const std::vector<int>& orders);

/// Per-channel mean over nodes of |x|.
template <typename Real>
ad::Var global_mean_pool_radial(ad::Tape<Real>& t, ad::Var x);

}  // namespace hsn
