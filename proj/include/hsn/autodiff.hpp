#pragma once

#include <Eigen/Core>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hsn/kernels.hpp"

namespace hsn::ad {

template <typename Real>
using Plane = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ParamMatrix = Plane<double>;

/// A learnable real matrix. Values and gradients are always kept in double;
/// tapes of lower precision cast on the way in and out.
struct Parameter {
  std::string name;
  ParamMatrix value;
  ParamMatrix grad;
};

/// Parameters in creation order (which fixes checkpoint layout and the
/// order of random initialization).
class ParameterSet {
 public:
  Parameter& add(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  size_t size() const { return params_.size(); }
  Parameter& operator[](size_t k) { return *params_[k]; }
  const Parameter& operator[](size_t k) const { return *params_[k]; }

  size_t n_scalars() const;
  void zero_grad();

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

template <typename Real>
class Tape;

/// Handle to a tape node.
struct Var {
  int id = -1;
};

/// Reverse-mode tape over real or complex matrices. Complex values are two
/// real planes; gradients follow the same split (d/d re, d/d im).
template <typename Real>
class Tape {
 public:
  using Mat = Plane<Real>;
  using Backward = std::function<void(Tape&, int self)>;

  explicit Tape(bool parallel_kernels = true) : parallel_(parallel_kernels) {}

  Var constant(Mat re, Mat im);
  Var constant(Mat re);
  /// Leaf bound to a parameter; backward accumulates into `p.grad`.
  Var parameter(Parameter& p);
  Var push(Mat re, Mat im, bool complex, Backward backward);

  const Mat& re(Var v) const { return nodes_[v.id].re; }
  const Mat& im(Var v) const { return nodes_[v.id].im; }
  bool is_complex(Var v) const { return nodes_[v.id].complex; }
  Eigen::Index rows(Var v) const { return nodes_[v.id].re.rows(); }
  Eigen::Index cols(Var v) const { return nodes_[v.id].re.cols(); }

  /// Gradient planes, valid during and after backward().
  Mat& grad_re(int id) { return nodes_[id].gre; }
  Mat& grad_im(int id) { return nodes_[id].gim; }
  Mat& grad_re(Var v) { return grad_re(v.id); }
  Mat& grad_im(Var v) { return grad_im(v.id); }

  /// Seeds d loss = 1 at a 1x1 real node and runs every adjoint in reverse order.
  void backward(Var loss);
  Real scalar(Var v) const;

  bool parallel_kernels() const { return parallel_; }
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat re, im, gre, gim;
    bool complex = false;
    Backward backward;
  };
  std::deque<Node> nodes_;
  bool parallel_;
};

// ---- primitives ------------------------------------------------------------

template <typename Real>
Var add(Tape<Real>& t, Var a, Var b);
template <typename Real>
Var scale(Tape<Real>& t, Var a, double s);
/// Elementwise product with constant complex factors (same shape as x).
template <typename Real>
Var pointwise_mul(Tape<Real>& t, Var x, const Plane<Real>& cre, const Plane<Real>& cim);
/// Same real matrix applied to both planes: x W.
template <typename Real>
Var real_matmul(Tape<Real>& t, Var x, Var W);
/// Bias (1 x C real) added to the real plane only.
template <typename Real>
Var add_bias(Tape<Real>& t, Var x, Var b);
/// Complex matrix product X K.
template <typename Real>
Var complex_matmul(Tape<Real>& t, Var X, Var K);
/// Kernel matrix rho_q e^{i beta} with rows q * C_in + c_in.
/// rho: (Q C_in) x C_out, beta: C_in x C_out, both real.
template <typename Real>
Var harmonic_kernel(Tape<Real>& t, Var rho, Var beta);
/// Sparse complex operator (gather, coefficient multiply, scatter).
template <typename Real>
Var graph_apply(Tape<Real>& t, Var x, const GraphOperator& op);
/// ReLU(|x| + b) x / |x| per channel bias b (1 x C).
template <typename Real>
Var complex_relu(Tape<Real>& t, Var x, Var b);
template <typename Real>
Var concat_cols(Tape<Real>& t, Var a, Var b);
/// |x| as a real matrix.
template <typename Real>
Var modulus(Tape<Real>& t, Var x);
/// Mean over rows: 1 x C.
template <typename Real>
Var mean_rows(Tape<Real>& t, Var x);
/// Mean over rows of -log softmax(logits)[label].
template <typename Real>
Var nll_loss(Tape<Real>& t, Var logits, std::span<const int> labels);
/// sum Re(conj(w) x), for projections in tests.
template <typename Real>
Var inner(Tape<Real>& t, Var x, const Plane<Real>& wre, const Plane<Real>& wim);

// ---- optimizer -------------------------------------------------------------

struct AdamOptions {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : opt_(options) {}
  /// One bias-corrected update from the accumulated gradients. Throws
  /// NumericalError (leaving every parameter untouched) on non-finite gradients.
  void step(ParameterSet& params);
  long steps() const { return t_; }
  const AdamOptions& options() const { return opt_; }
  void set_lr(double lr) { opt_.lr = lr; }

 private:
  AdamOptions opt_;
  long t_ = 0;
  std::vector<ParamMatrix> m_, v_;
};

}  // namespace hsn::ad
