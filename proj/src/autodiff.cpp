#include "hsn/autodiff.hpp"

#include <cmath>

#include "hsn/error.hpp"

namespace hsn::ad {

Parameter& ParameterSet::add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  if (contains(name)) throw ShapeError("duplicate parameter '" + name + "'");
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = ParamMatrix::Zero(rows, cols);
  p->grad = ParamMatrix::Zero(rows, cols);
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParameterSet::get(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return *p;
  throw ShapeError("no parameter named '" + name + "'");
}

const Parameter& ParameterSet::get(const std::string& name) const {
  return const_cast<ParameterSet*>(this)->get(name);
}

bool ParameterSet::contains(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return true;
  return false;
}

size_t ParameterSet::n_scalars() const {
  size_t n = 0;
  for (const auto& p : params_) n += static_cast<size_t>(p->value.size());
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->grad.setZero();
}

// ---- tape ------------------------------------------------------------------

template <typename Real>
Var Tape<Real>::push(Mat re, Mat im, bool complex, Backward backward) {
  if (complex && (im.rows() != re.rows() || im.cols() != re.cols()))
    throw ShapeError("real and imaginary planes differ in shape");
  Node n;
  n.re = std::move(re);
  if (complex) n.im = std::move(im);
  n.complex = complex;
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

template <typename Real>
Var Tape<Real>::constant(Mat re, Mat im) {
  return push(std::move(re), std::move(im), true, nullptr);
}

template <typename Real>
Var Tape<Real>::constant(Mat re) {
  return push(std::move(re), Mat(), false, nullptr);
}

template <typename Real>
Var Tape<Real>::parameter(Parameter& p) {
  Parameter* target = &p;
  return push(p.value.template cast<Real>(), Mat(), false, [target](Tape& t, int self) {
    target->grad += t.grad_re(self).template cast<double>();
  });
}

template <typename Real>
void Tape<Real>::backward(Var loss) {
  auto& root = nodes_.at(loss.id);
  if (root.complex || root.re.size() != 1) throw ShapeError("backward needs a real scalar loss");
  for (auto& n : nodes_) {
    n.gre = Mat::Zero(n.re.rows(), n.re.cols());
    if (n.complex) n.gim = Mat::Zero(n.im.rows(), n.im.cols());
  }
  root.gre(0, 0) = Real(1);
  for (int id = loss.id; id >= 0; --id)
    if (nodes_[id].backward) nodes_[id].backward(*this, id);
}

template <typename Real>
Real Tape<Real>::scalar(Var v) const {
  const auto& n = nodes_.at(v.id);
  if (n.re.size() != 1) throw ShapeError("node is not a scalar");
  return n.re(0, 0);
}

// ---- primitives ------------------------------------------------------------

namespace {

template <typename Real>
void same_shape(const Tape<Real>& t, Var a, Var b, const char* what) {
  if (t.rows(a) != t.rows(b) || t.cols(a) != t.cols(b) || t.is_complex(a) != t.is_complex(b))
    throw ShapeError(std::string(what) + ": operand shapes differ");
}

template <typename Real>
void require_complex(const Tape<Real>& t, Var a, const char* what) {
  if (!t.is_complex(a)) throw ShapeError(std::string(what) + " needs a complex operand");
}

}  // namespace

template <typename Real>
Var add(Tape<Real>& t, Var a, Var b) {
  same_shape(t, a, b, "add");
  const bool c = t.is_complex(a);
  typename Tape<Real>::Mat im;
  if (c) im = t.im(a) + t.im(b);
  return t.push(t.re(a) + t.re(b), std::move(im), c, [a, b, c](Tape<Real>& t, int self) {
    t.grad_re(a) += t.grad_re(self);
    t.grad_re(b) += t.grad_re(self);
    if (c) {
      t.grad_im(a) += t.grad_im(self);
      t.grad_im(b) += t.grad_im(self);
    }
  });
}

template <typename Real>
Var scale(Tape<Real>& t, Var a, double s) {
  const bool c = t.is_complex(a);
  const auto k = static_cast<Real>(s);
  typename Tape<Real>::Mat im;
  if (c) im = k * t.im(a);
  return t.push(k * t.re(a), std::move(im), c, [a, c, k](Tape<Real>& t, int self) {
    t.grad_re(a) += k * t.grad_re(self);
    if (c) t.grad_im(a) += k * t.grad_im(self);
  });
}

template <typename Real>
Var pointwise_mul(Tape<Real>& t, Var x, const Plane<Real>& cre, const Plane<Real>& cim) {
  require_complex(t, x, "pointwise_mul");
  if (cre.rows() != t.rows(x) || cre.cols() != t.cols(x) || cim.rows() != cre.rows() || cim.cols() != cre.cols())
    throw ShapeError("pointwise_mul: factor shape differs from the operand");
  const auto& xr = t.re(x);
  const auto& xi = t.im(x);
  typename Tape<Real>::Mat re = cre.cwiseProduct(xr) - cim.cwiseProduct(xi);
  typename Tape<Real>::Mat im = cre.cwiseProduct(xi) + cim.cwiseProduct(xr);
  return t.push(std::move(re), std::move(im), true, [x, cre, cim](Tape<Real>& t, int self) {
    // adjoint: multiply by conj(c)
    const auto& gr = t.grad_re(self);
    const auto& gi = t.grad_im(self);
    t.grad_re(x) += cre.cwiseProduct(gr) + cim.cwiseProduct(gi);
    t.grad_im(x) += cre.cwiseProduct(gi) - cim.cwiseProduct(gr);
  });
}

template <typename Real>
Var real_matmul(Tape<Real>& t, Var x, Var W) {
  if (t.is_complex(W)) throw ShapeError("real_matmul needs a real weight");
  if (t.cols(x) != t.rows(W)) throw ShapeError("real_matmul: inner dimensions differ");
  const bool c = t.is_complex(x);
  typename Tape<Real>::Mat im;
  if (c) im = t.im(x) * t.re(W);
  return t.push(t.re(x) * t.re(W), std::move(im), c, [x, W, c](Tape<Real>& t, int self) {
    const auto& Wv = t.re(W);
    t.grad_re(x) += t.grad_re(self) * Wv.transpose();
    t.grad_re(W) += t.re(x).transpose() * t.grad_re(self);
    if (c) {
      t.grad_im(x) += t.grad_im(self) * Wv.transpose();
      t.grad_re(W) += t.im(x).transpose() * t.grad_im(self);
    }
  });
}

template <typename Real>
Var add_bias(Tape<Real>& t, Var x, Var b) {
  if (t.is_complex(b) || t.rows(b) != 1 || t.cols(b) != t.cols(x)) throw ShapeError("add_bias: bias must be 1 x C real");
  const bool c = t.is_complex(x);
  typename Tape<Real>::Mat re = t.re(x).rowwise() + t.re(b).row(0);
  typename Tape<Real>::Mat im;
  if (c) im = t.im(x);
  return t.push(std::move(re), std::move(im), c, [x, b, c](Tape<Real>& t, int self) {
    t.grad_re(x) += t.grad_re(self);
    if (c) t.grad_im(x) += t.grad_im(self);
    t.grad_re(b) += t.grad_re(self).colwise().sum();
  });
}

template <typename Real>
Var complex_matmul(Tape<Real>& t, Var X, Var K) {
  require_complex(t, X, "complex_matmul");
  require_complex(t, K, "complex_matmul");
  if (t.cols(X) != t.rows(K)) throw ShapeError("complex_matmul: inner dimensions differ");
  const auto &Xr = t.re(X), &Xi = t.im(X), &Kr = t.re(K), &Ki = t.im(K);
  typename Tape<Real>::Mat re = Xr * Kr - Xi * Ki;
  typename Tape<Real>::Mat im = Xr * Ki + Xi * Kr;
  return t.push(std::move(re), std::move(im), true, [X, K](Tape<Real>& t, int self) {
    const auto &Xr = t.re(X), &Xi = t.im(X), &Kr = t.re(K), &Ki = t.im(K);
    const auto &gr = t.grad_re(self), &gi = t.grad_im(self);
    t.grad_re(X) += gr * Kr.transpose() + gi * Ki.transpose();
    t.grad_im(X) += gi * Kr.transpose() - gr * Ki.transpose();
    t.grad_re(K) += Xr.transpose() * gr + Xi.transpose() * gi;
    t.grad_im(K) += Xr.transpose() * gi - Xi.transpose() * gr;
  });
}

template <typename Real>
Var harmonic_kernel(Tape<Real>& t, Var rho, Var beta) {
  if (t.is_complex(rho) || t.is_complex(beta)) throw ShapeError("harmonic_kernel needs real rho and beta");
  const Eigen::Index cin = t.rows(beta), cout = t.cols(beta);
  if (t.cols(rho) != cout || cin == 0 || t.rows(rho) % cin != 0)
    throw ShapeError("harmonic_kernel: rho must be (Q C_in) x C_out");
  const Eigen::Index Q = t.rows(rho) / cin;
  const typename Tape<Real>::Mat cosb = t.re(beta).array().cos();
  const typename Tape<Real>::Mat sinb = t.re(beta).array().sin();
  typename Tape<Real>::Mat re(t.rows(rho), cout), im(t.rows(rho), cout);
  for (Eigen::Index q = 0; q < Q; ++q) {
    re.middleRows(q * cin, cin) = t.re(rho).middleRows(q * cin, cin).cwiseProduct(cosb);
    im.middleRows(q * cin, cin) = t.re(rho).middleRows(q * cin, cin).cwiseProduct(sinb);
  }
  return t.push(std::move(re), std::move(im), true, [rho, beta, Q, cin, cosb, sinb](Tape<Real>& t, int self) {
    const auto &gr = t.grad_re(self), &gi = t.grad_im(self);
    for (Eigen::Index q = 0; q < Q; ++q) {
      const auto gq_r = gr.middleRows(q * cin, cin);
      const auto gq_i = gi.middleRows(q * cin, cin);
      const auto rq = t.re(rho).middleRows(q * cin, cin);
      t.grad_re(rho).middleRows(q * cin, cin) += gq_r.cwiseProduct(cosb) + gq_i.cwiseProduct(sinb);
      t.grad_re(beta) += rq.cwiseProduct(gq_i.cwiseProduct(cosb) - gq_r.cwiseProduct(sinb));
    }
  });
}

template <typename Real>
Var graph_apply(Tape<Real>& t, Var x, const GraphOperator& op) {
  require_complex(t, x, "graph_apply");
  const auto C = static_cast<size_t>(t.cols(x));
  using Mat = typename Tape<Real>::Mat;
  Mat re = Mat::Zero(static_cast<Eigen::Index>(op.n_out), static_cast<Eigen::Index>(C * op.slots));
  Mat im = Mat::Zero(re.rows(), re.cols());
  const PlaneView<Real> in{t.re(x).data(), t.im(x).data(), static_cast<size_t>(t.rows(x)), C};
  const MutablePlaneView<Real> out{re.data(), im.data(), op.n_out, C * op.slots};
  if (t.parallel_kernels())
    gather_scatter_parallel(op, in, out);
  else
    gather_scatter_serial(op, in, out);
  const GraphOperator* A = &op;
  return t.push(std::move(re), std::move(im), true, [x, A, C](Tape<Real>& t, int self) {
    const PlaneView<Real> g{t.grad_re(self).data(), t.grad_im(self).data(), A->n_out, C * A->slots};
    const MutablePlaneView<Real> gx{t.grad_re(x).data(), t.grad_im(x).data(), A->n_in, C};
    if (t.parallel_kernels())
      gather_scatter_adjoint_parallel(*A, g, gx);
    else
      gather_scatter_adjoint_serial(*A, g, gx);
  });
}

template <typename Real>
Var complex_relu(Tape<Real>& t, Var x, Var b) {
  require_complex(t, x, "complex_relu");
  if (t.is_complex(b) || t.rows(b) != 1 || t.cols(b) != t.cols(x))
    throw ShapeError("complex_relu: bias must be 1 x C real");
  using Mat = typename Tape<Real>::Mat;
  const auto &xr = t.re(x), &xi = t.im(x);
  const auto& bias = t.re(b);
  Mat re = Mat::Zero(xr.rows(), xr.cols()), im = Mat::Zero(xr.rows(), xr.cols());
  for (Eigen::Index i = 0; i < xr.rows(); ++i)
    for (Eigen::Index c = 0; c < xr.cols(); ++c) {
      const Real s = std::hypot(xr(i, c), xi(i, c));
      if (!(s > Real(0))) continue;  // undefined phase: output 0
      const Real a = s + bias(0, c);
      if (a <= Real(0)) continue;
      re(i, c) = a * xr(i, c) / s;
      im(i, c) = a * xi(i, c) / s;
    }
  return t.push(std::move(re), std::move(im), true, [x, b](Tape<Real>& t, int self) {
    const auto &xr = t.re(x), &xi = t.im(x);
    const auto& bias = t.re(b);
    const auto &gr = t.grad_re(self), &gi = t.grad_im(self);
    auto& gxr = t.grad_re(x);
    auto& gxi = t.grad_im(x);
    auto& gb = t.grad_re(b);
    for (Eigen::Index i = 0; i < xr.rows(); ++i)
      for (Eigen::Index c = 0; c < xr.cols(); ++c) {
        const Real s = std::hypot(xr(i, c), xi(i, c));
        if (!(s > Real(0)) || s + bias(0, c) <= Real(0)) continue;
        const Real ur = xr(i, c) / s, ui = xi(i, c) / s;
        const Real along = gr(i, c) * ur + gi(i, c) * ui;  // Re(conj(g) u)
        const Real k = bias(0, c) / s;
        gxr(i, c) += gr(i, c) + k * (gr(i, c) - along * ur);
        gxi(i, c) += gi(i, c) + k * (gi(i, c) - along * ui);
        gb(0, c) += along;
      }
  });
}

template <typename Real>
Var concat_cols(Tape<Real>& t, Var a, Var b) {
  if (t.rows(a) != t.rows(b) || t.is_complex(a) != t.is_complex(b)) throw ShapeError("concat_cols: shapes differ");
  using Mat = typename Tape<Real>::Mat;
  const bool c = t.is_complex(a);
  const Eigen::Index ca = t.cols(a), cb = t.cols(b);
  Mat re(t.rows(a), ca + cb), im;
  re << t.re(a), t.re(b);
  if (c) {
    im.resize(t.rows(a), ca + cb);
    im << t.im(a), t.im(b);
  }
  return t.push(std::move(re), std::move(im), c, [a, b, c, ca, cb](Tape<Real>& t, int self) {
    t.grad_re(a) += t.grad_re(self).leftCols(ca);
    t.grad_re(b) += t.grad_re(self).rightCols(cb);
    if (c) {
      t.grad_im(a) += t.grad_im(self).leftCols(ca);
      t.grad_im(b) += t.grad_im(self).rightCols(cb);
    }
  });
}

template <typename Real>
Var modulus(Tape<Real>& t, Var x) {
  require_complex(t, x, "modulus");
  using Mat = typename Tape<Real>::Mat;
  Mat m(t.rows(x), t.cols(x));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(i, c) = std::hypot(t.re(x)(i, c), t.im(x)(i, c));
  return t.push(std::move(m), Mat(), false, [x](Tape<Real>& t, int self) {
    const auto& s = t.re(Var{self});
    const auto& g = t.grad_re(self);
    for (Eigen::Index i = 0; i < s.rows(); ++i)
      for (Eigen::Index c = 0; c < s.cols(); ++c) {
        if (!(s(i, c) > Real(0))) continue;
        t.grad_re(x)(i, c) += g(i, c) * t.re(x)(i, c) / s(i, c);
        t.grad_im(x)(i, c) += g(i, c) * t.im(x)(i, c) / s(i, c);
      }
  });
}

template <typename Real>
Var mean_rows(Tape<Real>& t, Var x) {
  using Mat = typename Tape<Real>::Mat;
  const bool c = t.is_complex(x);
  const Real inv = Real(1) / static_cast<Real>(t.rows(x));
  Mat re = t.re(x).colwise().sum() * inv, im;
  if (c) im = t.im(x).colwise().sum() * inv;
  return t.push(std::move(re), std::move(im), c, [x, c, inv](Tape<Real>& t, int self) {
    t.grad_re(x).rowwise() += inv * t.grad_re(self).row(0);
    if (c) t.grad_im(x).rowwise() += inv * t.grad_im(self).row(0);
  });
}

template <typename Real>
Var nll_loss(Tape<Real>& t, Var logits, std::span<const int> labels) {
  if (t.is_complex(logits)) throw ShapeError("nll_loss needs real logits");
  const Eigen::Index N = t.rows(logits), K = t.cols(logits);
  if (static_cast<Eigen::Index>(labels.size()) != N) throw ShapeError("nll_loss: one label per row required");
  using Mat = typename Tape<Real>::Mat;
  Mat p(N, K);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < N; ++i) {
    const int y = labels[i];
    if (y < 0 || y >= K) throw ShapeError("nll_loss: label " + std::to_string(y) + " out of range");
    const auto row = t.re(logits).row(i);
    const Real mx = row.maxCoeff();
    double z = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) z += std::exp(static_cast<double>(row(k) - mx));
    for (Eigen::Index k = 0; k < K; ++k) p(i, k) = static_cast<Real>(std::exp(static_cast<double>(row(k) - mx)) / z);
    loss += std::log(z) - static_cast<double>(row(y) - mx);
  }
  Mat out(1, 1);
  out(0, 0) = static_cast<Real>(loss / static_cast<double>(N));
  std::vector<int> y(labels.begin(), labels.end());
  return t.push(std::move(out), Mat(), false, [logits, p, y](Tape<Real>& t, int self) {
    const Real g = t.grad_re(self)(0, 0) / static_cast<Real>(p.rows());
    Mat d = p;
    for (Eigen::Index i = 0; i < d.rows(); ++i) d(i, y[i]) -= Real(1);
    t.grad_re(logits) += g * d;
  });
}

template <typename Real>
Var inner(Tape<Real>& t, Var x, const Plane<Real>& wre, const Plane<Real>& wim) {
  using Mat = typename Tape<Real>::Mat;
  const bool c = t.is_complex(x);
  if (wre.rows() != t.rows(x) || wre.cols() != t.cols(x)) throw ShapeError("inner: weight shape differs");
  Mat out(1, 1);
  out(0, 0) = wre.cwiseProduct(t.re(x)).sum() + (c ? wim.cwiseProduct(t.im(x)).sum() : Real(0));
  return t.push(std::move(out), Mat(), false, [x, c, wre, wim](Tape<Real>& t, int self) {
    const Real g = t.grad_re(self)(0, 0);
    t.grad_re(x) += g * wre;
    if (c) t.grad_im(x) += g * wim;
  });
}

// ---- Adam ------------------------------------------------------------------

void Adam::step(ParameterSet& params) {
  for (size_t k = 0; k < params.size(); ++k)
    if (!params[k].grad.allFinite())
      throw NumericalError("non-finite gradient in parameter '" + params[k].name + "'; step aborted");
  if (m_.size() != params.size()) {
    m_.clear();
    v_.clear();
    for (size_t k = 0; k < params.size(); ++k) {
      m_.push_back(ParamMatrix::Zero(params[k].value.rows(), params[k].value.cols()));
      v_.push_back(ParamMatrix::Zero(params[k].value.rows(), params[k].value.cols()));
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  for (size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    m_[k] = opt_.beta1 * m_[k] + (1.0 - opt_.beta1) * p.grad;
    v_[k] = opt_.beta2 * v_[k] + (1.0 - opt_.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= opt_.lr * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + opt_.eps);
  }
}

// ---- instantiations --------------------------------------------------------

#define HSN_INSTANTIATE(R)                                                              \
  template class Tape<R>;                                                               \
  template Var add<R>(Tape<R>&, Var, Var);                                              \
  template Var scale<R>(Tape<R>&, Var, double);                                         \
  template Var pointwise_mul<R>(Tape<R>&, Var, const Plane<R>&, const Plane<R>&);       \
  template Var real_matmul<R>(Tape<R>&, Var, Var);                                      \
  template Var add_bias<R>(Tape<R>&, Var, Var);                                         \
  template Var complex_matmul<R>(Tape<R>&, Var, Var);                                   \
  template Var harmonic_kernel<R>(Tape<R>&, Var, Var);                                  \
  template Var graph_apply<R>(Tape<R>&, Var, const GraphOperator&);                     \
  template Var complex_relu<R>(Tape<R>&, Var, Var);                                     \
  template Var concat_cols<R>(Tape<R>&, Var, Var);                                      \
  template Var modulus<R>(Tape<R>&, Var);                                               \
  template Var mean_rows<R>(Tape<R>&, Var);                                             \
  template Var nll_loss<R>(Tape<R>&, Var, std::span<const int>);                        \
  template Var inner<R>(Tape<R>&, Var, const Plane<R>&, const Plane<R>&);

HSN_INSTANTIATE(float)
HSN_INSTANTIATE(double)

#undef HSN_INSTANTIATE

}  // namespace hsn::ad
