#include "hsn/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "hsn/error.hpp"

namespace hsn {

namespace {

template <typename Real>
StepResult run_typed(Network& net, const GraphOps& ops, const Sample& s, bool backward) {
  ad::Tape<Real> t;
  const ad::Var logits = net.forward(t, ops, ad::Plane<Real>(s.input.cast<Real>()));
  if (static_cast<size_t>(t.rows(logits)) != s.labels.size())
    throw ShapeError("sample has " + std::to_string(s.labels.size()) + " labels for " +
                     std::to_string(t.rows(logits)) + " predictions");
  const ad::Var loss = ad::nll_loss(t, logits, s.labels);
  StepResult r;
  r.loss = static_cast<double>(t.scalar(loss));
  if (!std::isfinite(r.loss)) throw NumericalError("non-finite loss");
  const auto& L = t.re(logits);
  for (Eigen::Index i = 0; i < L.rows(); ++i) {
    Eigen::Index best;
    L.row(i).maxCoeff(&best);
    r.correct += best == s.labels[i];
  }
  r.total = s.labels.size();
  if (backward) t.backward(loss);
  return r;
}

}  // namespace

std::vector<Sample> digit_samples(const DigitSignals& digits) {
  std::vector<Sample> out(digits.labels.size());
  for (size_t k = 0; k < out.size(); ++k) {
    const auto& x = digits.signals[k];
    out[k].input = ad::ParamMatrix::Map(x.data(), static_cast<Eigen::Index>(x.size()), 1);
    out[k].labels = {digits.labels[k]};
  }
  return out;
}

MultiScaleOptions sphere_mnist_geometry() {
  MultiScaleOptions opt;
  opt.levels = 3;
  opt.ratios = {0.5, 0.25};
  opt.radius = 0.3;
  opt.radii = {0.3, 0.45, 0.8};
  return opt;
}

ModelConfig sphere_mnist_model(const std::vector<int>& streams, int rings) {
  const auto geometry = sphere_mnist_geometry();
  ModelConfig c;
  c.arch = "mnist";
  c.streams = streams;
  c.widths = {8, 8, 16, 16, 32, 32};
  if (streams.size() == 1)
    for (int& w : c.widths) w *= 2;
  c.in_channels = 1;
  c.n_classes = 10;
  c.rings = rings;
  c.levels = geometry.levels;
  c.epsilon = geometry.radius;
  c.ratios = geometry.ratios;
  c.radii = geometry.radii;
  c.validate();
  return c;
}

double input_rms(std::span<const Sample> samples) {
  double sum = 0.0;
  size_t count = 0;
  for (const auto& s : samples) {
    sum += s.input.squaredNorm();
    count += static_cast<size_t>(s.input.size());
  }
  return count && sum > 0.0 ? std::sqrt(sum / static_cast<double>(count)) : 1.0;
}

void scale_inputs(std::span<Sample> samples, double factor) {
  for (auto& s : samples) s.input *= factor;
}

void rerotate_digits(std::span<Sample> samples, std::span<const size_t> ids, const ImageSet& images,
                     const TriangleMesh& sphere, double scale, std::mt19937_64& rng) {
  if (ids.size() != samples.size()) throw ShapeError("one image id per sample required");
  for (size_t k = 0; k < samples.size(); ++k) {
    const auto x = sphere_mnist_digit(images, ids[k], sphere, draw_angle(rng));
    samples[k].input = scale * ad::ParamMatrix::Map(x.data(), static_cast<Eigen::Index>(x.size()), 1);
  }
}

StepResult run_sample(Network& net, const GraphOps& ops, const Sample& sample, Precision precision, bool backward) {
  return precision == Precision::F32 ? run_typed<float>(net, ops, sample, backward)
                                     : run_typed<double>(net, ops, sample, backward);
}

EvalStats evaluate(Network& net, std::span<const GraphOps> ops, std::span<const Sample> samples, Precision precision) {
  EvalStats e;
  size_t correct = 0, total = 0;
  for (const auto& s : samples) {
    const auto r = run_sample(net, ops[s.graph], s, precision, false);
    e.loss += r.loss;
    correct += r.correct;
    total += r.total;
  }
  e.count = samples.size();
  if (e.count) e.loss /= e.count;
  e.accuracy = total ? static_cast<double>(correct) / total : 0.0;
  return e;
}

std::vector<EpochStats> train(Network& net, std::span<const GraphOps> ops, std::span<const Sample> train_set,
                              std::span<const Sample> validation, const TrainOptions& opt,
                              const std::function<void(const EpochStats&)>& on_epoch) {
  if (opt.accumulate < 1) throw ShapeError("accumulate must be positive");
  for (const auto& s : train_set)
    if (s.graph >= ops.size()) throw ShapeError("sample refers to a missing graph");
  ad::Adam adam({.lr = opt.lr});
  std::mt19937_64 rng(opt.seed);
  std::vector<size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::vector<EpochStats> history;

  // phases (beta) are periodic and biases set thresholds; neither is shrunk
  std::vector<bool> decays(net.parameters().size());
  for (size_t k = 0; k < decays.size(); ++k) {
    const auto& name = net.parameters()[k].name;
    decays[k] = name.find(".rho.") != std::string::npos || name.ends_with(".W");
  }

  auto step = [&](size_t pending) {
    auto& ps = net.parameters();
    for (size_t k = 0; k < ps.size(); ++k) ps[k].grad /= static_cast<double>(pending);
    adam.step(ps);
    if (opt.weight_decay > 0.0)
      for (size_t k = 0; k < ps.size(); ++k)
        if (decays[k]) ps[k].value *= 1.0 - adam.options().lr * opt.weight_decay;
    ps.zero_grad();
  };

  for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    adam.set_lr(opt.lr * std::pow(opt.lr_decay, epoch - 1));
    if (opt.before_epoch) opt.before_epoch(epoch);
    // Fisher-Yates with explicit draws keeps the order independent of the standard library
    for (size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng() % k]);
    EpochStats stats;
    stats.epoch = epoch;
    size_t correct = 0, total = 0, pending = 0;
    net.parameters().zero_grad();
    for (size_t k = 0; k < order.size(); ++k) {
      const Sample& s = train_set[order[k]];
      StepResult r;
      try {
        r = run_sample(net, ops[s.graph], s, opt.precision, true);
        if (++pending == static_cast<size_t>(opt.accumulate)) {
          step(pending);
          pending = 0;
        }
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ", sample " +
                             std::to_string(order[k]) + ")");
      }
      stats.loss += r.loss;
      correct += r.correct;
      total += r.total;
    }
    if (pending) step(pending);
    stats.loss /= std::max<size_t>(order.size(), 1);
    stats.accuracy = total ? static_cast<double>(correct) / total : 0.0;
    if (!validation.empty()) stats.validation = evaluate(net, ops, validation, opt.precision);
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return history;
}

}  // namespace hsn
