#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "hsn/datasets.hpp"
#include "hsn/model.hpp"

namespace hsn {

enum class Precision { F32, F64 };

/// One mesh (or one signal on a shared mesh) with per-vertex labels
/// (segmentation) or a single class label.
struct Sample {
  ad::ParamMatrix input;   // level-0 nodes x in_channels
  std::vector<int> labels;
  size_t graph = 0;        // index into the operator list
};

/// One single-channel sample per signal, all on graph 0.
std::vector<Sample> digit_samples(const DigitSignals& digits);

/// Sphere-MNIST defaults: three scales on the 642-vertex sphere with
/// supports 0.3, 0.45, 0.8.
MultiScaleOptions sphere_mnist_geometry();
/// Conv widths 8,8,16,16,32,32 for streams {0, 1}; the {0} baseline doubles
/// them, which matches the parameter count exactly.
ModelConfig sphere_mnist_model(const std::vector<int>& streams, int rings);

/// Root mean square over every input entry; 1 when there is nothing to measure.
double input_rms(std::span<const Sample> samples);
void scale_inputs(std::span<Sample> samples, double factor);

/// Replaces each digit sample's input with its source image under a fresh
/// random rotation, times `scale`. `ids[k]` is the image behind `samples[k]`.
void rerotate_digits(std::span<Sample> samples, std::span<const size_t> ids, const ImageSet& images,
                     const TriangleMesh& sphere, double scale, std::mt19937_64& rng);

struct TrainOptions {
  int epochs = 20;
  double lr = 0.01;
  double lr_decay = 1.0;   // lr multiplier applied after every epoch
  double weight_decay = 0.0;  // decoupled, on radial profiles (rho) and linear weights only
  uint64_t seed = 0;
  int accumulate = 1;      // samples per Adam step
  Precision precision = Precision::F64;
  /// Called before each epoch's shuffle; may rewrite the inputs of the
  /// caller-owned training samples (fresh augmentation per epoch).
  std::function<void(int epoch)> before_epoch;
};

struct EvalStats {
  double loss = 0.0;
  double accuracy = 0.0;   // per sample (classification) or per vertex (segmentation)
  size_t count = 0;
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;       // mean training loss over the epoch
  double accuracy = 0.0;   // training accuracy over the epoch
  EvalStats validation;    // empty when no validation samples are given
  double seconds = 0.0;
};

/// Forward + loss for one sample, optionally accumulating parameter
/// gradients. Returns (loss, correct predictions, predictions made).
struct StepResult {
  double loss = 0.0;
  size_t correct = 0, total = 0;
};
StepResult run_sample(Network& net, const GraphOps& ops, const Sample& sample, Precision precision, bool backward);

EvalStats evaluate(Network& net, std::span<const GraphOps> ops, std::span<const Sample> samples, Precision precision);

/// Adam on the mean loss of `accumulate` samples per step, samples shuffled
/// per epoch from `seed`. A non-finite loss or gradient throws
/// NumericalError naming the epoch and sample.
std::vector<EpochStats> train(Network& net, std::span<const GraphOps> ops, std::span<const Sample> train_set,
                              std::span<const Sample> validation, const TrainOptions& options,
                              const std::function<void(const EpochStats&)>& on_epoch = {});

}  // namespace hsn
