#pragma once

#include <cstdint>
#include <vector>

#include "posesynth/features.hpp"
#include "posesynth/io.hpp"

namespace posesynth {

// Row-major dense matrix.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(std::size_t(r) * c, 0.0) {}
  double& operator()(int r, int c) { return data[std::size_t(r) * cols + c]; }
  double operator()(int r, int c) const { return data[std::size_t(r) * cols + c]; }
};

Matrix to_matrix(const std::vector<FeatureVector>& features);

struct Dense {
  int in = 0;
  int out = 0;
  std::vector<double> w;  // out x in
  std::vector<double> b;
};

struct BatchNorm {
  int size = 0;
  std::vector<double> gamma, beta;
  std::vector<double> running_mean, running_var;
};

inline constexpr int kHidden1 = 128;
inline constexpr int kHidden2 = 64;
inline constexpr long kParamCount = 11722;
inline constexpr double kBnEpsilon = 1e-5;

// affine -> BN -> ReLU -> dropout, twice, then a final affine layer.
struct MlpModel {
  Dense l1, l2, l3;
  BatchNorm bn1, bn2;
  double dropout = 0.3;
  double bn_momentum = 0.9;  // running = momentum * running + (1 - momentum) * batch

  long param_count() const;
  void validate() const;  // shapes, 11,722 parameters, finite values, running var > 0
};

// Trainable tensors in a fixed order: l1.w, l1.b, bn1.gamma, bn1.beta, l2.w, ...
std::vector<std::vector<double>*> parameter_tensors(MlpModel& m);
std::vector<const std::vector<double>*> parameter_tensors(const MlpModel& m);
std::vector<const char*> parameter_names();

// He-uniform weights, zero biases, gamma 1, beta 0, running stats (0, 1).
MlpModel init_model(std::uint64_t seed);

enum class Mode { kEval, kTrain };

// Train mode uses batch statistics (batch >= 2) and an inverted dropout mask
// drawn from `dropout_seed`.
Matrix forward(const MlpModel& m, const Matrix& x, Mode mode, std::uint64_t dropout_seed = 0);

std::vector<double> softmax(const std::vector<double>& logits);
double cross_entropy(const Matrix& logits, const std::vector<int>& labels);

struct LossAndGradient {
  double loss = 0.0;
  MlpModel grad;  // same shapes as the model; running statistics unused
  std::vector<double> batch_mean1, batch_var1, batch_mean2, batch_var2;  // train mode only
};

LossAndGradient loss_and_gradient(const MlpModel& m, const Matrix& x, const std::vector<int>& labels, Mode mode,
                                  std::uint64_t dropout_seed = 0);

struct TrainConfig {
  int epochs = 100;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 64;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;  // mean over mini-batches, train mode
  double train_accuracy = 0.0;  // eval mode over the whole split
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainHistory {
  double initial_loss = 0.0;  // eval mode over the training split before any update
  std::vector<EpochMetrics> epochs;
};

// Mini-batches reshuffled every epoch from the seed; a trailing batch of one
// sample is skipped. Throws ModelError on a non-finite loss.
TrainHistory train(MlpModel& m, const Matrix& x, const std::vector<int>& y, const Matrix& val_x,
                   const std::vector<int>& val_y, const TrainConfig& cfg);

struct Prediction {
  int category = 0;
  double confidence = 0.0;
};

// Argmax with ties going to the lowest id.
Prediction predict_from_logits(const std::vector<double>& logits);
Prediction predict(const MlpModel& m, const FeatureVector& f);
double accuracy(const MlpModel& m, const Matrix& x, const std::vector<int>& y);

ojson model_to_json(const MlpModel& m);
MlpModel model_from_json(const ojson& j);

// ---- INT8 ----

struct QuantizedTensor {
  std::vector<std::int8_t> q;
  double scale = 1.0;  // symmetric, zero point 0
};

// Values must satisfy |v| <= max_abs; max_abs 0 gives scale 1.
QuantizedTensor quantize_symmetric(const std::vector<double>& values, double max_abs);
std::vector<double> dequantize(const QuantizedTensor& t);

struct ActivationQuant {
  double scale = 1.0;
  int zero_point = 0;  // int8 domain [-128, 127]
};

// Range widened to include 0.
ActivationQuant calibrate_activation(double min, double max);

struct FixedPointMultiplier {
  std::int32_t m0 = 0;  // Q31 mantissa in [2^30, 2^31)
  int shift = 0;        // value = m0 * 2^(shift - 31)
};

FixedPointMultiplier make_multiplier(double real);
std::int32_t apply_multiplier(std::int64_t acc, const FixedPointMultiplier& m);

struct QuantizedLayer {
  int in = 0, out = 0;
  QuantizedTensor w;
  std::vector<std::int32_t> bias;  // scale w.scale * input.scale
  ActivationQuant input;
  ActivationQuant output;          // hidden layers only
  FixedPointMultiplier requant;    // hidden layers only
};

struct QuantizedModel {
  std::vector<QuantizedLayer> layers;  // 3
};

// Folds eval-mode BN into the preceding affine layer.
struct FoldedModel {
  Dense l1, l2, l3;
};
FoldedModel fold_batch_norm(const MlpModel& m);
std::vector<double> forward_folded(const FoldedModel& f, const FeatureVector& x);

// Min/max activation observers over `calibration`; throws ModelError if empty.
QuantizedModel quantize_int8(const MlpModel& m, const std::vector<FeatureVector>& calibration);

// Integer pipeline; only the final accumulator is converted back to real logits.
std::vector<double> forward_quantized(const QuantizedModel& q, const FeatureVector& x);
Prediction predict(const QuantizedModel& q, const FeatureVector& f);

ojson quantized_to_json(const QuantizedModel& q);
QuantizedModel quantized_from_json(const ojson& j);

}  // namespace posesynth
