#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tpc/common.hpp"
#include "tpc/matrix.hpp"

namespace tpc::neural {

enum class KernelInit { GlorotUniform, HeUniform, ScaledUniform };
enum class RecurrentInit { GlorotUniform, ScaledIdentity };
enum class OptimizerKind { Adam, Sgd };

struct KernelInitSpec {
  KernelInit kind = KernelInit::GlorotUniform;
  double limit = 0.05;  // only for ScaledUniform

  friend bool operator==(const KernelInitSpec& a, const KernelInitSpec& b) {
    return a.kind == b.kind && (a.kind != KernelInit::ScaledUniform || a.limit == b.limit);
  }
};

struct RecurrentInitSpec {
  RecurrentInit kind = RecurrentInit::GlorotUniform;
  double gain = 1.0;  // only for ScaledIdentity

  friend bool operator==(const RecurrentInitSpec& a, const RecurrentInitSpec& b) {
    return a.kind == b.kind && (a.kind != RecurrentInit::ScaledIdentity || a.gain == b.gain);
  }
};

struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  friend bool operator==(const OptimizerSpec&, const OptimizerSpec&) = default;
};

/// The tunable settings of the classifier. The output activation is always
/// softmax and is therefore not a field.
struct HyperParams {
  int output_size = 16;  // hidden units per layer
  KernelInitSpec kernel_init;
  RecurrentInitSpec recurrent_init;
  double dropout_rate = 0.0;
  OptimizerSpec optimizer;
  int batch_size = 16;
  int num_layers = 1;
  int epochs = 10;
  std::uint64_t seed = 0;

  void validate() const;

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

/// One LSTM layer. Gate order in the stacked dimension is [input, forget,
/// cell candidate, output]; this order is part of the serialization format.
struct LstmLayerParams {
  Matrix w;               // (4H) x F_in
  Matrix u;               // (4H) x H
  std::vector<double> b;  // 4H

  int hidden() const { return u.cols; }
  int input_width() const { return w.cols; }

  friend bool operator==(const LstmLayerParams&, const LstmLayerParams&) = default;
};

struct ModelParams {
  std::vector<LstmLayerParams> layers;
  Matrix head_w;               // C x H
  std::vector<double> head_b;  // C
  int num_classes = 0;

  int hidden() const { return layers.empty() ? 0 : layers.front().hidden(); }
  int input_width() const { return layers.empty() ? 0 : layers.front().input_width(); }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// First/second moment accumulators mirroring ModelParams, plus step count.
struct OptimizerState {
  ModelParams m;
  ModelParams v;
  std::int64_t t = 0;
};

struct StepCache {
  std::vector<double> i, f, g, o, c, tanh_c, h;
};

struct SampleCache {
  std::vector<std::vector<std::vector<double>>> inputs;  // [layer][t] -> input vector
  std::vector<std::vector<StepCache>> steps;             // [layer][t]
  std::vector<std::vector<std::vector<double>>> dropout_masks;  // [layer][t], layers 0..n-2
  std::vector<double> logits;
  std::vector<double> probs;
};

struct ForwardResult {
  std::vector<SampleCache> samples;
  bool train_mode = false;
  int window_length = 0;
  int input_width = 0;
  int hidden = 0;
  int num_layers = 0;
  int num_classes = 0;
};

ModelParams init_params(const HyperParams& hp, int input_width, int num_classes);

OptimizerState init_optimizer_state(const ModelParams& model);

/// One recurrent step: i,f,o = logistic, g = tanh, c = f*c_prev + i*g,
/// h = o * tanh(c). Returns the full gate cache for backprop.
StepCache lstm_step(const LstmLayerParams& layer, const std::vector<double>& x,
                    const std::vector<double>& h_prev, const std::vector<double>& c_prev);

/// Runs the stack over a batch of L x F windows. Dropout applies to the
/// hidden states passed between layers, only in train mode, scaled by
/// 1/(1-rate) (inverted dropout). The head reads the top layer's final h.
ForwardResult forward(const ModelParams& model, const std::vector<Matrix>& batch,
                      bool train_mode, double dropout_rate, Rng* dropout_rng);

std::vector<double> softmax(const std::vector<double>& logits);

/// -ln(probs[label] + 1e-12)
double cross_entropy(const std::vector<double>& probs, int label);

/// Mean cross-entropy over the batch.
double batch_loss(const ForwardResult& fwd, const std::vector<int>& labels);

/// Full-unroll backpropagation through time; returns mean-loss gradients with
/// shapes mirroring the parameters.
ModelParams backward(const ModelParams& model, const ForwardResult& fwd,
                     const std::vector<int>& labels);

/// Adam (bias-corrected) or plain SGD, depending on spec.kind.
void optimizer_step(ModelParams& params, const ModelParams& grads, OptimizerState& state,
                    const OptimizerSpec& spec);

using ProgressSink = std::function<void(int epoch, double mean_loss)>;

/// Seeded epochs of shuffled mini-batches; the last partial batch is kept.
/// Returns the per-epoch mean training loss.
std::vector<double> train(ModelParams& model, const std::vector<Matrix>& windows,
                          const std::vector<int>& labels, const HyperParams& hp,
                          const ProgressSink& progress = nullptr);

struct Prediction {
  int label = 0;
  std::vector<double> probs;
};

/// Pure function of (model, window); never applies dropout, ties resolve to
/// the lowest class index.
Prediction predict(const ModelParams& model, const Matrix& window);

// Model file: magic `TPCM`, little-endian u16 version, then one JSON document
// with hyperparameters, shapes and full-precision weights.
std::string save_model(const ModelParams& model, const HyperParams& hp);
std::pair<ModelParams, HyperParams> load_model(const std::string& bytes);

}  // namespace tpc::neural
