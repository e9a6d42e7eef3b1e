#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "distillab/losses.hpp"
#include "distillab/matrix.hpp"

namespace distillab {

enum class Activation { kNone, kRelu, kTanh, kBinarySign };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct LayerSpec {
  int in_dim = 0;
  int out_dim = 0;
  Activation activation = Activation::kNone;
  // When set the layer's stored weights are latent reals; the forward pass
  // uses their channel-wise binarization (see binarize.hpp).
  bool binary_weights = false;
  double ste_clip = 1.0;
};

struct NetworkSpec {
  int input_dim = 0;
  int num_classes = 0;
  std::vector<LayerSpec> layers;

  // Dims must chain, the final layer must emit num_classes raw logits
  // (activation none), and binary-sign layers need a positive STE clip.
  void validate() const;
  // True when a penultimate activation exists (>= 1 hidden layer).
  bool has_hidden_layer() const { return layers.size() >= 2; }

  static NetworkSpec mlp(int input_dim, std::span<const int> hidden_widths,
                         int num_classes,
                         Activation hidden_activation = Activation::kRelu);
};

struct Model {
  NetworkSpec spec;
  std::vector<Matrix> weights;  // weights[l]: out_dim x in_dim
  std::vector<Vec> biases;      // biases[l]: out_dim
  uint64_t seed = 0;
  // Bumped on every parameter update; forward records are only valid for the
  // revision they were produced against.
  uint64_t revision = 0;

  size_t parameter_count() const;
  uint64_t parameter_hash() const;
  bool parameters_finite() const;
};

// Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases,
// bit-reproducible for a given (spec, seed).
Model init_model(const NetworkSpec& spec, uint64_t seed);

struct ForwardRecord {
  Matrix input;              // n x input_dim
  std::vector<Matrix> pre;   // pre[l]: n x out_dim(l), before activation
  std::vector<Matrix> post;  // post[l]: after activation
  uint64_t model_revision = 0;

  int batch_size() const { return input.rows; }
  const Matrix& logits() const { return post.back(); }
  // Last hidden activation; for a linear model this is the input itself.
  const Matrix& penultimate() const {
    return post.size() >= 2 ? post[post.size() - 2] : input;
  }
};

ForwardRecord forward(const Model& model, const Matrix& batch);

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vec> biases;

  bool all_finite() const;
};

// upstream row i holds d(loss_i)/d(logits_i) for example i; the result holds
// the exact gradients of the batch-mean loss (1/n) sum_i loss_i. Throws
// cache-error when the record does not match the model's current revision.
Gradients backward(const Model& model, const ForwardRecord& record,
                   const Matrix& upstream);

struct TrainConfig {
  int epochs = 40;
  int batch_size = 32;
  double learning_rate = 0.1;
  std::vector<int> decay_epochs;  // lr multiplied by decay_factor at each
  double decay_factor = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0;
  uint64_t seed = 0;

  void validate() const;
};

double learning_rate_at(const TrainConfig& cfg, int epoch);

struct SgdState {
  std::vector<Matrix> w_velocity;
  std::vector<Vec> b_velocity;

  static SgdState zeros_like(const Model& model);
};

// v <- momentum * v + (grad + weight_decay * w); w <- w - lr(epoch) * v.
// Latent weights of binary layers are clipped to [-1.5, 1.5] afterwards.
// Non-finite gradients abort the run with divergence-error.
void sgd_step(Model& model, const Gradients& grads, SgdState& state,
              const TrainConfig& cfg, int epoch);

// Per-example loss on logits; `example` indexes the dataset so targets can
// differ per example.
class LogitLoss {
 public:
  virtual ~LogitLoss() = default;
  virtual double value(std::span<const double> logits, int example) const = 0;
  virtual Vec grad(std::span<const double> logits, int example) const = 0;
};

// Cross-entropy against fixed per-example target distributions (hard,
// smoothed, or teacher probabilities) at a fixed temperature.
class TargetCrossEntropyLoss final : public LogitLoss {
 public:
  TargetCrossEntropyLoss(Matrix targets, double temperature = 1.0,
                         bool rescale_grad_by_t2 = false);

  double value(std::span<const double> logits, int example) const override;
  Vec grad(std::span<const double> logits, int example) const override;

 private:
  Matrix targets_;
  double temperature_;
  bool rescale_;
};

// Mixed hard/soft objective against a frozen teacher's per-example logits.
class DistillLogitLoss final : public LogitLoss {
 public:
  DistillLogitLoss(Matrix teacher_logits, std::vector<int> hard_labels,
                   int num_classes, DistillConfig cfg);

  double value(std::span<const double> logits, int example) const override;
  Vec grad(std::span<const double> logits, int example) const override;

 private:
  Matrix soft_targets_;  // softmax(teacher logits, T), precomputed
  Matrix hard_targets_;
  DistillConfig cfg_;
};

// Central-difference check of backward() on the batch-mean loss over a random
// subset of parameters (>= min(probes, #params)). Returns the maximum
// relative error observed.
double grad_check(const Model& model, const LogitLoss& loss,
                  const Matrix& batch, double eps = 1e-5, int probes = 50,
                  uint64_t seed = 0);

// Checkpoint file: text header (spec, seed, epoch, parameter count) followed
// by the raw little-endian 64-bit float parameter block, layer-major,
// weights-then-bias, weight rows contiguous (row = output unit).
void save_checkpoint(const Model& model, int epoch,
                     const std::filesystem::path& path);

struct Checkpoint {
  Model model;
  int epoch = 0;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace distillab
