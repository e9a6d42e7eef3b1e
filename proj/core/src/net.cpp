#include "distillab/net.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "distillab/binarize.hpp"
#include "distillab/hash.hpp"
#include "distillab/rng.hpp"

namespace distillab {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kNone: return "none";
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kBinarySign: return "binary-sign";
  }
  return "none";
}

Activation activation_from_name(const std::string& name) {
  if (name == "none") return Activation::kNone;
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "binary-sign") return Activation::kBinarySign;
  throw DomainError(ErrorKind::kSpecError, "unknown activation '" + name + "'");
}

void NetworkSpec::validate() const {
  if (input_dim < 1) {
    throw DomainError(ErrorKind::kSpecError, "input_dim must be >= 1");
  }
  if (num_classes < 2) {
    throw DomainError(ErrorKind::kSpecError, "num_classes must be >= 2");
  }
  if (layers.empty()) {
    throw DomainError(ErrorKind::kSpecError, "network needs at least one layer");
  }
  int expect = input_dim;
  for (size_t l = 0; l < layers.size(); ++l) {
    const LayerSpec& layer = layers[l];
    if (layer.in_dim != expect) {
      throw DomainError(ErrorKind::kSpecError,
                        "layer " + std::to_string(l) + " expects input dim " +
                            std::to_string(layer.in_dim) + " but gets " +
                            std::to_string(expect));
    }
    if (layer.out_dim < 1) {
      throw DomainError(ErrorKind::kSpecError,
                        "layer " + std::to_string(l) + " has empty output");
    }
    if (layer.activation == Activation::kBinarySign && !(layer.ste_clip > 0)) {
      throw DomainError(ErrorKind::kSpecError,
                        "binary-sign layer needs a positive STE clip");
    }
    expect = layer.out_dim;
  }
  if (expect != num_classes) {
    throw DomainError(ErrorKind::kSpecError,
                      "final layer emits " + std::to_string(expect) +
                          " outputs, expected " + std::to_string(num_classes) +
                          " logits");
  }
  if (layers.back().activation != Activation::kNone) {
    throw DomainError(ErrorKind::kSpecError,
                      "final layer must emit raw logits (activation none)");
  }
}

NetworkSpec NetworkSpec::mlp(int input_dim, std::span<const int> hidden_widths,
                             int num_classes, Activation hidden_activation) {
  NetworkSpec spec;
  spec.input_dim = input_dim;
  spec.num_classes = num_classes;
  int in = input_dim;
  for (int width : hidden_widths) {
    spec.layers.push_back({in, width, hidden_activation, false, 1.0});
    in = width;
  }
  spec.layers.push_back({in, num_classes, Activation::kNone, false, 1.0});
  spec.validate();
  return spec;
}

size_t Model::parameter_count() const {
  size_t n = 0;
  for (size_t l = 0; l < weights.size(); ++l) {
    n += weights[l].data.size() + biases[l].size();
  }
  return n;
}

uint64_t Model::parameter_hash() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (size_t l = 0; l < weights.size(); ++l) {
    h = fnv1a({reinterpret_cast<const unsigned char*>(weights[l].data.data()),
               weights[l].data.size() * sizeof(double)},
              h);
    h = fnv1a({reinterpret_cast<const unsigned char*>(biases[l].data()),
               biases[l].size() * sizeof(double)},
              h);
  }
  return h;
}

bool Model::parameters_finite() const {
  for (size_t l = 0; l < weights.size(); ++l) {
    for (double w : weights[l].data) {
      if (!std::isfinite(w)) return false;
    }
    for (double b : biases[l]) {
      if (!std::isfinite(b)) return false;
    }
  }
  return true;
}

Model init_model(const NetworkSpec& spec, uint64_t seed) {
  spec.validate();
  Model model;
  model.spec = spec;
  model.seed = seed;
  Rng rng(seed);
  for (const LayerSpec& layer : spec.layers) {
    Matrix w(layer.out_dim, layer.in_dim);
    const double bound = std::sqrt(6.0 / (layer.in_dim + layer.out_dim));
    for (double& v : w.data) v = rng.uniform(-bound, bound);
    model.weights.push_back(std::move(w));
    model.biases.emplace_back(static_cast<size_t>(layer.out_dim), 0.0);
  }
  return model;
}

namespace {

void apply_activation(Activation act, std::span<const double> pre,
                      std::span<double> post) {
  switch (act) {
    case Activation::kNone:
      std::copy(pre.begin(), pre.end(), post.begin());
      break;
    case Activation::kRelu:
      for (size_t i = 0; i < pre.size(); ++i) {
        post[i] = pre[i] > 0.0 ? pre[i] : 0.0;
      }
      break;
    case Activation::kTanh:
      for (size_t i = 0; i < pre.size(); ++i) post[i] = std::tanh(pre[i]);
      break;
    case Activation::kBinarySign:
      for (size_t i = 0; i < pre.size(); ++i) post[i] = sign_value(pre[i]);
      break;
  }
}

// d(post)/d(pre) applied in place to the upstream gradient
void activation_backward(const LayerSpec& layer, std::span<const double> pre,
                         std::span<const double> post,
                         std::span<double> grad) {
  switch (layer.activation) {
    case Activation::kNone:
      break;
    case Activation::kRelu:
      for (size_t i = 0; i < grad.size(); ++i) {
        if (pre[i] <= 0.0) grad[i] = 0.0;
      }
      break;
    case Activation::kTanh:
      for (size_t i = 0; i < grad.size(); ++i) {
        grad[i] *= 1.0 - post[i] * post[i];
      }
      break;
    case Activation::kBinarySign:
      for (size_t i = 0; i < grad.size(); ++i) {
        if (std::abs(pre[i]) > layer.ste_clip) grad[i] = 0.0;
      }
      break;
  }
}

}  // namespace

ForwardRecord forward(const Model& model, const Matrix& batch) {
  if (batch.cols != model.spec.input_dim) {
    throw DomainError(ErrorKind::kShapeError,
                      "batch feature dim " + std::to_string(batch.cols) +
                          " does not match input_dim " +
                          std::to_string(model.spec.input_dim));
  }
  ForwardRecord record;
  record.input = batch;
  record.model_revision = model.revision;
  const int n = batch.rows;
  const Matrix* x = &record.input;
  for (size_t l = 0; l < model.spec.layers.size(); ++l) {
    const LayerSpec& layer = model.spec.layers[l];
    const Matrix effective = layer.binary_weights
                                 ? binarize_weights(model.weights[l])
                                 : model.weights[l];
    Matrix pre(n, layer.out_dim);
    for (int i = 0; i < n; ++i) {
      std::span<const double> in_row = x->row(i);
      std::span<double> out_row = pre.row(i);
      for (int o = 0; o < layer.out_dim; ++o) {
        out_row[o] = model.biases[l][static_cast<size_t>(o)] +
                     dot(effective.row(o), in_row);
      }
    }
    Matrix post(n, layer.out_dim);
    for (int i = 0; i < n; ++i) {
      apply_activation(layer.activation, pre.row(i), post.row(i));
    }
    record.pre.push_back(std::move(pre));
    record.post.push_back(std::move(post));
    x = &record.post.back();
  }
  return record;
}

bool Gradients::all_finite() const {
  for (const Matrix& w : weights) {
    for (double v : w.data) {
      if (!std::isfinite(v)) return false;
    }
  }
  for (const Vec& b : biases) {
    for (double v : b) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

Gradients backward(const Model& model, const ForwardRecord& record,
                   const Matrix& upstream) {
  if (record.model_revision != model.revision) {
    throw DomainError(ErrorKind::kCacheError,
                      "forward record is stale (model revision " +
                          std::to_string(model.revision) + ", record " +
                          std::to_string(record.model_revision) + ")");
  }
  const size_t num_layers = model.spec.layers.size();
  if (record.pre.size() != num_layers) {
    throw DomainError(ErrorKind::kCacheError,
                      "forward record does not match the model layout");
  }
  const int n = record.batch_size();
  if (upstream.rows != n ||
      upstream.cols != model.spec.layers.back().out_dim) {
    throw DomainError(ErrorKind::kShapeError,
                      "upstream gradient shape does not match the logits");
  }

  Gradients grads;
  grads.weights.reserve(num_layers);
  grads.biases.reserve(num_layers);
  for (const LayerSpec& layer : model.spec.layers) {
    grads.weights.emplace_back(layer.out_dim, layer.in_dim);
    grads.biases.emplace_back(static_cast<size_t>(layer.out_dim), 0.0);
  }

  Matrix delta = upstream;  // d(mean loss)/d(post) of the current layer
  for (size_t l = num_layers; l-- > 0;) {
    const LayerSpec& layer = model.spec.layers[l];
    const Matrix& input =
        l == 0 ? record.input : record.post[l - 1];
    for (int i = 0; i < n; ++i) {
      activation_backward(layer, record.pre[l].row(i), record.post[l].row(i),
                          delta.row(i));
    }
    // accumulate dW = delta^T * input and db = column sums of delta
    for (int i = 0; i < n; ++i) {
      std::span<const double> d = delta.row(i);
      std::span<const double> x = input.row(i);
      for (int o = 0; o < layer.out_dim; ++o) {
        const double g = d[static_cast<size_t>(o)];
        if (g == 0.0) continue;
        std::span<double> wrow = grads.weights[l].row(o);
        for (int c = 0; c < layer.in_dim; ++c) wrow[c] += g * x[c];
        grads.biases[l][static_cast<size_t>(o)] += g;
      }
    }
    if (l > 0) {
      // dX = delta * W_eff (straight-through for binary weights)
      const Matrix effective = layer.binary_weights
                                   ? binarize_weights(model.weights[l])
                                   : model.weights[l];
      Matrix next(n, layer.in_dim);
      for (int i = 0; i < n; ++i) {
        std::span<const double> d = delta.row(i);
        std::span<double> out = next.row(i);
        for (int o = 0; o < layer.out_dim; ++o) {
          const double g = d[static_cast<size_t>(o)];
          if (g == 0.0) continue;
          std::span<const double> wrow = effective.row(o);
          for (int c = 0; c < layer.in_dim; ++c) out[c] += g * wrow[c];
        }
      }
      delta = std::move(next);
    }
  }

  const double inv_n = 1.0 / n;
  for (size_t l = 0; l < num_layers; ++l) {
    for (double& v : grads.weights[l].data) v *= inv_n;
    for (double& v : grads.biases[l]) v *= inv_n;
  }
  return grads;
}

void TrainConfig::validate() const {
  if (epochs < 1) {
    throw DomainError(ErrorKind::kSpecError, "epochs must be positive");
  }
  if (batch_size < 1) {
    throw DomainError(ErrorKind::kSpecError, "batch_size must be positive");
  }
  if (!(learning_rate >= 0.0)) {
    throw DomainError(ErrorKind::kSpecError, "learning rate must be >= 0");
  }
  if (!(decay_factor > 0.0)) {
    throw DomainError(ErrorKind::kSpecError, "decay factor must be positive");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw DomainError(ErrorKind::kSpecError, "momentum must lie in [0,1)");
  }
  if (weight_decay < 0.0) {
    throw DomainError(ErrorKind::kSpecError, "weight decay must be >= 0");
  }
}

double learning_rate_at(const TrainConfig& cfg, int epoch) {
  double lr = cfg.learning_rate;
  for (int d : cfg.decay_epochs) {
    if (epoch >= d) lr *= cfg.decay_factor;
  }
  return lr;
}

SgdState SgdState::zeros_like(const Model& model) {
  SgdState state;
  for (size_t l = 0; l < model.weights.size(); ++l) {
    state.w_velocity.emplace_back(model.weights[l].rows,
                                  model.weights[l].cols);
    state.b_velocity.emplace_back(model.biases[l].size(), 0.0);
  }
  return state;
}

void sgd_step(Model& model, const Gradients& grads, SgdState& state,
              const TrainConfig& cfg, int epoch) {
  cfg.validate();
  if (grads.weights.size() != model.weights.size()) {
    throw DomainError(ErrorKind::kShapeError,
                      "gradient layout does not match the model");
  }
  if (!grads.all_finite()) {
    throw DomainError(ErrorKind::kDivergenceError,
                      "non-finite gradient at epoch " + std::to_string(epoch));
  }
  const double lr = learning_rate_at(cfg, epoch);
  for (size_t l = 0; l < model.weights.size(); ++l) {
    if (!model.weights[l].same_shape(grads.weights[l]) ||
        model.biases[l].size() != grads.biases[l].size()) {
      throw DomainError(ErrorKind::kShapeError,
                        "gradient shape mismatch at layer " +
                            std::to_string(l));
    }
    const bool clip_latent = model.spec.layers[l].binary_weights;
    for (size_t i = 0; i < model.weights[l].data.size(); ++i) {
      double& w = model.weights[l].data[i];
      double& v = state.w_velocity[l].data[i];
      v = cfg.momentum * v + grads.weights[l].data[i] + cfg.weight_decay * w;
      w -= lr * v;
      if (clip_latent) {
        w = std::clamp(w, -kLatentWeightClip, kLatentWeightClip);
      }
    }
    for (size_t i = 0; i < model.biases[l].size(); ++i) {
      double& b = model.biases[l][i];
      double& v = state.b_velocity[l][i];
      v = cfg.momentum * v + grads.biases[l][i] + cfg.weight_decay * b;
      b -= lr * v;
    }
  }
  ++model.revision;
}

TargetCrossEntropyLoss::TargetCrossEntropyLoss(Matrix targets,
                                               double temperature,
                                               bool rescale_grad_by_t2)
    : targets_(std::move(targets)),
      temperature_(temperature),
      rescale_(rescale_grad_by_t2) {}

double TargetCrossEntropyLoss::value(std::span<const double> logits,
                                     int example) const {
  Vec p(logits.size());
  softmax_into(logits, temperature_, p);
  return cross_entropy(p, targets_.row(example));
}

Vec TargetCrossEntropyLoss::grad(std::span<const double> logits,
                                 int example) const {
  LogitVector z{Vec(logits.begin(), logits.end())};
  return ce_gradient_logits(z, targets_.row(example), temperature_, rescale_);
}

DistillLogitLoss::DistillLogitLoss(Matrix teacher_logits,
                                   std::vector<int> hard_labels,
                                   int num_classes, DistillConfig cfg)
    : cfg_(cfg) {
  cfg_.validate();
  if (teacher_logits.rows != static_cast<int>(hard_labels.size())) {
    throw DomainError(ErrorKind::kShapeError,
                      "teacher logits / hard label count mismatch");
  }
  soft_targets_ = Matrix(teacher_logits.rows, teacher_logits.cols);
  for (int i = 0; i < teacher_logits.rows; ++i) {
    softmax_into(teacher_logits.row(i), cfg_.temperature,
                 soft_targets_.row(i));
  }
  hard_targets_ = Matrix(teacher_logits.rows, num_classes);
  for (int i = 0; i < teacher_logits.rows; ++i) {
    hard_targets_.at(i, hard_labels[static_cast<size_t>(i)]) = 1.0;
  }
}

double DistillLogitLoss::value(std::span<const double> logits,
                               int example) const {
  double loss = 0.0;
  Vec p(logits.size());
  if (cfg_.lambda > 0.0) {
    softmax_into(logits, 1.0, p);
    loss += cfg_.lambda * cross_entropy(p, hard_targets_.row(example));
  }
  if (cfg_.lambda < 1.0) {
    softmax_into(logits, cfg_.temperature, p);
    loss +=
        (1.0 - cfg_.lambda) * cross_entropy(p, soft_targets_.row(example));
  }
  return loss;
}

Vec DistillLogitLoss::grad(std::span<const double> logits, int example) const {
  LogitVector z{Vec(logits.begin(), logits.end())};
  Vec grad(logits.size(), 0.0);
  if (cfg_.lambda > 0.0) {
    Vec hard = ce_gradient_logits(z, hard_targets_.row(example), 1.0, false);
    for (size_t c = 0; c < grad.size(); ++c) grad[c] += cfg_.lambda * hard[c];
  }
  if (cfg_.lambda < 1.0) {
    Vec soft = ce_gradient_logits(z, soft_targets_.row(example),
                                  cfg_.temperature, cfg_.rescale_grad_by_t2);
    for (size_t c = 0; c < grad.size(); ++c) {
      grad[c] += (1.0 - cfg_.lambda) * soft[c];
    }
  }
  return grad;
}

namespace {

double batch_mean_loss(const Model& model, const LogitLoss& loss,
                       const Matrix& batch) {
  ForwardRecord record = forward(model, batch);
  double sum = 0.0;
  for (int i = 0; i < batch.rows; ++i) {
    sum += loss.value(record.logits().row(i), i);
  }
  return sum / batch.rows;
}

}  // namespace

double grad_check(const Model& model, const LogitLoss& loss,
                  const Matrix& batch, double eps, int probes, uint64_t seed) {
  ForwardRecord record = forward(model, batch);
  Matrix upstream(batch.rows, model.spec.num_classes);
  for (int i = 0; i < batch.rows; ++i) {
    Vec g = loss.grad(record.logits().row(i), i);
    std::copy(g.begin(), g.end(), upstream.row(i).begin());
  }
  Gradients analytic = backward(model, record, upstream);

  // flat index space: all weights layer by layer, then all biases
  std::vector<std::pair<size_t, size_t>> coords;  // (layer, flat index)
  size_t weight_total = 0;
  for (size_t l = 0; l < model.weights.size(); ++l) {
    weight_total += model.weights[l].data.size();
  }
  size_t total = model.parameter_count();

  Rng rng(seed);
  std::vector<size_t> chosen;
  if (static_cast<size_t>(probes) >= total) {
    chosen.resize(total);
    for (size_t i = 0; i < total; ++i) chosen[i] = i;
  } else {
    auto perm = rng.permutation<size_t>(total);
    chosen.assign(perm.begin(), perm.begin() + probes);
  }

  Model probe_model = model;
  auto param_ref = [&](size_t flat) -> double& {
    if (flat < weight_total) {
      for (size_t l = 0;; ++l) {
        if (flat < probe_model.weights[l].data.size()) {
          return probe_model.weights[l].data[flat];
        }
        flat -= probe_model.weights[l].data.size();
      }
    }
    flat -= weight_total;
    for (size_t l = 0;; ++l) {
      if (flat < probe_model.biases[l].size()) {
        return probe_model.biases[l][flat];
      }
      flat -= probe_model.biases[l].size();
    }
  };
  auto analytic_at = [&](size_t flat) -> double {
    if (flat < weight_total) {
      for (size_t l = 0;; ++l) {
        if (flat < analytic.weights[l].data.size()) {
          return analytic.weights[l].data[flat];
        }
        flat -= analytic.weights[l].data.size();
      }
    }
    flat -= weight_total;
    for (size_t l = 0;; ++l) {
      if (flat < analytic.biases[l].size()) return analytic.biases[l][flat];
      flat -= analytic.biases[l].size();
    }
  };

  double max_rel = 0.0;
  for (size_t flat : chosen) {
    double& p = param_ref(flat);
    const double saved = p;
    p = saved + eps;
    const double plus = batch_mean_loss(probe_model, loss, batch);
    p = saved - eps;
    const double minus = batch_mean_loss(probe_model, loss, batch);
    p = saved;
    const double numeric = (plus - minus) / (2.0 * eps);
    const double exact = analytic_at(flat);
    const double denom = std::max({1e-8, std::abs(exact), std::abs(numeric)});
    max_rel = std::max(max_rel, std::abs(exact - numeric) / denom);
  }
  return max_rel;
}

namespace {

void write_le_doubles(std::ofstream& out, std::span<const double> values) {
  static_assert(sizeof(double) == 8);
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * 8));
  } else {
    for (double v : values) {
      uint64_t bits;
      std::memcpy(&bits, &v, 8);
      char buf[8];
      for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>(bits >> (8 * i));
      out.write(buf, 8);
    }
  }
}

void read_le_doubles(std::ifstream& in, std::span<double> values) {
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * 8));
  } else {
    for (double& v : values) {
      unsigned char buf[8];
      in.read(reinterpret_cast<char*>(buf), 8);
      uint64_t bits = 0;
      for (int i = 0; i < 8; ++i) bits |= uint64_t(buf[i]) << (8 * i);
      std::memcpy(&v, &bits, 8);
    }
  }
}

}  // namespace

void save_checkpoint(const Model& model, int epoch,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DomainError(ErrorKind::kDataError,
                      "cannot open checkpoint for writing: " + path.string());
  }
  out << "distillab-checkpoint v1\n";
  out << "input_dim " << model.spec.input_dim << "\n";
  out << "num_classes " << model.spec.num_classes << "\n";
  out << "layers " << model.spec.layers.size() << "\n";
  for (size_t l = 0; l < model.spec.layers.size(); ++l) {
    const LayerSpec& layer = model.spec.layers[l];
    out << "layer " << l << " " << layer.in_dim << " " << layer.out_dim << " "
        << activation_name(layer.activation) << " "
        << (layer.binary_weights ? "binary" : "real") << " " << layer.ste_clip
        << "\n";
  }
  out << "seed " << model.seed << "\n";
  out << "epoch " << epoch << "\n";
  out << "params " << model.parameter_count() << "\n";
  for (size_t l = 0; l < model.weights.size(); ++l) {
    write_le_doubles(out, model.weights[l].data);
    write_le_doubles(out, model.biases[l]);
  }
  if (!out) {
    throw DomainError(ErrorKind::kDataError,
                      "failed writing checkpoint: " + path.string());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DomainError(ErrorKind::kDataError,
                      "cannot open checkpoint: " + path.string());
  }
  std::string line;
  if (!std::getline(in, line) || line != "distillab-checkpoint v1") {
    throw DomainError(ErrorKind::kDataError,
                      "not a distillab checkpoint: " + path.string());
  }
  Checkpoint ckpt;
  NetworkSpec& spec = ckpt.model.spec;
  size_t num_layers = 0;
  size_t declared_params = 0;
  bool have_params = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "input_dim") {
      ls >> spec.input_dim;
    } else if (key == "num_classes") {
      ls >> spec.num_classes;
    } else if (key == "layers") {
      ls >> num_layers;
    } else if (key == "layer") {
      size_t idx;
      LayerSpec layer;
      std::string act, kind;
      ls >> idx >> layer.in_dim >> layer.out_dim >> act >> kind >>
          layer.ste_clip;
      layer.activation = activation_from_name(act);
      layer.binary_weights = kind == "binary";
      spec.layers.push_back(layer);
    } else if (key == "seed") {
      ls >> ckpt.model.seed;
    } else if (key == "epoch") {
      ls >> ckpt.epoch;
    } else if (key == "params") {
      ls >> declared_params;
      have_params = true;
      break;
    } else {
      throw DomainError(ErrorKind::kDataError,
                        "unknown checkpoint header line: " + line);
    }
    if (!ls) {
      throw DomainError(ErrorKind::kDataError,
                        "malformed checkpoint header line: " + line);
    }
  }
  if (!have_params || spec.layers.size() != num_layers) {
    throw DomainError(ErrorKind::kDataError,
                      "truncated checkpoint header: " + path.string());
  }
  spec.validate();
  for (const LayerSpec& layer : spec.layers) {
    ckpt.model.weights.emplace_back(layer.out_dim, layer.in_dim);
    ckpt.model.biases.emplace_back(static_cast<size_t>(layer.out_dim), 0.0);
  }
  if (ckpt.model.parameter_count() != declared_params) {
    throw DomainError(ErrorKind::kDataError,
                      "checkpoint parameter count mismatch");
  }
  for (size_t l = 0; l < ckpt.model.weights.size(); ++l) {
    read_le_doubles(in, ckpt.model.weights[l].data);
    read_le_doubles(in, ckpt.model.biases[l]);
  }
  if (!in) {
    throw DomainError(ErrorKind::kDataError,
                      "truncated checkpoint parameter block: " + path.string());
  }
  return ckpt;
}

}  // namespace distillab
