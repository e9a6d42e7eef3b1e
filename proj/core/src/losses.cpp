#include "distillab/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace distillab {

namespace {

void require_same_length(size_t a, size_t b, const char* what) {
  if (a != b) {
    throw DomainError(ErrorKind::kShapeError,
                      std::string(what) + ": lengths " + std::to_string(a) +
                          " and " + std::to_string(b) + " differ");
  }
}

// log(1 + exp(x)) without overflow
double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace

void DistillConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw DomainError(ErrorKind::kInvalidCoefficient,
                      "temperature must be a positive real");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw DomainError(ErrorKind::kInvalidCoefficient,
                      "lambda must lie in [0,1]");
  }
}

void validate_probabilities(std::span<const double> p) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DomainError(ErrorKind::kInvalidInput,
                        "probability entry outside [0,1]");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw DomainError(ErrorKind::kInvalidInput,
                      "probabilities sum to " + std::to_string(sum));
  }
}

LabelVector smooth_labels(int class_index, double alpha, int num_classes) {
  if (num_classes < 2) {
    throw DomainError(ErrorKind::kInvalidClassCount,
                      "need at least 2 classes, got " +
                          std::to_string(num_classes));
  }
  if (class_index < 0 || class_index >= num_classes) {
    throw DomainError(ErrorKind::kInvalidInput,
                      "class index " + std::to_string(class_index) +
                          " out of range for K=" + std::to_string(num_classes));
  }
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw DomainError(ErrorKind::kInvalidCoefficient,
                      "smoothing coefficient must lie in [0,1), got " +
                          std::to_string(alpha));
  }
  LabelVector out;
  out.kind = alpha == 0.0 ? LabelKind::kOneHot : LabelKind::kSmoothed;
  out.alpha = alpha;
  out.true_class = class_index;
  out.values.assign(static_cast<size_t>(num_classes),
                    alpha / (num_classes - 1));
  out.values[static_cast<size_t>(class_index)] = 1.0 - alpha;
  return out;
}

void softmax_into(std::span<const double> logits, double temperature,
                  std::span<double> out) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw DomainError(ErrorKind::kInvalidCoefficient,
                      "temperature must be a positive real");
  }
  require_same_length(logits.size(), out.size(), "softmax");
  if (logits.empty()) {
    throw DomainError(ErrorKind::kInvalidInput, "empty logit vector");
  }
  double max_scaled = -HUGE_VAL;
  for (double z : logits) {
    if (!std::isfinite(z)) {
      throw DomainError(ErrorKind::kInvalidInput, "non-finite logit");
    }
    max_scaled = std::max(max_scaled, z / temperature);
  }
  double sum = 0.0;
  for (size_t c = 0; c < logits.size(); ++c) {
    out[c] = std::exp(logits[c] / temperature - max_scaled);
    sum += out[c];
  }
  for (double& v : out) v /= sum;
}

ProbVector softmax(const LogitVector& z, double temperature) {
  ProbVector p;
  p.values.resize(z.values.size());
  softmax_into(z.values, temperature, p.values);
  return p;
}

double cross_entropy(std::span<const double> prediction,
                     std::span<const double> target) {
  require_same_length(prediction.size(), target.size(), "cross_entropy");
  double loss = 0.0;
  for (size_t c = 0; c < prediction.size(); ++c) {
    loss -= target[c] * std::log(std::max(prediction[c], kLogFloor));
  }
  return loss;
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(std::max(v, kLogFloor));
  }
  return h;
}

double kl_divergence(const ProbVector& p_teacher, const ProbVector& p_student) {
  require_same_length(p_teacher.values.size(), p_student.values.size(),
                      "kl_divergence");
  double kl = 0.0;
  for (size_t c = 0; c < p_teacher.values.size(); ++c) {
    double pt = p_teacher.values[c];
    if (pt <= 0.0) continue;  // 0 * log 0 := 0
    kl += pt * std::log(pt / std::max(p_student.values[c], kLogFloor));
  }
  return kl;
}

Vec ce_gradient_logits(const LogitVector& z, std::span<const double> target,
                       double temperature, bool rescale_grad_by_t2) {
  require_same_length(z.values.size(), target.size(), "ce_gradient_logits");
  Vec grad(z.values.size());
  softmax_into(z.values, temperature, grad);
  const double scale =
      (rescale_grad_by_t2 ? temperature * temperature : 1.0) / temperature;
  for (size_t c = 0; c < grad.size(); ++c) {
    grad[c] = (grad[c] - target[c]) * scale;
  }
  return grad;
}

double distill_loss(const LogitVector& student_logits,
                    const LogitVector& teacher_logits, const LabelVector& hard,
                    const DistillConfig& cfg) {
  cfg.validate();
  double loss = 0.0;
  if (cfg.lambda > 0.0) {
    loss += cfg.lambda * cross_entropy(softmax(student_logits, 1.0).values,
                                       hard.values);
  }
  if (cfg.lambda < 1.0) {
    loss += (1.0 - cfg.lambda) *
            cross_entropy(softmax(student_logits, cfg.temperature).values,
                          softmax(teacher_logits, cfg.temperature).values);
  }
  return loss;
}

Vec distill_loss_gradient(const LogitVector& student_logits,
                          const LogitVector& teacher_logits,
                          const LabelVector& hard, const DistillConfig& cfg) {
  cfg.validate();
  Vec grad(student_logits.values.size(), 0.0);
  if (cfg.lambda > 0.0) {
    Vec hard_grad = ce_gradient_logits(student_logits, hard.values, 1.0, false);
    for (size_t c = 0; c < grad.size(); ++c) {
      grad[c] += cfg.lambda * hard_grad[c];
    }
  }
  if (cfg.lambda < 1.0) {
    ProbVector soft_target = softmax(teacher_logits, cfg.temperature);
    Vec soft_grad = ce_gradient_logits(student_logits, soft_target.values,
                                       cfg.temperature, cfg.rescale_grad_by_t2);
    for (size_t c = 0; c < grad.size(); ++c) {
      grad[c] += (1.0 - cfg.lambda) * soft_grad[c];
    }
  }
  return grad;
}

double smoothed_logistic_loss(double z, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw DomainError(ErrorKind::kInvalidCoefficient,
                      "smoothing coefficient must lie in [0,1)");
  }
  // -log(sigmoid(z)) = softplus(-z) and -log(1 - sigmoid(z)) = softplus(z)
  return (1.0 - alpha) * softplus(-z) + alpha * softplus(z);
}

std::vector<std::pair<double, double>> smoothed_logistic_curve(
    std::span<const double> z_grid, double alpha) {
  std::vector<std::pair<double, double>> curve;
  curve.reserve(z_grid.size());
  for (double z : z_grid) {
    curve.emplace_back(z, smoothed_logistic_loss(z, alpha));
  }
  return curve;
}

}  // namespace distillab
