#pragma once

#include <span>
#include <utility>
#include <vector>

#include "distillab/error.hpp"
#include "distillab/matrix.hpp"

namespace distillab {

// Floor applied to probabilities before any log; keeps exact zeros from
// producing -inf in double precision.
inline constexpr double kLogFloor = 1e-12;

enum class LabelKind { kOneHot, kSmoothed };

// Length-K target distribution: one-hot, or (1-alpha) on the true class and
// alpha/(K-1) everywhere else.
struct LabelVector {
  Vec values;
  LabelKind kind = LabelKind::kOneHot;
  double alpha = 0.0;
  int true_class = 0;
};

// Post-softmax probabilities: entries in [0,1], sum 1 within 1e-9.
struct ProbVector {
  Vec values;
};

// Pre-softmax outputs of the final layer; all entries finite.
struct LogitVector {
  Vec values;
};

struct DistillConfig {
  double lambda = 0.0;       // hard-label weight in [0,1]
  double temperature = 1.0;  // positive
  bool rescale_grad_by_t2 = false;

  void validate() const;
};

// Checks the ProbVector contract (entries in [0,1], sum within 1e-9 of 1).
void validate_probabilities(std::span<const double> p);

LabelVector smooth_labels(int class_index, double alpha, int num_classes);

// p_c proportional to exp(z_c / T), stabilized by max subtraction.
ProbVector softmax(const LogitVector& z, double temperature = 1.0);
void softmax_into(std::span<const double> logits, double temperature,
                  std::span<double> out);

// -sum_c target_c * log(max(p_c, 1e-12))
double cross_entropy(std::span<const double> prediction,
                     std::span<const double> target);
inline double cross_entropy(const ProbVector& p, const LabelVector& target) {
  return cross_entropy(p.values, target.values);
}
inline double cross_entropy(const ProbVector& p, const ProbVector& target) {
  return cross_entropy(p.values, target.values);
}

// -sum_c p_c * log(max(p_c, 1e-12))
double entropy(std::span<const double> p);

// sum_c pT_c * log(pT_c / pS_c), with 0*log0 := 0 and pS floored at 1e-12
double kl_divergence(const ProbVector& p_teacher, const ProbVector& p_student);

// Gradient of cross_entropy(softmax(z, T), target) with respect to z:
// (softmax(z, T) - target) / T, which is exactly p - y at T = 1. When
// rescale_grad_by_t2 is set the result is additionally multiplied by T^2,
// the usual compensation when sweeping temperatures.
Vec ce_gradient_logits(const LogitVector& z, std::span<const double> target,
                       double temperature = 1.0,
                       bool rescale_grad_by_t2 = false);
inline Vec ce_gradient_logits(const LogitVector& z, const LabelVector& target,
                              double temperature = 1.0,
                              bool rescale_grad_by_t2 = false) {
  return ce_gradient_logits(z, target.values, temperature, rescale_grad_by_t2);
}

// lambda * CE(softmax(zS, 1), hard) +
// (1 - lambda) * CE(softmax(zS, T), softmax(zT, T)).
// The teacher logits are a constant; no gradient flows through them.
double distill_loss(const LogitVector& student_logits,
                    const LogitVector& teacher_logits, const LabelVector& hard,
                    const DistillConfig& cfg);

// Gradient of distill_loss with respect to the student logits.
Vec distill_loss_gradient(const LogitVector& student_logits,
                          const LogitVector& teacher_logits,
                          const LabelVector& hard, const DistillConfig& cfg);

// Binary logistic loss under a smoothed target:
// loss(z) = -(1-alpha) * log(sigmoid(z)) - alpha * log(1 - sigmoid(z)).
double smoothed_logistic_loss(double z, double alpha);
std::vector<std::pair<double, double>> smoothed_logistic_curve(
    std::span<const double> z_grid, double alpha);

}  // namespace distillab
