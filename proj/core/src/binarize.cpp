#include "distillab/binarize.hpp"

#include <cmath>
#include <string>

namespace distillab {

Vec sign_activation(std::span<const double> a_real) {
  Vec out(a_real.size());
  for (size_t i = 0; i < a_real.size(); ++i) {
    if (!std::isfinite(a_real[i])) {
      throw DomainError(ErrorKind::kInvalidInput,
                        "non-finite activation in sign_activation");
    }
    out[i] = sign_value(a_real[i]);
  }
  return out;
}

Matrix binarize_weights(const Matrix& latent) {
  if (latent.rows == 0 || latent.cols == 0) {
    throw DomainError(ErrorKind::kSpecError,
                      "binarize_weights needs at least one weight per channel");
  }
  Matrix out(latent.rows, latent.cols);
  for (int r = 0; r < latent.rows; ++r) {
    double l1 = 0.0;
    for (int c = 0; c < latent.cols; ++c) l1 += std::abs(latent.at(r, c));
    const double scale = l1 / latent.cols;
    for (int c = 0; c < latent.cols; ++c) {
      out.at(r, c) = scale * sign_value(latent.at(r, c));
    }
  }
  return out;
}

Vec ste_backward(std::span<const double> grad_wrt_binary,
                 std::span<const double> a_real, double clip_bound) {
  if (!(clip_bound > 0.0)) {
    throw DomainError(ErrorKind::kInvalidCoefficient,
                      "STE clip bound must be positive, got " +
                          std::to_string(clip_bound));
  }
  if (grad_wrt_binary.size() != a_real.size()) {
    throw DomainError(ErrorKind::kShapeError,
                      "ste_backward gradient/activation length mismatch");
  }
  Vec out(a_real.size());
  for (size_t i = 0; i < a_real.size(); ++i) {
    out[i] = std::abs(a_real[i]) <= clip_bound ? grad_wrt_binary[i] : 0.0;
  }
  return out;
}

}  // namespace distillab
