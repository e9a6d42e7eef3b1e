#pragma once

#include <span>

#include "distillab/losses.hpp"
#include "distillab/matrix.hpp"

namespace distillab {

// Latent weights of binary layers are clipped to this band after each update
// so they keep responding to gradients.
inline constexpr double kLatentWeightClip = 1.5;

// -1 for negative input, +1 otherwise (zero maps to +1).
inline double sign_value(double x) { return x < 0.0 ? -1.0 : 1.0; }

Vec sign_activation(std::span<const double> a_real);

// Channel-wise weight binarization. Each row of the latent matrix is one
// output channel with fan-in n = cols: s = |row|_l1 / n, W_b = s * Sign(W_r).
Matrix binarize_weights(const Matrix& latent);

// Clipped-identity straight-through estimator: the gradient passes where
// |A_r| <= clip_bound and is zero elsewhere.
Vec ste_backward(std::span<const double> grad_wrt_binary,
                 std::span<const double> a_real, double clip_bound);

}  // namespace distillab
