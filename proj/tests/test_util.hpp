#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "distillab/losses.hpp"
#include "distillab/rng.hpp"

namespace testutil {

// Golden-section minimizer; the independent oracle for curve-minimum checks.
template <typename F>
std::pair<double, double> golden_section_min(F f, double lo, double hi,
                                             double tol = 1e-10) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  while (b - a > tol) {
    const double c = b - phi * (b - a);
    const double d = a + phi * (b - a);
    if (f(c) < f(d)) {
      b = d;
    } else {
      a = c;
    }
  }
  const double x = (a + b) / 2.0;
  return {x, f(x)};
}

inline distillab::Vec random_prob(distillab::Rng& rng, int k) {
  distillab::Vec p(static_cast<size_t>(k));
  double sum = 0.0;
  for (double& v : p) {
    v = rng.uniform(1e-4, 1.0);
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

inline distillab::Vec random_logits(distillab::Rng& rng, int k,
                                    double scale = 4.0) {
  distillab::Vec z(static_cast<size_t>(k));
  for (double& v : z) v = rng.uniform(-scale, scale);
  return z;
}

// Central finite differences of a scalar function of a vector.
inline distillab::Vec central_diff(
    const std::function<double(const distillab::Vec&)>& f,
    const distillab::Vec& x, double eps = 1e-5) {
  distillab::Vec grad(x.size());
  distillab::Vec probe = x;
  for (size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    const double plus = f(probe);
    probe[i] = x[i] - eps;
    const double minus = f(probe);
    probe[i] = x[i];
    grad[i] = (plus - minus) / (2.0 * eps);
  }
  return grad;
}

inline double max_rel_error(const distillab::Vec& a, const distillab::Vec& b) {
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({1e-8, std::abs(a[i]), std::abs(b[i])});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace testutil
