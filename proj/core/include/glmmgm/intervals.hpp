#pragma once

#include "glmmgm/model.hpp"

#include <string>

namespace glmmgm {

inline constexpr double kDefaultAlpha = 0.05;

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;

  bool contains(double value) const { return lower <= value && value <= upper; }
};

/// Standard normal quantile z_{1 - alpha/2}; 0 when alpha == 1. Throws
/// std::invalid_argument unless 0 < alpha <= 1.
double normal_quantile_two_sided(double alpha);

/// Wald interval point +/- z sqrt(variance).
Interval ci_direct(double point, double variance, double alpha = kDefaultAlpha);

/// Wald interval on the logit scale with standard deviation
/// sqrt(variance) / (point (1 - point)), mapped back through the inverse logit.
/// Requires 0 < point < 1.
Interval ci_inverse_logit(double point, double variance, double alpha = kDefaultAlpha);

/// point * exp(-/+ z sqrt(variance) / point). Requires point > 0.
Interval ci_inverse_log(double point, double variance, double alpha = kDefaultAlpha);

/// Quantiles of the lognormal with mean n * point and variance n^2 * variance,
/// divided by n. Requires point > 0, variance > 0, n >= 1.
Interval ci_lognormal(double point, double variance, Index n, double alpha = kDefaultAlpha);

/// Prediction interval point +/- z sqrt(variance); same contract as ci_direct.
Interval pi_direct(double point, double variance, double alpha = kDefaultAlpha);

/// Back-transformed prediction interval: the inverse-logit construction for
/// Logistic, the inverse-log one for NegBinomial.
Interval pi_inverse(double point, double variance, double alpha, Family family);

}  // namespace glmmgm
