#pragma once

#include "glmmgm/model.hpp"

#include <limits>

namespace glmmgm {

/// Log-density of one response and its first two derivatives in eta.
struct EtaDerivatives {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

/// Conditional distribution of a single response given its linear predictor.
///
/// Logistic: w [y eta - log(1 + e^eta)].
/// NegBinomial (mean mu = e^eta, size kappa, Var = mu + mu^2/kappa):
///   w [lgamma(y+k) - lgamma(k) - lgamma(y+1) + k log(k/(k+mu)) + y log(mu/(k+mu))].
///
/// The density splits into an eta-independent constant(y) and kernel(y, eta)
/// so quadrature loops only evaluate the part that varies with the random
/// effect.
class ResponseModel {
 public:
  explicit ResponseModel(Family family, double kappa = std::numeric_limits<double>::infinity());

  Family family() const { return family_; }
  double kappa() const { return kappa_; }

  double log_density(double y, double eta, double w = 1.0) const {
    return constant(y, w) + kernel(y, eta, w);
  }
  double constant(double y, double w = 1.0) const;
  double kernel(double y, double eta, double w = 1.0) const;

  /// Kernel value with d/deta and d^2/deta^2 (observed, not expected).
  EtaDerivatives derivatives(double y, double eta, double w = 1.0) const;

  /// d log f / d kappa, split like the density: the digamma part depends on y
  /// only, the rest on eta.
  double dkappa_constant(double y, double w = 1.0) const;
  double dkappa_kernel(double y, double eta, double w = 1.0) const;

  /// Variance function V(mu).
  double variance(double mu) const;

  /// GLM iterative weight w / (sigma0^2 V(mu) g'(mu)^2) at eta.
  double iterative_weight(double eta, double w = 1.0) const;

 private:
  Family family_;
  double kappa_;
  double lgamma_kappa_ = 0.0;
  double digamma_kappa_ = 0.0;
};

/// log(1 + e^x) without overflow.
double softplus(double x);

}  // namespace glmmgm
