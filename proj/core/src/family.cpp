#include "glmmgm/family.hpp"

#include <boost/math/special_functions/digamma.hpp>

#include <cmath>
#include <stdexcept>

namespace glmmgm {

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

namespace {

// log(kappa + e^eta) evaluated stably for either sign of eta - log(kappa).
double log_kappa_plus_mu(double log_kappa, double eta) {
  return std::max(log_kappa, eta) + std::log1p(std::exp(-std::abs(log_kappa - eta)));
}

}  // namespace

ResponseModel::ResponseModel(Family family, double kappa) : family_(family), kappa_(kappa) {
  if (family_ == Family::NegBinomial) {
    if (!(kappa_ > 0.0) || !std::isfinite(kappa_))
      throw std::invalid_argument("ResponseModel: negative-binomial kappa must be finite and > 0");
    lgamma_kappa_ = std::lgamma(kappa_);
    digamma_kappa_ = boost::math::digamma(kappa_);
  }
}

double ResponseModel::constant(double y, double w) const {
  if (family_ == Family::Logistic) return 0.0;
  return w * (std::lgamma(y + kappa_) - lgamma_kappa_ - std::lgamma(y + 1.0));
}

double ResponseModel::kernel(double y, double eta, double w) const {
  if (family_ == Family::Logistic) return w * (y * eta - softplus(eta));
  const double log_k = std::log(kappa_);
  const double log_km = log_kappa_plus_mu(log_k, eta);
  return w * (kappa_ * (log_k - log_km) + y * (eta - log_km));
}

EtaDerivatives ResponseModel::derivatives(double y, double eta, double w) const {
  EtaDerivatives out;
  if (family_ == Family::Logistic) {
    const double mu = inverse_link(Family::Logistic, eta);
    out.value = w * (y * eta - softplus(eta));
    out.d1 = w * (y - mu);
    out.d2 = -w * mu * (1.0 - mu);
    return out;
  }
  const double log_k = std::log(kappa_);
  const double log_km = log_kappa_plus_mu(log_k, eta);
  // mu/(k+mu) and k/(k+mu) without forming mu when eta is large.
  const double p_mu = std::exp(eta - log_km);
  const double p_k = std::exp(log_k - log_km);
  out.value = w * (kappa_ * (log_k - log_km) + y * (eta - log_km));
  out.d1 = w * (y * p_k - kappa_ * p_mu);  // kappa (y - mu) / (kappa + mu)
  out.d2 = -w * p_mu * p_k * (kappa_ + y);        // -kappa mu (kappa + y) / (kappa + mu)^2
  return out;
}

double ResponseModel::dkappa_constant(double y, double w) const {
  if (family_ == Family::Logistic) return 0.0;
  return w * (boost::math::digamma(y + kappa_) - digamma_kappa_);
}

double ResponseModel::dkappa_kernel(double y, double eta, double w) const {
  if (family_ == Family::Logistic) return 0.0;
  const double log_k = std::log(kappa_);
  const double log_km = log_kappa_plus_mu(log_k, eta);
  // (mu - y) / (kappa + mu)
  const double tail = std::exp(eta - log_km) - y * std::exp(-log_km);
  return w * ((log_k - log_km) + tail);
}

double ResponseModel::variance(double mu) const {
  if (family_ == Family::Logistic) return mu * (1.0 - mu);
  return mu + mu * mu / kappa_;
}

double ResponseModel::iterative_weight(double eta, double w) const {
  if (family_ == Family::Logistic) {
    const double mu = inverse_link(Family::Logistic, eta);
    return w * mu * (1.0 - mu);
  }
  // w mu^2 / V(mu) = w kappa mu / (kappa + mu).
  const double log_k = std::log(kappa_);
  return w * kappa_ * std::exp(eta - log_kappa_plus_mu(log_k, eta));
}

}  // namespace glmmgm
