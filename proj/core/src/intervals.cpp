#include "glmmgm/intervals.hpp"

#include <boost/math/distributions/lognormal.hpp>
#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <stdexcept>

namespace glmmgm {

namespace {

void check_variance(double variance) {
  if (!(variance >= 0.0)) throw std::invalid_argument("interval: variance must be >= 0");
}

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

double normal_quantile_two_sided(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::invalid_argument("alpha must lie in (0, 1]");
  if (alpha == 1.0) return 0.0;
  return boost::math::quantile(boost::math::complement(boost::math::normal(), alpha / 2.0));
}

Interval ci_direct(double point, double variance, double alpha) {
  check_variance(variance);
  const double half = normal_quantile_two_sided(alpha) * std::sqrt(variance);
  return {point - half, point + half, 1.0 - alpha};
}

Interval ci_inverse_logit(double point, double variance, double alpha) {
  check_variance(variance);
  if (!(point > 0.0 && point < 1.0))
    throw std::invalid_argument("ci_inverse_logit: point must lie in (0, 1)");
  const double half =
      normal_quantile_two_sided(alpha) * std::sqrt(variance) / (point * (1.0 - point));
  const double centre = logit(point);
  return {inverse_link(Family::Logistic, centre - half),
          inverse_link(Family::Logistic, centre + half), 1.0 - alpha};
}

Interval ci_inverse_log(double point, double variance, double alpha) {
  check_variance(variance);
  if (!(point > 0.0)) throw std::invalid_argument("ci_inverse_log: point must be > 0");
  const double half = normal_quantile_two_sided(alpha) * std::sqrt(variance) / point;
  return {point * std::exp(-half), point * std::exp(half), 1.0 - alpha};
}

Interval ci_lognormal(double point, double variance, Index n, double alpha) {
  if (!(point > 0.0) || !(variance > 0.0) || n < 1)
    throw std::invalid_argument("ci_lognormal: point, variance and n must be positive");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("ci_lognormal: alpha must lie in (0, 1)");
  const double nn = static_cast<double>(n);
  const double s2 = std::log1p(variance / (point * point));
  const double m = std::log(nn * point) - 0.5 * s2;
  const boost::math::lognormal dist(m, std::sqrt(s2));
  return {boost::math::quantile(dist, alpha / 2.0) / nn,
          boost::math::quantile(dist, 1.0 - alpha / 2.0) / nn, 1.0 - alpha};
}

Interval pi_direct(double point, double variance, double alpha) {
  return ci_direct(point, variance, alpha);
}

Interval pi_inverse(double point, double variance, double alpha, Family family) {
  return family == Family::Logistic ? ci_inverse_logit(point, variance, alpha)
                                    : ci_inverse_log(point, variance, alpha);
}

}  // namespace glmmgm
