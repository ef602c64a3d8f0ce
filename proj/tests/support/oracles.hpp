#pragma once

// Brute-force reference computations for the tests. Nothing here calls into
// the library's numerical code: integrals are dense trapezoid sums, optima
// come from golden-section search and linear algebra is formed densely.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

template <class F>
double trapezoid(F&& f, double a, double b, long n) {
  const double h = (b - a) / static_cast<double>(n);
  double sum = 0.5 * (f(a) + f(b));
  for (long k = 1; k < n; ++k) sum += f(a + h * static_cast<double>(k));
  return sum * h;
}

/// Maximiser of a unimodal f on [a, b].
template <class F>
double golden_section_max(F&& f, double a, double b, double tol) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

inline double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double normal_pdf(double b, double sigma2) {
  return std::exp(-0.5 * b * b / sigma2) / std::sqrt(2.0 * std::numbers::pi * sigma2);
}

/// E expit(eta0 + b), b ~ N(0, sigma2), by an n-interval trapezoid rule on
/// [-8 sigma, 8 sigma].
inline double logistic_normal(double eta0, double sigma2, long n = 1'000'000) {
  if (sigma2 == 0.0) return expit(eta0);
  const double s = std::sqrt(sigma2);
  return trapezoid([&](double b) { return expit(eta0 + b) * normal_pdf(b, sigma2); }, -8.0 * s,
                   8.0 * s, n);
}

inline double bernoulli_logpmf(double y, double eta) {
  return y * eta - (eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)));
}

inline double nb_logpmf(double y, double mu, double kappa) {
  return std::lgamma(y + kappa) - std::lgamma(kappa) - std::lgamma(y + 1.0) +
         kappa * std::log(kappa / (kappa + mu)) + y * std::log(mu / (kappa + mu));
}

/// One subject's observations: linear predictor without the random effect.
struct SubjectData {
  std::vector<double> y;
  std::vector<double> offset;
};

/// Conditional log-likelihood of a subject at random effect b.
inline double subject_loglik(const SubjectData& s, bool negbin, double kappa, double b) {
  double l = 0.0;
  for (std::size_t j = 0; j < s.y.size(); ++j) {
    const double eta = s.offset[j] + b;
    l += negbin ? nb_logpmf(s.y[j], std::exp(eta), kappa) : bernoulli_logpmf(s.y[j], eta);
  }
  return l;
}

/// log of the integral of f(y | b) N(b; 0, sigma2) db by a dense trapezoid
/// rule on [-12 sigma, 12 sigma], shifted by the integrand's grid maximum.
inline double subject_log_integral(const SubjectData& s, bool negbin, double kappa, double sigma2,
                                   long n = 400'000) {
  const double sd = std::sqrt(sigma2);
  const double a = -12.0 * sd, h = 24.0 * sd / static_cast<double>(n);
  std::vector<double> lv(static_cast<std::size_t>(n + 1));
  double top = -INFINITY;
  for (long k = 0; k <= n; ++k) {
    const double b = a + h * static_cast<double>(k);
    const double v = subject_loglik(s, negbin, kappa, b) - 0.5 * b * b / sigma2;
    lv[static_cast<std::size_t>(k)] = v;
    top = std::max(top, v);
  }
  double sum = 0.0;
  for (long k = 0; k <= n; ++k) {
    const double e = std::exp(lv[static_cast<std::size_t>(k)] - top);
    sum += (k == 0 || k == n) ? 0.5 * e : e;
  }
  return top + std::log(sum * h) - 0.5 * std::log(2.0 * std::numbers::pi * sigma2);
}

/// Plain GLM maximum likelihood (logit or log link, Bernoulli or Poisson)
/// by full Newton iterations. Returns beta and its inverse-information
/// covariance.
struct GlmFit {
  Eigen::VectorXd beta;
  Eigen::MatrixXd cov;
};
inline GlmFit glm_newton(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, bool poisson) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
  Eigen::MatrixXd info;
  for (int it = 0; it < 100; ++it) {
    Eigen::VectorXd mu(x.rows()), w(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double eta = x.row(i).dot(beta);
      mu(i) = poisson ? std::exp(eta) : expit(eta);
      w(i) = poisson ? mu(i) : mu(i) * (1.0 - mu(i));
    }
    info = x.transpose() * w.asDiagonal() * x;
    const Eigen::VectorXd step = info.ldlt().solve(x.transpose() * (y - mu));
    beta += step;
    if (step.norm() < 1e-13) break;
  }
  return {beta, info.inverse()};
}

/// Henderson mixed-model equations: coefficient matrix
/// [[X'R^-1 X, X'R^-1 Z], [Z'R^-1 X, Z'R^-1 Z + G^-1]] for diagonal R^-1 and G.
inline Eigen::MatrixXd henderson_matrix(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z,
                                        const Eigen::VectorXd& r_inv, const Eigen::VectorXd& g) {
  const Eigen::Index p = x.cols(), k = z.cols();
  Eigen::MatrixXd xz(x.rows(), p + k);
  xz << x, z;
  Eigen::MatrixXd m = xz.transpose() * r_inv.asDiagonal() * xz;
  for (Eigen::Index i = 0; i < k; ++i) m(p + i, p + i) += 1.0 / g(i);
  return m;
}

/// Prediction error covariance of x_r'beta_hat + z_r'b_hat for the listed
/// rows, from the explicit inverse of the Henderson matrix.
inline Eigen::MatrixXd henderson_prediction_covariance(const Eigen::MatrixXd& x,
                                                       const Eigen::MatrixXd& z,
                                                       const Eigen::VectorXd& r_inv,
                                                       const Eigen::VectorXd& g,
                                                       const std::vector<Eigen::Index>& rows) {
  const Eigen::MatrixXd m_inv = henderson_matrix(x, z, r_inv, g).inverse();
  Eigen::MatrixXd l(static_cast<Eigen::Index>(rows.size()), x.cols() + z.cols());
  for (std::size_t a = 0; a < rows.size(); ++a) {
    l.row(static_cast<Eigen::Index>(a)) << x.row(rows[a]), z.row(rows[a]);
  }
  return l * m_inv * l.transpose();
}

/// Henderson solution (beta_hat, b_hat) for response y.
inline Eigen::VectorXd henderson_solve(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z,
                                       const Eigen::VectorXd& r_inv, const Eigen::VectorXd& g,
                                       const Eigen::VectorXd& y) {
  Eigen::MatrixXd xz(x.rows(), x.cols() + z.cols());
  xz << x, z;
  return henderson_matrix(x, z, r_inv, g).lu().solve(xz.transpose() * r_inv.asDiagonal() * y);
}

inline double lognormal_cdf(double v, double m, double s) {
  if (v <= 0.0) return 0.0;
  return 0.5 * std::erfc(-(std::log(v) - m) / (s * std::sqrt(2.0)));
}

/// Quantile of LN(m, s^2) by bisection on the CDF.
inline double lognormal_quantile_bisect(double prob, double m, double s) {
  double lo = 0.0, hi = std::exp(m + 40.0 * s);
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    (lognormal_cdf(mid, m, s) < prob ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Monte Carlo variance of sum_i exp(X_i), X ~ N(nu, cov).
inline double mc_lognormal_sum_variance(const Eigen::VectorXd& nu, const Eigen::MatrixXd& cov,
                                        long draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z01;
  const Eigen::MatrixXd l = cov.llt().matrixL();
  double mean = 0.0, m2 = 0.0;
  Eigen::VectorXd z(nu.size());
  for (long d = 1; d <= draws; ++d) {
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = z01(rng);
    const double s = (nu + l * z).array().exp().sum();
    const double delta = s - mean;
    mean += delta / static_cast<double>(d);
    m2 += delta * (s - mean);
  }
  return m2 / static_cast<double>(draws - 1);
}

/// Central-difference gradient.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double rel_step = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = rel_step * (1.0 + std::abs(x(i)));
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

/// max_i |a_i - b_i| / max(|b|_inf, floor): relative error of a vector.
inline double rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor = 1e-8) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), floor);
}

}  // namespace oracle
