#include "glmmgm/quadrature.hpp"

#include "glmmgm/model.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>

namespace glmmgm {

namespace {

// Orthonormal Hermite polynomial p_m(x) and p_{m-1}(x) by the three-term
// recurrence; p_k are normalised against exp(-x^2).
std::pair<double, double> hermite_orthonormal(int m, double x) {
  double p_prev = 0.0;
  double p = 1.0 / std::pow(std::numbers::pi, 0.25);
  for (int j = 1; j <= m; ++j) {
    const double p_next = x * std::sqrt(2.0 / j) * p - std::sqrt((j - 1.0) / j) * p_prev;
    p_prev = p;
    p = p_next;
  }
  return {p, p_prev};
}

}  // namespace

GHRule gh_rule(int m) {
  if (m < 1) throw std::invalid_argument("gh_rule: node count must be >= 1");
  GHRule rule;
  rule.nodes.resize(static_cast<std::size_t>(m));
  rule.weights.resize(static_cast<std::size_t>(m));
  if (m == 1) {
    rule.nodes[0] = 0.0;
    rule.weights[0] = std::sqrt(std::numbers::pi);
    return rule;
  }

  // Jacobi matrix of the Hermite weight: zero diagonal, off-diagonal sqrt(k/2).
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(m, m);
  for (int k = 1; k < m; ++k) {
    jacobi(k, k - 1) = std::sqrt(k / 2.0);
    jacobi(k - 1, k) = jacobi(k, k - 1);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  const Eigen::VectorXd& values = eig.eigenvalues();

  for (int k = 0; k < m; ++k) {
    double x = values(k);
    // Newton on p_m; p_m'(x) = sqrt(2m) p_{m-1}(x).
    for (int it = 0; it < 10; ++it) {
      const auto [pm, pm1] = hermite_orthonormal(m, x);
      const double dp = std::sqrt(2.0 * m) * pm1;
      const double step = pm / dp;
      x -= step;
      if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(x))) break;
    }
    const auto [pm, pm1] = hermite_orthonormal(m, x);
    (void)pm;
    const double dp = std::sqrt(2.0 * m) * pm1;
    rule.nodes[static_cast<std::size_t>(k)] = x;
    rule.weights[static_cast<std::size_t>(k)] = 2.0 / (dp * dp);
  }

  // Enforce exact symmetry: average mirrored pairs.
  for (int k = 0; k < m / 2; ++k) {
    auto lo = static_cast<std::size_t>(k);
    auto hi = static_cast<std::size_t>(m - 1 - k);
    const double x = 0.5 * (rule.nodes[hi] - rule.nodes[lo]);
    const double w = 0.5 * (rule.weights[hi] + rule.weights[lo]);
    rule.nodes[lo] = -x;
    rule.nodes[hi] = x;
    rule.weights[lo] = rule.weights[hi] = w;
  }
  if (m % 2 == 1) rule.nodes[static_cast<std::size_t>(m / 2)] = 0.0;
  return rule;
}

const GHRule& default_gh_rule() {
  static const GHRule rule = gh_rule(kDefaultGhNodes);
  return rule;
}

const LegendreRule& legendre8() {
  static const LegendreRule rule = [] {
    using Gauss = boost::math::quadrature::gauss<double, 8>;
    LegendreRule r{};
    const auto& x = Gauss::abscissa();
    const auto& w = Gauss::weights();
    for (std::size_t k = 0; k < x.size(); ++k) {
      r.nodes[3 - k] = -x[k];
      r.weights[3 - k] = w[k];
      r.nodes[4 + k] = x[k];
      r.weights[4 + k] = w[k];
    }
    return r;
  }();
  return rule;
}

double logistic_normal_integral(double eta0, double sigma2, const GHRule& rule) {
  return expect_over_normal(
      [eta0](double b) { return inverse_link(Family::Logistic, eta0 + b); }, sigma2, rule);
}

double zeger_constant(double sigma2) {
  if (!(sigma2 >= 0.0)) throw std::domain_error("zeger_constant: sigma2 must be >= 0");
  return 1.0 / std::sqrt(1.0 + kZegerFactor * sigma2);
}

double zeger_mean(double eta0, double sigma2) {
  return inverse_link(Family::Logistic, zeger_constant(sigma2) * eta0);
}

}  // namespace glmmgm
