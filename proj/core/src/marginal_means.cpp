#include "glmmgm/marginal_means.hpp"

#include "glmmgm/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace glmmgm {

double GroupMeanEstimate::se() const { return std::sqrt(std::max(variance, 0.0)); }

const Interval& GroupMeanEstimate::interval(std::string_view label) const {
  for (const auto& li : intervals)
    if (li.label == label) return li.interval;
  throw std::out_of_range("no interval labelled " + std::string(label));
}

Eigen::MatrixXd group_design(const Dataset& dataset, Index q) {
  const auto members = dataset.groups().members(q);
  Eigen::MatrixXd xq(static_cast<Index>(members.size()), dataset.num_covariates());
  for (std::size_t r = 0; r < members.size(); ++r)
    xq.row(static_cast<Index>(r)) = dataset.x_row(members[r]).transpose();
  return xq;
}

namespace {

void check_group(const FittedModel& fitted, const Eigen::MatrixXd& xq) {
  if (xq.rows() == 0) throw std::invalid_argument("group is empty");
  if (xq.cols() != fitted.p()) throw std::invalid_argument("group design has wrong width");
}

double mean_from_eta(const FittedModel& fitted, double eta) {
  const double s2 = fitted.params.sigma2;
  return fitted.family == Family::Logistic ? zeger_mean(eta, s2) : std::exp(eta + 0.5 * s2);
}

// Gradient of the plug-in mean at linear predictor eta for covariate x, over
// (beta, sigma2).
Eigen::VectorXd gradient_sigma2(const FittedModel& fitted,
                                const Eigen::Ref<const Eigen::VectorXd>& x, double eta) {
  const Index p = fitted.p();
  Eigen::VectorXd g(p + 1);
  if (fitted.family == Family::Logistic) {
    const double c = zeger_constant(fitted.params.sigma2);
    const double m = inverse_link(Family::Logistic, c * eta);
    const double dens = m * (1.0 - m);  // e^{c eta} / (1 + e^{c eta})^2
    g.head(p) = c * dens * x;
    g(p) = -0.5 * kZegerFactor * c * c * c * dens * eta;
  } else {
    const double mu = std::exp(eta + 0.5 * fitted.params.sigma2);
    g.head(p) = mu * x;
    g(p) = 0.5 * mu;
  }
  return g;
}

}  // namespace

double mu_hat_i(const FittedModel& fitted, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return mean_from_eta(fitted, linear_predictor(fitted.params, x, 0.0));
}

MeanGradient grad_mu_i(const FittedModel& fitted, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const double eta = linear_predictor(fitted.params, x, 0.0);
  MeanGradient out;
  out.wrt_sigma2 = gradient_sigma2(fitted, x, eta);
  out.wrt_sigma = out.wrt_sigma2;
  out.wrt_sigma(fitted.p()) *= 2.0 * fitted.params.sigma();  // d sigma2 / d sigma = 2 sigma
  return out;
}

double marginal_group_mean(const FittedModel& fitted, const Eigen::MatrixXd& xq) {
  check_group(fitted, xq);
  const Eigen::VectorXd eta = xq * fitted.params.beta;
  double sum = 0.0;
  for (Index r = 0; r < eta.size(); ++r) sum += mean_from_eta(fitted, eta(r));
  return sum / static_cast<double>(eta.size());
}

double lognormal_sum_variance(const Eigen::VectorXd& nu, const Eigen::MatrixXd& cov) {
  const Index n = nu.size();
  double total = 0.0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      total += std::exp(nu(i) + nu(j) + 0.5 * (cov(i, i) + cov(j, j))) * std::expm1(cov(i, j));
  return total;
}

VarianceResult marginal_group_variance(const FittedModel& fitted, const Eigen::MatrixXd& xq) {
  check_group(fitted, xq);
  const Index p = fitted.p();
  const Index n = xq.rows();
  const Eigen::MatrixXd sigma = fitted.cov_beta_sigma2();
  const Eigen::VectorXd eta = xq * fitted.params.beta;
  double var = 0.0;
  if (fitted.family == Family::Logistic) {
    Eigen::VectorXd gsum = Eigen::VectorXd::Zero(p + 1);
    for (Index r = 0; r < n; ++r) gsum += gradient_sigma2(fitted, xq.row(r).transpose(), eta(r));
    var = gsum.dot(sigma * gsum);
  } else {
    Eigen::MatrixXd grad(n, p + 1);
    grad.leftCols(p) = xq;
    grad.col(p).setConstant(0.5);
    const Eigen::MatrixXd s = grad * sigma * grad.transpose();
    const Eigen::VectorXd nu = eta.array() + 0.5 * fitted.params.sigma2;
    var = lognormal_sum_variance(nu, s);
  }
  var /= static_cast<double>(n) * static_cast<double>(n);
  VarianceResult out;
  if (!(var >= 0.0)) {
    out.clamped = true;
    var = 0.0;
  }
  out.variance = var;
  return out;
}

double mean_at_mean_covariate(const FittedModel& fitted, const Eigen::MatrixXd& xq) {
  check_group(fitted, xq);
  const Eigen::VectorXd xbar = xq.colwise().mean().transpose();
  return mu_hat_i(fitted, xbar);
}

double mean_at_mean_covariate_variance(const FittedModel& fitted, const Eigen::MatrixXd& xq) {
  check_group(fitted, xq);
  const Eigen::VectorXd xbar = xq.colwise().mean().transpose();
  const Eigen::VectorXd g = grad_mu_i(fitted, xbar).wrt_sigma2;
  return std::max(0.0, g.dot(fitted.cov_beta_sigma2() * g));
}

GroupMeanEstimate estimate_marginal(const FittedModel& fitted, const Dataset& dataset, Index q,
                                    double alpha) {
  const Eigen::MatrixXd xq = group_design(dataset, q);
  GroupMeanEstimate est;
  est.group_id = dataset.groups().label(q);
  est.kind = EstimateKind::Marginal;
  est.n = xq.rows();
  est.point = marginal_group_mean(fitted, xq);
  const VarianceResult v = marginal_group_variance(fitted, xq);
  est.variance = v.variance;
  est.variance_clamped = v.clamped;
  if (fitted.family == Family::Logistic) {
    est.intervals.push_back({"inverse", ci_inverse_logit(est.point, est.variance, alpha)});
    est.intervals.push_back({"direct", ci_direct(est.point, est.variance, alpha)});
  } else {
    est.intervals.push_back({"inverse", ci_inverse_log(est.point, est.variance, alpha)});
    est.intervals.push_back({"direct", ci_direct(est.point, est.variance, alpha)});
    est.intervals.push_back({"lognormal", est.variance > 0.0
                                              ? ci_lognormal(est.point, est.variance, est.n, alpha)
                                              : Interval{est.point, est.point, 1.0 - alpha}});
  }
  return est;
}

}  // namespace glmmgm
