#pragma once

#include "glmmgm/fitter.hpp"
#include "glmmgm/intervals.hpp"

#include <string>
#include <vector>

namespace glmmgm {

enum class EstimateKind { Marginal, Conditional };

struct LabeledInterval {
  std::string label;
  Interval interval;
};

struct GroupMeanEstimate {
  std::string group_id;
  EstimateKind kind = EstimateKind::Marginal;
  Index n = 0;
  double point = 0.0;
  double variance = 0.0;
  /// Set when a negative delta-method variance was clamped to zero.
  bool variance_clamped = false;
  std::vector<LabeledInterval> intervals;

  double se() const;
  /// Throws std::out_of_range for an unknown label.
  const Interval& interval(std::string_view label) const;
};

/// Covariate rows (N_q x p) of the observations in group q.
Eigen::MatrixXd group_design(const Dataset& dataset, Index q);

/// Plug-in marginal mean of one observation: the closed-form logistic
/// surrogate zeger_mean(x'beta, sigma2), or exp(x'beta + sigma2/2) for
/// NegBinomial.
double mu_hat_i(const FittedModel& fitted, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Gradient of mu_hat_i in two parameterisations of the variance component:
/// over (beta, sigma2), which the covariance estimate uses, and over
/// (beta, sigma).
struct MeanGradient {
  Eigen::VectorXd wrt_sigma2;
  Eigen::VectorXd wrt_sigma;
};
MeanGradient grad_mu_i(const FittedModel& fitted, const Eigen::Ref<const Eigen::VectorXd>& x);

/// Mean of mu_hat_i over the group rows. Throws std::invalid_argument for an
/// empty group.
double marginal_group_mean(const FittedModel& fitted, const Eigen::MatrixXd& xq);

struct VarianceResult {
  double variance = 0.0;
  bool clamped = false;
};

/// Delta-method variance of the group mean. Logistic: the quadratic form of
/// the summed gradients in the (beta, sigma2) covariance, over N_q^2.
/// NegBinomial: the lognormal-sum variance
///   sum_{i,j} exp(nu_i + nu_j + (s_ii + s_jj)/2) (exp(s_ij) - 1) / N_q^2
/// with nu_i = x_i'beta + sigma2/2 and s_ij = grad nu_i' Sigma grad nu_j.
VarianceResult marginal_group_variance(const FittedModel& fitted, const Eigen::MatrixXd& xq);

/// Variance of a sum of jointly normal exponents: for X ~ N(nu, S),
/// Var(sum_i exp(X_i)) = sum_{i,j} exp(nu_i + nu_j + (S_ii + S_jj)/2) (exp(S_ij) - 1).
double lognormal_sum_variance(const Eigen::VectorXd& nu, const Eigen::MatrixXd& cov);

/// Benchmark estimator evaluated at the group-average covariate.
double mean_at_mean_covariate(const FittedModel& fitted, const Eigen::MatrixXd& xq);
/// Delta-method variance of mean_at_mean_covariate.
double mean_at_mean_covariate_variance(const FittedModel& fitted, const Eigen::MatrixXd& xq);

/// Point, variance and intervals for group q. Logistic intervals are
/// labelled "inverse" and "direct"; NegBinomial adds "lognormal".
GroupMeanEstimate estimate_marginal(const FittedModel& fitted, const Dataset& dataset, Index q,
                                    double alpha = kDefaultAlpha);

}  // namespace glmmgm
