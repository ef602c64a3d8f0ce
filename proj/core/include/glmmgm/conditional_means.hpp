#pragma once

#include "glmmgm/marginal_means.hpp"

#include <span>
#include <vector>

namespace glmmgm {

/// Pieces of the joint (beta, b) information at the conditional modes:
/// iterative weights W, the subject incidence Z and G = sigma2 I.
///
/// The block matrix
///   M = [[X'WX, X'WZ], [Z'WX, Z'WZ + G^{-1}]]
/// is never formed. Because Z'WZ + G^{-1} is diagonal, eliminating the
/// random-effect block leaves the p x p Schur complement
///   S = X'WX - sum_i B_i B_i' / D_i,  B_i = sum_j W_ij x_ij,  D_i = sum_j W_ij + 1/sigma2,
/// which is factored once. At sigma2 == 0 the random-effect block drops out.
class PredictionStructure {
 public:
  /// Weights at the fitted conditional modes, using the family's variance
  /// function (NegBinomial at the fitted kappa).
  PredictionStructure(const Dataset& dataset, const FittedModel& fitted);

  /// Generic form: stacked design, owning subject of every row, weights and
  /// the random-effect variance. Subjects are numbered 0..K-1.
  PredictionStructure(Eigen::MatrixXd x, std::vector<Index> subject_of_obs,
                      Eigen::VectorXd weights, double sigma2);

  Index num_obs() const { return x_.rows(); }
  Index num_subjects() const { return static_cast<Index>(d_.size()); }
  double sigma2() const { return sigma2_; }
  const Eigen::VectorXd& weights() const { return w_; }
  /// True when the Schur complement needed diagonal jitter to factor.
  bool jittered() const { return jittered_; }

  Eigen::MatrixXd dense_x() const { return x_; }
  Eigen::MatrixXd dense_z() const;

  /// (X_q', Z_q') M^{-1} (X_q; Z_q) for the listed observation rows.
  Eigen::MatrixXd covariance(std::span<const Index> rows) const;

 private:
  void factor();

  Eigen::MatrixXd x_;
  std::vector<Index> subject_;
  Eigen::VectorXd w_;
  double sigma2_;
  Eigen::VectorXd inv_d_;     // 1 / D_i, zero at sigma2 == 0
  Eigen::VectorXd d_;         // D_i
  Eigen::MatrixXd b_;         // p x K, columns B_i
  Eigen::LDLT<Eigen::MatrixXd> schur_;
  bool jittered_ = false;
};

/// x'beta + b_i with b_i the fitted conditional mode of `subject_id`.
/// Throws std::out_of_range for an unknown subject.
double predicted_eta(const FittedModel& fitted, const Eigen::Ref<const Eigen::VectorXd>& x,
                     std::string_view subject_id);

/// Which random-effect estimate enters the predictor.
enum class RandomEffectEstimate {
  Mode,
  /// E(b_i | y_i) by adaptive quadrature; for checking the mode surrogate.
  PosteriorMean,
};

/// Posterior mean of every subject's random intercept at the fitted
/// parameters, by adaptive Gauss-Hermite quadrature.
std::vector<double> posterior_means(const Dataset& dataset, const FittedModel& fitted,
                                    int gh_nodes = kDefaultGhNodes);

/// Predicted linear predictors of the rows of group q.
Eigen::VectorXd group_predicted_eta(const FittedModel& fitted, const Dataset& dataset, Index q,
                                    RandomEffectEstimate which = RandomEffectEstimate::Mode);

/// Mean of g^{-1}(eta_hat) over group q.
double conditional_group_mean(const FittedModel& fitted, const Dataset& dataset, Index q,
                              RandomEffectEstimate which = RandomEffectEstimate::Mode);

/// N_q x N_q prediction covariance of the group's predicted linear
/// predictors. A subject with several rows in the group contributes one
/// column per row, all sharing its random effect.
Eigen::MatrixXd prediction_covariance(const PredictionStructure& structure,
                                      const Dataset& dataset, Index q);

/// d' C d / N_q^2 with d the inverse-link derivatives at eta_hat.
double conditional_group_variance(const FittedModel& fitted, const Dataset& dataset,
                                  const PredictionStructure& structure, Index q);

/// Benchmark predictor: mean of g^{-1}(xbar'beta + b_i) over the group,
/// xbar the group-average covariate.
double predictor_at_mean_covariate(const FittedModel& fitted, const Dataset& dataset, Index q);

/// d b_i / d beta at the fitted parameters from the implicit-function
/// theorem: -(sum_j x_ij d2_ij) / (sum_j d2_ij - 1/sigma2), with d2 the
/// observed second derivative in eta.
Eigen::VectorXd mode_beta_sensitivity(const SubjectBlock& subject, Family family,
                                      const ParamVector& params, double mode);

/// Point, variance and prediction intervals ("inverse", "direct") for group q.
GroupMeanEstimate estimate_conditional(const FittedModel& fitted, const Dataset& dataset,
                                       const PredictionStructure& structure, Index q,
                                       double alpha = kDefaultAlpha);

}  // namespace glmmgm
