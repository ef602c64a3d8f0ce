#pragma once

#include "glmmgm/family.hpp"
#include "glmmgm/model.hpp"
#include "glmmgm/quadrature.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace glmmgm {

enum class Optimizer { FisherScoring, QuasiNewtonFallback };

std::string_view to_string(Optimizer optimizer);

struct FitConfig {
  int max_iter = 200;
  double param_tol = 1e-8;
  double loglik_tol = 1e-10;
  double mode_tol = 1e-10;
  int gh_nodes = kDefaultGhNodes;
  /// FisherScoring starts with empirical Fisher scoring and switches to
  /// BFGS only when the information matrix is ill-conditioned;
  /// QuasiNewtonFallback runs BFGS from the start.
  Optimizer optimizer = Optimizer::FisherScoring;

  void check() const;
};

/// Maximiser of l_i(b) = sum_j log f(y_ij | x_ij'beta + b) - b^2 / (2 sigma2)
/// and the curvature -l_i''(b) at that point.
struct ConditionalMode {
  double mode = 0.0;
  double curvature = 0.0;
  int iterations = 0;
  bool used_bisection = false;
};

/// Safeguarded Newton on l_i'(b) = 0; after 50 Newton steps falls back to
/// bisection on a bracketing interval. sigma2 == 0 yields mode 0 and infinite
/// curvature.
ConditionalMode conditional_mode(const SubjectBlock& subject, Family family,
                                 const ParamVector& params, double mode_tol = 1e-10);

/// Generic form used by conditional_mode: `terms(b)` must return the sum over
/// the subject's observations of the log-density derivatives in eta at
/// eta_j = offset_j + b (value, d1, d2). The Gaussian prior on b is added
/// here.
template <class Terms>
ConditionalMode solve_conditional_mode(Terms&& terms, double sigma2, double start,
                                       double mode_tol);

/// Marginal log-likelihood with the random intercept integrated out by
/// adaptive Gauss-Hermite quadrature centred at each subject's conditional
/// mode.
double marginal_loglik(const Dataset& dataset, const ModelSpec& spec, const ParamVector& params,
                       int gh_nodes = kDefaultGhNodes);

/// Unconstrained coordinates used by the optimiser: (beta, log sigma2,
/// [log kappa]).
Eigen::VectorXd to_unconstrained(const ParamVector& params, Family family);
ParamVector from_unconstrained(const Eigen::Ref<const Eigen::VectorXd>& theta, Family family,
                               Index p);

/// Per-subject scores of the marginal log-likelihood with respect to the
/// unconstrained coordinates, obtained by differentiating through the
/// quadrature with the nodes held fixed.
struct SubjectScores {
  double loglik = 0.0;
  Eigen::MatrixXd scores;  // K x dim(theta)
  std::vector<double> modes;
  std::vector<double> curvatures;

  Eigen::VectorXd total() const { return scores.colwise().sum().transpose(); }
  Eigen::MatrixXd empirical_information() const { return scores.transpose() * scores; }
};

SubjectScores subject_scores(const Dataset& dataset, const ModelSpec& spec,
                             const ParamVector& params, int gh_nodes = kDefaultGhNodes);

struct FitDiagnostics {
  bool singular_information = false;
  double information_condition = 0.0;
  double score_norm = 0.0;
  bool sigma2_at_boundary = false;
  bool kappa_at_boundary = false;
  bool newton_polish = false;
  Optimizer optimizer_used = Optimizer::FisherScoring;
  std::vector<std::string> notes;
};

struct FittedModel {
  Family family = Family::Logistic;
  ParamVector params;
  /// Covariance of (beta, sigma2, [kappa]) on the natural scale.
  Eigen::MatrixXd cov_psi;
  std::vector<std::string> subject_ids;
  std::vector<double> cond_modes;
  std::vector<double> cond_curvatures;
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  FitDiagnostics diagnostics;

  Index p() const { return params.beta.size(); }
  /// Covariance of (beta, sigma2); kappa's row and column removed.
  Eigen::MatrixXd cov_beta_sigma2() const { return cov_psi.topLeftCorner(p() + 1, p() + 1); }
  /// sqrt(diag(cov_psi)).
  Eigen::VectorXd standard_errors() const;
  std::optional<Index> find_subject(std::string_view id) const;
};

/// Maximum marginal likelihood by empirical Fisher scoring (BHHH) with
/// step-halving, finished by Newton steps on a differenced score once the
/// iterates settle. The covariance is the inverse of H = sum_i d_i d_i'
/// mapped back to the natural scale.
///
/// Throws std::invalid_argument when the dataset fails validate().
FittedModel fit(const Dataset& dataset, const ModelSpec& spec, const FitConfig& config = {});

/// Ordinary GLM fit (no random effect) by iteratively reweighted least
/// squares; for NegBinomial the Poisson fit is used for beta and kappa comes
/// from the Pearson moment estimate. Used for starting values.
struct GlmStart {
  Eigen::VectorXd beta;
  double kappa = 0.0;
};
GlmStart glm_start(const Dataset& dataset, Family family);

// ---------------------------------------------------------------------------

template <class Terms>
ConditionalMode solve_conditional_mode(Terms&& terms, double sigma2, double start,
                                       double mode_tol) {
  ConditionalMode out;
  if (sigma2 == 0.0) {
    out.mode = 0.0;
    out.curvature = std::numeric_limits<double>::infinity();
    return out;
  }
  const double inv_s2 = 1.0 / sigma2;
  auto eval = [&](double b) {
    EtaDerivatives t = terms(b);
    t.value -= 0.5 * b * b * inv_s2;
    t.d1 -= b * inv_s2;
    t.d2 -= inv_s2;
    return t;
  };

  double b = start;
  EtaDerivatives cur = eval(b);
  bool converged = std::abs(cur.d1) <= mode_tol;
  constexpr int kMaxNewton = 50;
  while (!converged && out.iterations < kMaxNewton) {
    ++out.iterations;
    double step = -cur.d1 / cur.d2;
    if (!std::isfinite(step)) break;
    EtaDerivatives next = eval(b + step);
    int halvings = 0;
    // Changes below rounding in the value cannot be ranked; near a sharp
    // mode (tiny sigma2) the full Newton step must still be taken.
    const double slack = 1e-14 * (1.0 + std::abs(cur.value));
    while (!(next.value >= cur.value - slack) && halvings < 60) {
      step *= 0.5;
      next = eval(b + step);
      ++halvings;
    }
    b += step;
    cur = next;
    converged = std::abs(cur.d1) <= mode_tol ||
                std::abs(step) <= 1e-15 * (1.0 + std::abs(b));
  }

  if (!converged) {
    // l_i' is strictly decreasing: bracket the root and bisect.
    out.used_bisection = true;
    double lo = b, hi = b, width = 1.0;
    while (eval(lo).d1 < 0.0) lo -= (width *= 2.0);
    width = 1.0;
    while (eval(hi).d1 > 0.0) hi += (width *= 2.0);
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++it) {
      const double mid = 0.5 * (lo + hi);
      const double d = eval(mid).d1;
      if (std::abs(d) <= mode_tol) {
        lo = hi = mid;
        break;
      }
      (d > 0.0 ? lo : hi) = mid;
    }
    b = 0.5 * (lo + hi);
    cur = eval(b);
  }
  out.mode = b;
  out.curvature = -cur.d2;
  return out;
}

}  // namespace glmmgm
