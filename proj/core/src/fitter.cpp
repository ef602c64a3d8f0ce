#include "glmmgm/fitter.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace glmmgm {

std::string_view to_string(Optimizer optimizer) {
  return optimizer == Optimizer::FisherScoring ? "fisher-scoring" : "quasi-newton";
}

void FitConfig::check() const {
  if (max_iter < 1) throw std::invalid_argument("FitConfig: max_iter must be >= 1");
  if (!(param_tol > 0.0) || !(loglik_tol > 0.0) || !(mode_tol > 0.0))
    throw std::invalid_argument("FitConfig: tolerances must be > 0");
  if (gh_nodes < 1) throw std::invalid_argument("FitConfig: gh_nodes must be >= 1");
}

Eigen::VectorXd FittedModel::standard_errors() const {
  return cov_psi.diagonal().cwiseMax(0.0).cwiseSqrt();
}

std::optional<Index> FittedModel::find_subject(std::string_view id) const {
  auto it = std::find(subject_ids.begin(), subject_ids.end(), id);
  if (it == subject_ids.end()) return std::nullopt;
  return static_cast<Index>(it - subject_ids.begin());
}

namespace {

// Box on the unconstrained variance coordinates. The lower sigma2 bound
// stands in for the sigma2 = 0 boundary, the upper one for sigma2 -> inf
// (with a single binary response per subject the logistic-normal model
// approaches the probit model there and the profile likelihood is flat);
// the upper kappa bound stands in for the Poisson limit.
constexpr double kLogSigma2Min = -18.420680743952367;  // log(1e-8)
constexpr double kLogSigma2Max = 4.605170185988092;    // log(1e2)
constexpr double kLogKappaMin = -4.605170185988091;    // log(1e-2)
constexpr double kLogKappaMax = 9.210340371976184;     // log(1e4)
constexpr double kConditionLimit = 1e12;

ResponseModel make_response(Family family, const ParamVector& params) {
  return family == Family::NegBinomial ? ResponseModel(family, *params.kappa)
                                       : ResponseModel(family);
}

Index theta_dim(Family family, Index p) { return p + 1 + (family == Family::NegBinomial ? 1 : 0); }

// Scratch buffers reused across subjects.
struct Workspace {
  Eigen::VectorXd eta0;
  std::vector<double> log_terms;
  std::vector<double> points;
};

struct SubjectTerm {
  double loglik = 0.0;
  ConditionalMode mode;
};

// Log marginal likelihood contribution of one subject and, if `score` is
// non-null, its gradient with respect to (beta, log sigma2, [log kappa]).
SubjectTerm evaluate_subject(const SubjectBlock& s, const ResponseModel& model,
                             const ParamVector& params, const GHRule& rule, double mode_start,
                             double mode_tol, Workspace& ws, double* score) {
  const Index n = s.size();
  const Index p = params.beta.size();
  const bool nb = model.family() == Family::NegBinomial;
  ws.eta0.noalias() = s.x * params.beta;

  double constant = 0.0;
  for (Index j = 0; j < n; ++j) constant += model.constant(s.y(j), s.w(j));

  SubjectTerm out;
  const double sigma2 = params.sigma2;
  if (sigma2 == 0.0) {
    out.mode.curvature = std::numeric_limits<double>::infinity();
    out.loglik = constant;
    if (score) std::fill(score, score + theta_dim(model.family(), p), 0.0);
    for (Index j = 0; j < n; ++j) {
      const auto d = model.derivatives(s.y(j), ws.eta0(j), s.w(j));
      out.loglik += d.value;
      if (score) {
        for (Index c = 0; c < p; ++c) score[c] += s.x(j, c) * d.d1;
      }
    }
    if (score && nb) {
      double dk = 0.0;
      for (Index j = 0; j < n; ++j)
        dk += model.dkappa_constant(s.y(j), s.w(j)) +
              model.dkappa_kernel(s.y(j), ws.eta0(j), s.w(j));
      score[p + 1] = model.kappa() * dk;
    }
    return out;
  }

  auto terms = [&](double b) {
    EtaDerivatives t;
    for (Index j = 0; j < n; ++j) {
      const auto d = model.derivatives(s.y(j), ws.eta0(j) + b, s.w(j));
      t.value += d.value;
      t.d1 += d.d1;
      t.d2 += d.d2;
    }
    return t;
  };
  out.mode = solve_conditional_mode(terms, sigma2, mode_start, mode_tol);

  const double inv_2s2 = 0.5 / sigma2;
  auto log_integrand = [&](double u) {
    double v = -u * u * inv_2s2;
    for (Index j = 0; j < n; ++j) v += model.kernel(s.y(j), ws.eta0(j) + u, s.w(j));
    return v;
  };
  const double scale = 1.0 / std::sqrt(out.mode.curvature);
  const double log_int =
      adaptive_log_integral(log_integrand, out.mode.mode, scale, rule, ws.log_terms, ws.points,
                            std::sqrt(sigma2));
  out.loglik = log_int - 0.5 * std::log(2.0 * std::numbers::pi * sigma2) + constant;

  if (score) {
    const Index q = theta_dim(model.family(), p);
    std::fill(score, score + q, 0.0);
    const double lse = log_int - std::log(std::numbers::sqrt2 * scale);
    double d_tau = -0.5;
    double d_kappa = 0.0;
    if (nb)
      for (Index j = 0; j < n; ++j) d_kappa += model.dkappa_constant(s.y(j), s.w(j));
    for (std::size_t k = 0; k < ws.log_terms.size(); ++k) {
      const double post = std::exp(ws.log_terms[k] - lse);
      if (post < 1e-300) continue;
      const double u = ws.points[k];
      d_tau += post * u * u * inv_2s2;
      for (Index j = 0; j < n; ++j) {
        const double eta = ws.eta0(j) + u;
        const double d1 = model.derivatives(s.y(j), eta, s.w(j)).d1;
        for (Index c = 0; c < p; ++c) score[c] += post * d1 * s.x(j, c);
        if (nb) d_kappa += post * model.dkappa_kernel(s.y(j), eta, s.w(j));
      }
    }
    score[p] = d_tau;
    if (nb) score[p + 1] = model.kappa() * d_kappa;
  }
  return out;
}

class MarginalObjective {
 public:
  MarginalObjective(const Dataset& data, Family family, int gh_nodes, double mode_tol)
      : data_(data), family_(family), rule_(gh_nodes == kDefaultGhNodes ? default_gh_rule()
                                                                         : gh_rule(gh_nodes)),
        mode_tol_(mode_tol) {}

  // Evaluates at `params`; warm-starts the mode search from `modes` and
  // overwrites them with the new modes.
  SubjectScores evaluate(const ParamVector& params, bool with_scores,
                         std::vector<double>& modes) const {
    const ResponseModel model = make_response(family_, params);
    const Index k = data_.num_subjects();
    const Index q = theta_dim(family_, params.beta.size());
    SubjectScores out;
    if (with_scores) out.scores.setZero(k, q);
    out.modes.resize(static_cast<std::size_t>(k));
    out.curvatures.resize(static_cast<std::size_t>(k));
    if (static_cast<Index>(modes.size()) != k) modes.assign(static_cast<std::size_t>(k), 0.0);
    Workspace ws;
    Eigen::VectorXd row(q);
    for (Index i = 0; i < k; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const SubjectTerm t = evaluate_subject(data_.subject(i), model, params, rule_, modes[ui],
                                             mode_tol_, ws, with_scores ? row.data() : nullptr);
      out.loglik += t.loglik;
      out.modes[ui] = t.mode.mode;
      out.curvatures[ui] = t.mode.curvature;
      if (with_scores) out.scores.row(i) = row.transpose();
    }
    modes = out.modes;
    return out;
  }

 private:
  const Dataset& data_;
  Family family_;
  GHRule rule_;
  double mode_tol_;
};

void check_inputs(const Dataset& dataset, const ModelSpec& spec, const ParamVector& params) {
  params.check(spec.family);
  if (params.beta.size() != dataset.num_covariates())
    throw std::invalid_argument("beta length does not match the number of covariates");
}

// Eigen-based inverse on the subspace with eigenvalues above
// rel_tol * largest; reports the condition number.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& h, double rel_tol, double& condition,
                               bool& singular) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (h + h.transpose()));
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double vmax = ev.size() ? ev.maxCoeff() : 0.0;
  const double vmin = ev.size() ? ev.minCoeff() : 0.0;
  condition = vmin > 0.0 ? vmax / vmin : std::numeric_limits<double>::infinity();
  singular = !(condition <= 1.0 / rel_tol);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
  for (Index k = 0; k < ev.size(); ++k)
    if (ev(k) > rel_tol * vmax) inv(k) = 1.0 / ev(k);
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

ConditionalMode conditional_mode(const SubjectBlock& subject, Family family,
                                 const ParamVector& params, double mode_tol) {
  params.check(family);
  if (subject.x.cols() != params.beta.size())
    throw std::invalid_argument("conditional_mode: covariate dimension mismatch");
  const ResponseModel model = make_response(family, params);
  const Eigen::VectorXd eta0 = subject.x * params.beta;
  auto terms = [&](double b) {
    EtaDerivatives t;
    for (Index j = 0; j < subject.size(); ++j) {
      const auto d = model.derivatives(subject.y(j), eta0(j) + b, subject.w(j));
      t.value += d.value;
      t.d1 += d.d1;
      t.d2 += d.d2;
    }
    return t;
  };
  return solve_conditional_mode(terms, params.sigma2, 0.0, mode_tol);
}

double marginal_loglik(const Dataset& dataset, const ModelSpec& spec, const ParamVector& params,
                       int gh_nodes) {
  check_inputs(dataset, spec, params);
  MarginalObjective objective(dataset, spec.family, gh_nodes, 1e-10);
  std::vector<double> modes;
  const double value = objective.evaluate(params, false, modes).loglik;
  if (!std::isfinite(value)) throw std::domain_error("marginal_loglik: non-finite integrand");
  return value;
}

SubjectScores subject_scores(const Dataset& dataset, const ModelSpec& spec,
                             const ParamVector& params, int gh_nodes) {
  check_inputs(dataset, spec, params);
  MarginalObjective objective(dataset, spec.family, gh_nodes, 1e-10);
  std::vector<double> modes;
  return objective.evaluate(params, true, modes);
}

Eigen::VectorXd to_unconstrained(const ParamVector& params, Family family) {
  const Index p = params.beta.size();
  Eigen::VectorXd theta(theta_dim(family, p));
  theta.head(p) = params.beta;
  theta(p) = std::log(params.sigma2);
  if (family == Family::NegBinomial) theta(p + 1) = std::log(*params.kappa);
  return theta;
}

ParamVector from_unconstrained(const Eigen::Ref<const Eigen::VectorXd>& theta, Family family,
                               Index p) {
  ParamVector params;
  params.beta = theta.head(p);
  params.sigma2 = std::exp(theta(p));
  if (family == Family::NegBinomial) params.kappa = std::exp(theta(p + 1));
  return params;
}

GlmStart glm_start(const Dataset& dataset, Family family) {
  const Eigen::MatrixXd x = dataset.stacked_x();
  const Eigen::VectorXd y = dataset.stacked_y();
  const Eigen::VectorXd w = dataset.stacked_w();
  const Index n = x.rows();
  GlmStart out;

  // IRLS for the canonical logistic / Poisson model.
  Eigen::VectorXd mu(n), eta(n);
  for (Index i = 0; i < n; ++i) {
    mu(i) = family == Family::Logistic ? (y(i) + 0.5) / 2.0 : y(i) + 0.5;
    eta(i) = family == Family::Logistic ? std::log(mu(i) / (1.0 - mu(i))) : std::log(mu(i));
  }
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
  for (int it = 0; it < 50; ++it) {
    Eigen::VectorXd wt(n), z(n);
    for (Index i = 0; i < n; ++i) {
      const double var = family == Family::Logistic ? mu(i) * (1.0 - mu(i)) : mu(i);
      wt(i) = w(i) * std::max(var, 1e-12);
      z(i) = eta(i) + (y(i) - mu(i)) / std::max(var, 1e-12);
    }
    const Eigen::MatrixXd xtwx = x.transpose() * wt.asDiagonal() * x;
    const Eigen::VectorXd next = xtwx.ldlt().solve(x.transpose() * wt.cwiseProduct(z));
    if (!next.allFinite()) break;
    const double change = (next - beta).lpNorm<Eigen::Infinity>();
    beta = next.cwiseMax(-30.0).cwiseMin(30.0);
    eta = x * beta;
    for (Index i = 0; i < n; ++i) mu(i) = inverse_link(family == Family::Logistic
                                                          ? Family::Logistic
                                                          : Family::NegBinomial,
                                                      eta(i));
    if (change < 1e-10) break;
  }
  out.beta = beta;
  if (family == Family::NegBinomial) {
    double num = 0.0, den = 0.0;
    for (Index i = 0; i < n; ++i) {
      num += w(i) * ((y(i) - mu(i)) * (y(i) - mu(i)) - mu(i));
      den += w(i) * mu(i) * mu(i);
    }
    const double inv_kappa = den > 0.0 ? num / den : 0.0;
    out.kappa = inv_kappa > 1e-4 ? std::clamp(1.0 / inv_kappa, 0.1, 1e4) : 1e4;
  }
  return out;
}

FittedModel fit(const Dataset& dataset, const ModelSpec& spec, const FitConfig& config) {
  config.check();
  if (const auto report = validate(dataset, spec); !report.ok()) {
    const auto& v = report.violations.front();
    throw std::invalid_argument("invalid dataset (" + v.code + "): " + v.message);
  }
  const Family family = spec.family;
  const Index p = dataset.num_covariates();
  const Index q = theta_dim(family, p);
  const MarginalObjective objective(dataset, family, config.gh_nodes, config.mode_tol);

  const GlmStart start = glm_start(dataset, family);
  ParamVector init;
  init.beta = start.beta;
  init.sigma2 = 0.1;
  if (family == Family::NegBinomial) init.kappa = start.kappa;
  Eigen::VectorXd theta = to_unconstrained(init, family);

  Eigen::VectorXd lower = Eigen::VectorXd::Constant(q, -std::numeric_limits<double>::infinity());
  Eigen::VectorXd upper = Eigen::VectorXd::Constant(q, std::numeric_limits<double>::infinity());
  lower(p) = kLogSigma2Min;
  upper(p) = kLogSigma2Max;
  if (family == Family::NegBinomial) {
    lower(p + 1) = kLogKappaMin;
    upper(p + 1) = kLogKappaMax;
    theta(p + 1) = std::clamp(theta(p + 1), lower(p + 1), upper(p + 1));
  }
  auto clamp_box = [&](Eigen::VectorXd v) { return v.cwiseMax(lower).cwiseMin(upper); };

  std::vector<double> modes;
  auto evaluate = [&](const Eigen::VectorXd& th, bool with_scores) {
    return objective.evaluate(from_unconstrained(th, family, p), with_scores, modes);
  };
  SubjectScores current = evaluate(theta, true);
  if (!std::isfinite(current.loglik))
    throw std::domain_error("fit: marginal log-likelihood is not finite at the starting values");

  FittedModel out;
  out.family = family;
  auto& diag = out.diagnostics;
  diag.optimizer_used = config.optimizer;
  diag.notes.emplace_back(
      "random-effect log-density uses the Gaussian kernel -b^2/(2 sigma2)");

  // Coordinates pinned at a bound with the gradient pushing outward.
  auto free_mask = [&](const Eigen::VectorXd& th, const Eigen::VectorXd& g) {
    std::vector<Index> idx;
    for (Index c = 0; c < q; ++c) {
      const bool pinned_low = th(c) <= lower(c) && g(c) <= 0.0;
      const bool pinned_high = th(c) >= upper(c) && g(c) >= 0.0;
      if (!(pinned_low || pinned_high)) idx.push_back(c);
    }
    return idx;
  };
  auto restrict = [](const Eigen::VectorXd& v, const std::vector<Index>& idx) {
    Eigen::VectorXd r(static_cast<Index>(idx.size()));
    for (std::size_t a = 0; a < idx.size(); ++a) r(static_cast<Index>(a)) = v(idx[a]);
    return r;
  };
  auto restrict_sq = [](const Eigen::MatrixXd& m, const std::vector<Index>& idx) {
    const auto n = static_cast<Index>(idx.size());
    Eigen::MatrixXd r(n, n);
    for (Index a = 0; a < n; ++a)
      for (Index b = 0; b < n; ++b)
        r(a, b) = m(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
    return r;
  };

  // Newton Hessian of the log-likelihood from central differences of the
  // analytic score.
  auto numeric_hessian = [&](const Eigen::VectorXd& th) {
    Eigen::MatrixXd hess(q, q);
    std::vector<double> saved = modes;
    for (Index c = 0; c < q; ++c) {
      const double h = 1e-5 * (1.0 + std::abs(th(c)));
      Eigen::VectorXd tp = th, tm = th;
      tp(c) += h;
      tm(c) -= h;
      const Eigen::VectorXd gp = evaluate(tp, true).total();
      const Eigen::VectorXd gm = evaluate(tm, true).total();
      hess.col(c) = (gp - gm) / (2.0 * h);
    }
    modes = saved;
    return Eigen::MatrixXd(0.5 * (hess + hess.transpose()));
  };

  bool use_bfgs = config.optimizer == Optimizer::QuasiNewtonFallback;
  if (use_bfgs) diag.optimizer_used = Optimizer::QuasiNewtonFallback;
  Eigen::MatrixXd bfgs_inv;  // inverse Hessian approximation of -loglik on free coords
  std::vector<Index> bfgs_idx;
  bool settled = false;
  bool damped = false;  // last scoring step was cut hard by the line search
  int iter = 0;
  bool converged = false;
  Eigen::VectorXd g = current.total();

  for (; iter < config.max_iter; ++iter) {
    const std::vector<Index> idx = free_mask(theta, g);
    const Eigen::VectorXd gf = restrict(g, idx);
    if (gf.norm() <= config.param_tol) {
      converged = true;
      break;
    }

    Eigen::VectorXd dir_f;
    bool newton_step = false;
    if (settled || damped) {
      const Eigen::MatrixXd hf = restrict_sq(numeric_hessian(theta), idx);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(-hf);
      if (ldlt.info() == Eigen::Success && ldlt.isPositive() &&
          (ldlt.vectorD().array() > 0.0).all()) {
        dir_f = ldlt.solve(gf);
        newton_step = dir_f.allFinite();
        diag.newton_polish = diag.newton_polish || newton_step;
      }
    }
    if (!newton_step && !use_bfgs) {
      const Eigen::MatrixXd hf = restrict_sq(current.empirical_information(), idx);
      double cond = 0.0;
      bool singular = false;
      const Eigen::MatrixXd hinv = pseudo_inverse(hf, 1.0 / kConditionLimit, cond, singular);
      diag.information_condition = cond;
      if (singular) {
        use_bfgs = true;
        diag.optimizer_used = Optimizer::QuasiNewtonFallback;
        diag.notes.emplace_back("empirical information ill-conditioned; switched to BFGS");
      } else {
        dir_f = hinv * gf;
      }
    }
    if (use_bfgs && !newton_step) {
      if (bfgs_idx != idx || bfgs_inv.rows() != static_cast<Index>(idx.size())) {
        const Eigen::MatrixXd hf = restrict_sq(current.empirical_information(), idx);
        const double ridge = 1e-8 * std::max(1.0, hf.trace() / std::max<Index>(1, hf.rows()));
        bfgs_inv = (hf + ridge * Eigen::MatrixXd::Identity(hf.rows(), hf.cols()))
                       .ldlt()
                       .solve(Eigen::MatrixXd::Identity(hf.rows(), hf.cols()));
        bfgs_idx = idx;
      }
      dir_f = bfgs_inv * gf;
      if (!(dir_f.dot(gf) > 0.0)) {
        bfgs_inv = Eigen::MatrixXd::Identity(gf.size(), gf.size()) / std::max(1.0, gf.norm());
        dir_f = bfgs_inv * gf;
      }
    }

    Eigen::VectorXd dir = Eigen::VectorXd::Zero(q);
    for (std::size_t a = 0; a < idx.size(); ++a) dir(idx[a]) = dir_f(static_cast<Index>(a));

    // Step-halving line search on the marginal log-likelihood.
    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd candidate;
    SubjectScores trial;
    const double tol = 1e-13 * (1.0 + std::abs(current.loglik));
    for (int halving = 0; halving < 50; ++halving, step *= 0.5) {
      candidate = clamp_box(theta + step * dir);
      trial = evaluate(candidate, false);
      if (std::isfinite(trial.loglik) && trial.loglik >= current.loglik - tol) {
        accepted = true;
        break;
      }
    }
    const double noise = 1e-11 * (1.0 + std::abs(current.loglik));
    if (!accepted || (step < 1.0 && trial.loglik - current.loglik <= noise)) {
      // Near the optimum the remaining ascent can fall below the noise of
      // the log-likelihood (warm-started modes). Take the full step if it
      // keeps the log-likelihood within that noise and halves the score.
      const Eigen::VectorXd full_theta = clamp_box(theta + dir);
      SubjectScores full = evaluate(full_theta, true);
      if (std::isfinite(full.loglik) && full.loglik >= current.loglik - noise &&
          restrict(full.total(), idx).norm() <= 0.5 * gf.norm()) {
        candidate = full_theta;
        trial = std::move(full);
        accepted = true;
        step = 1.0;
      }
    }
    if (!accepted) {
      // No ascent possible along the direction; treat a small score as the
      // numerical optimum.
      converged = gf.norm() <= std::sqrt(config.param_tol);
      break;
    }

    const Eigen::VectorXd delta = candidate - theta;
    const double rel_step = delta.lpNorm<Eigen::Infinity>() /
                            (1.0 + theta.lpNorm<Eigen::Infinity>());
    const double dl = std::abs(trial.loglik - current.loglik);
    theta = candidate;
    SubjectScores next = evaluate(theta, true);
    const Eigen::VectorXd g_new = next.total();

    if (use_bfgs && bfgs_idx == idx && free_mask(theta, g_new) == idx) {
      const Eigen::VectorXd s = restrict(delta, idx);
      const Eigen::VectorXd yv = restrict(g, idx) - restrict(g_new, idx);
      const double sy = s.dot(yv);
      if (sy > 1e-12 * s.norm() * yv.norm()) {
        const double rho = 1.0 / sy;
        const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(s.size(), s.size());
        bfgs_inv = (eye - rho * s * yv.transpose()) * bfgs_inv * (eye - rho * yv * s.transpose()) +
                   rho * s * s.transpose();
      }
    }

    current = std::move(next);
    g = g_new;
    if (rel_step < 1e-3) settled = true;
    damped = !newton_step && step < 0.03125;
    if (rel_step <= 1e-2 * config.param_tol && dl <= config.loglik_tol * (1.0 + std::abs(current.loglik))) {
      const Eigen::VectorXd gf_new = restrict(g, free_mask(theta, g));
      converged = gf_new.norm() <= std::sqrt(config.param_tol);
      ++iter;
      break;
    }
  }

  // Final quantities at the returned iterate.
  out.params = from_unconstrained(theta, family, p);
  out.loglik = current.loglik;
  out.iterations = iter;
  out.converged = converged;
  out.cond_modes = current.modes;
  out.cond_curvatures = current.curvatures;
  out.subject_ids.reserve(static_cast<std::size_t>(dataset.num_subjects()));
  for (const auto& s : dataset.subjects()) out.subject_ids.push_back(s.id);
  diag.sigma2_at_boundary = theta(p) <= lower(p) + 1e-12 || theta(p) >= upper(p) - 1e-12;
  if (family == Family::NegBinomial) diag.kappa_at_boundary = theta(p + 1) >= upper(p + 1) - 1e-12;
  diag.score_norm = restrict(g, free_mask(theta, g)).norm();

  // A variance coordinate on its bound is treated as known: its row and
  // column of the covariance are zero and the rest comes from the
  // information of the remaining coordinates.
  std::vector<Index> interior;
  for (Index c = 0; c < q; ++c) {
    const bool at_bound = theta(c) <= lower(c) + 1e-12 || theta(c) >= upper(c) - 1e-12;
    if (!at_bound) interior.push_back(c);
  }
  if (interior.size() < static_cast<std::size_t>(q))
    diag.notes.emplace_back("variance parameter on its bound; held fixed in the covariance");
  double cond = 0.0;
  bool singular = false;
  const Eigen::MatrixXd cov_interior = pseudo_inverse(
      restrict_sq(current.empirical_information(), interior), 1.0 / kConditionLimit, cond,
      singular);
  Eigen::MatrixXd cov_theta = Eigen::MatrixXd::Zero(q, q);
  for (std::size_t a = 0; a < interior.size(); ++a)
    for (std::size_t b = 0; b < interior.size(); ++b)
      cov_theta(interior[a], interior[b]) =
          cov_interior(static_cast<Index>(a), static_cast<Index>(b));
  diag.information_condition = cond;
  diag.singular_information = singular;
  if (singular) diag.notes.emplace_back("empirical information singular; pseudo-inverse used");

  // Delta method back to (beta, sigma2, kappa): d sigma2 / d log sigma2 = sigma2.
  Eigen::VectorXd jac = Eigen::VectorXd::Ones(q);
  jac(p) = out.params.sigma2;
  if (family == Family::NegBinomial) jac(p + 1) = *out.params.kappa;
  out.cov_psi = jac.asDiagonal() * cov_theta * jac.asDiagonal();
  out.cov_psi = 0.5 * (out.cov_psi + out.cov_psi.transpose());
  return out;
}

}  // namespace glmmgm
