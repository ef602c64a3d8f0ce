#include "glmmgm/conditional_means.hpp"

#include "glmmgm/family.hpp"

#include <cmath>
#include <stdexcept>

namespace glmmgm {

namespace {

ResponseModel make_response(const FittedModel& fitted) {
  return fitted.family == Family::NegBinomial ? ResponseModel(fitted.family, *fitted.params.kappa)
                                              : ResponseModel(fitted.family);
}

void check_fitted(const Dataset& dataset, const FittedModel& fitted) {
  if (static_cast<Index>(fitted.cond_modes.size()) != dataset.num_subjects())
    throw std::invalid_argument("fitted model does not match the dataset");
}

}  // namespace

PredictionStructure::PredictionStructure(const Dataset& dataset, const FittedModel& fitted)
    : x_(dataset.stacked_x()), sigma2_(fitted.params.sigma2) {
  check_fitted(dataset, fitted);
  const ResponseModel model = make_response(fitted);
  const Index n = dataset.num_obs();
  subject_.resize(static_cast<std::size_t>(n));
  w_.resize(n);
  const Eigen::VectorXd eta0 = x_ * fitted.params.beta;
  const Eigen::VectorXd w = dataset.stacked_w();
  for (Index r = 0; r < n; ++r) {
    const Index i = dataset.subject_of(r);
    subject_[static_cast<std::size_t>(r)] = i;
    w_(r) = model.iterative_weight(eta0(r) + fitted.cond_modes[static_cast<std::size_t>(i)], w(r));
  }
  d_.resize(dataset.num_subjects());
  factor();
}

PredictionStructure::PredictionStructure(Eigen::MatrixXd x, std::vector<Index> subject_of_obs,
                                         Eigen::VectorXd weights, double sigma2)
    : x_(std::move(x)), subject_(std::move(subject_of_obs)), w_(std::move(weights)),
      sigma2_(sigma2) {
  if (static_cast<Index>(subject_.size()) != x_.rows() || w_.size() != x_.rows())
    throw std::invalid_argument("PredictionStructure: dimension mismatch");
  if (!(sigma2_ >= 0.0)) throw std::invalid_argument("PredictionStructure: sigma2 must be >= 0");
  Index k = 0;
  for (Index i : subject_) {
    if (i < 0) throw std::invalid_argument("PredictionStructure: negative subject index");
    k = std::max(k, i + 1);
  }
  d_.resize(k);
  factor();
}

void PredictionStructure::factor() {
  const Index p = x_.cols();
  const Index k = d_.size();
  b_.setZero(p, k);
  d_.setZero();
  Eigen::MatrixXd xtwx = Eigen::MatrixXd::Zero(p, p);
  for (Index r = 0; r < x_.rows(); ++r) {
    const Index i = subject_[static_cast<std::size_t>(r)];
    b_.col(i) += w_(r) * x_.row(r).transpose();
    d_(i) += w_(r);
    xtwx.noalias() += w_(r) * x_.row(r).transpose() * x_.row(r);
  }
  inv_d_.setZero(k);
  Eigen::MatrixXd schur = xtwx;
  if (sigma2_ > 0.0) {
    d_.array() += 1.0 / sigma2_;
    inv_d_ = d_.cwiseInverse();
    for (Index i = 0; i < k; ++i) schur.noalias() -= inv_d_(i) * b_.col(i) * b_.col(i).transpose();
  }
  schur = 0.5 * (schur + schur.transpose());
  schur_.compute(schur);
  if (schur_.info() != Eigen::Success || !schur_.isPositive()) {
    jittered_ = true;
    schur_.compute(schur + 1e-10 * Eigen::MatrixXd::Identity(p, p));
  }
}

Eigen::MatrixXd PredictionStructure::dense_z() const {
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(x_.rows(), d_.size());
  for (Index r = 0; r < x_.rows(); ++r) z(r, subject_[static_cast<std::size_t>(r)]) = 1.0;
  return z;
}

Eigen::MatrixXd PredictionStructure::covariance(std::span<const Index> rows) const {
  const auto n = static_cast<Index>(rows.size());
  Eigen::MatrixXd v(x_.cols(), n);
  for (Index a = 0; a < n; ++a) {
    const Index r = rows[static_cast<std::size_t>(a)];
    if (r < 0 || r >= x_.rows()) throw std::out_of_range("PredictionStructure: row out of range");
    const Index i = subject_[static_cast<std::size_t>(r)];
    v.col(a) = x_.row(r).transpose() - inv_d_(i) * b_.col(i);
  }
  Eigen::MatrixXd c = v.transpose() * schur_.solve(v);
  for (Index a = 0; a < n; ++a)
    for (Index b = 0; b < n; ++b)
      if (subject_[static_cast<std::size_t>(rows[static_cast<std::size_t>(a)])] ==
          subject_[static_cast<std::size_t>(rows[static_cast<std::size_t>(b)])])
        c(a, b) += inv_d_(subject_[static_cast<std::size_t>(rows[static_cast<std::size_t>(a)])]);
  return 0.5 * (c + c.transpose());
}

double predicted_eta(const FittedModel& fitted, const Eigen::Ref<const Eigen::VectorXd>& x,
                     std::string_view subject_id) {
  const auto i = fitted.find_subject(subject_id);
  if (!i) throw std::out_of_range("unknown subject " + std::string(subject_id));
  return linear_predictor(fitted.params, x, fitted.cond_modes[static_cast<std::size_t>(*i)]);
}

std::vector<double> posterior_means(const Dataset& dataset, const FittedModel& fitted,
                                    int gh_nodes) {
  check_fitted(dataset, fitted);
  const ResponseModel model = make_response(fitted);
  const GHRule rule = gh_rule(gh_nodes);
  const double s2 = fitted.params.sigma2;
  std::vector<double> out(static_cast<std::size_t>(dataset.num_subjects()), 0.0);
  if (s2 == 0.0) return out;
  std::vector<double> log_terms, points;
  for (Index i = 0; i < dataset.num_subjects(); ++i) {
    const auto& s = dataset.subject(i);
    const Eigen::VectorXd eta0 = s.x * fitted.params.beta;
    auto g = [&](double u) {
      double v = -0.5 * u * u / s2;
      for (Index j = 0; j < s.size(); ++j) v += model.kernel(s.y(j), eta0(j) + u, s.w(j));
      return v;
    };
    const auto ui = static_cast<std::size_t>(i);
    const double scale = 1.0 / std::sqrt(fitted.cond_curvatures[ui]);
    adaptive_log_integral(g, fitted.cond_modes[ui], scale, rule, log_terms, points, std::sqrt(s2));
    double mx = -std::numeric_limits<double>::infinity();
    for (double t : log_terms) mx = std::max(mx, t);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < log_terms.size(); ++k) {
      const double e = std::exp(log_terms[k] - mx);
      num += e * points[k];
      den += e;
    }
    out[ui] = num / den;
  }
  return out;
}

Eigen::VectorXd group_predicted_eta(const FittedModel& fitted, const Dataset& dataset, Index q,
                                    RandomEffectEstimate which) {
  check_fitted(dataset, fitted);
  const auto members = dataset.groups().members(q);
  if (members.empty()) throw std::invalid_argument("group is empty");
  const std::vector<double> b =
      which == RandomEffectEstimate::Mode ? fitted.cond_modes : posterior_means(dataset, fitted);
  Eigen::VectorXd eta(static_cast<Index>(members.size()));
  for (std::size_t r = 0; r < members.size(); ++r) {
    const Index obs = members[r];
    eta(static_cast<Index>(r)) =
        dataset.x_row(obs).dot(fitted.params.beta) +
        b[static_cast<std::size_t>(dataset.subject_of(obs))];
  }
  return eta;
}

double conditional_group_mean(const FittedModel& fitted, const Dataset& dataset, Index q,
                              RandomEffectEstimate which) {
  const Eigen::VectorXd eta = group_predicted_eta(fitted, dataset, q, which);
  double sum = 0.0;
  for (Index r = 0; r < eta.size(); ++r) sum += inverse_link(fitted.family, eta(r));
  return sum / static_cast<double>(eta.size());
}

Eigen::MatrixXd prediction_covariance(const PredictionStructure& structure,
                                      const Dataset& dataset, Index q) {
  const auto members = dataset.groups().members(q);
  if (members.empty()) throw std::invalid_argument("group is empty");
  return structure.covariance(members);
}

double conditional_group_variance(const FittedModel& fitted, const Dataset& dataset,
                                  const PredictionStructure& structure, Index q) {
  const Eigen::VectorXd eta = group_predicted_eta(fitted, dataset, q);
  Eigen::VectorXd d(eta.size());
  for (Index r = 0; r < eta.size(); ++r) d(r) = inverse_link_derivative(fitted.family, eta(r));
  const Eigen::MatrixXd c = prediction_covariance(structure, dataset, q);
  const double n = static_cast<double>(eta.size());
  return std::max(0.0, d.dot(c * d) / (n * n));
}

double predictor_at_mean_covariate(const FittedModel& fitted, const Dataset& dataset, Index q) {
  check_fitted(dataset, fitted);
  const Eigen::MatrixXd xq = group_design(dataset, q);
  if (xq.rows() == 0) throw std::invalid_argument("group is empty");
  const double eta_bar = xq.colwise().mean().dot(fitted.params.beta.transpose());
  const auto members = dataset.groups().members(q);
  double sum = 0.0;
  for (Index obs : members)
    sum += inverse_link(fitted.family,
                        eta_bar + fitted.cond_modes[static_cast<std::size_t>(dataset.subject_of(obs))]);
  return sum / static_cast<double>(members.size());
}

Eigen::VectorXd mode_beta_sensitivity(const SubjectBlock& subject, Family family,
                                      const ParamVector& params, double mode) {
  params.check(family);
  const Index p = params.beta.size();
  if (params.sigma2 == 0.0) return Eigen::VectorXd::Zero(p);
  const ResponseModel model = family == Family::NegBinomial ? ResponseModel(family, *params.kappa)
                                                            : ResponseModel(family);
  const Eigen::VectorXd eta0 = subject.x * params.beta;
  Eigen::VectorXd cross = Eigen::VectorXd::Zero(p);
  double curvature = 1.0 / params.sigma2;
  for (Index j = 0; j < subject.size(); ++j) {
    const double h = -model.derivatives(subject.y(j), eta0(j) + mode, subject.w(j)).d2;
    cross += h * subject.x.row(j).transpose();
    curvature += h;
  }
  return -cross / curvature;
}

GroupMeanEstimate estimate_conditional(const FittedModel& fitted, const Dataset& dataset,
                                       const PredictionStructure& structure, Index q,
                                       double alpha) {
  GroupMeanEstimate est;
  est.group_id = dataset.groups().label(q);
  est.kind = EstimateKind::Conditional;
  est.n = dataset.groups().size(q);
  est.point = conditional_group_mean(fitted, dataset, q);
  est.variance = conditional_group_variance(fitted, dataset, structure, q);
  est.intervals.push_back({"inverse", pi_inverse(est.point, est.variance, alpha, fitted.family)});
  est.intervals.push_back({"direct", pi_direct(est.point, est.variance, alpha)});
  return est;
}

}  // namespace glmmgm
