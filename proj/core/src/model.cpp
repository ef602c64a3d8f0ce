#include "glmmgm/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace glmmgm {

std::string_view to_string(Family family) {
  switch (family) {
    case Family::Logistic:
      return "logistic";
    case Family::NegBinomial:
      return "negbin";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  if (name == "logistic" || name == "binomial") return Family::Logistic;
  if (name == "negbin" || name == "negative-binomial" || name == "nb") return Family::NegBinomial;
  throw std::invalid_argument("unknown family '" + std::string(name) + "'");
}

GroupIndex::GroupIndex(std::vector<std::string> labels, std::vector<std::vector<Index>> members)
    : labels_(std::move(labels)), members_(std::move(members)) {
  if (labels_.size() != members_.size())
    throw std::invalid_argument("group labels and member lists differ in length");
}

std::span<const Index> GroupIndex::members(Index q) const {
  const auto& m = members_.at(static_cast<std::size_t>(q));
  return {m.data(), m.size()};
}

std::optional<Index> GroupIndex::find(std::string_view label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) return std::nullopt;
  return static_cast<Index>(it - labels_.begin());
}

Dataset::Dataset(std::vector<SubjectBlock> subjects, std::vector<std::string> group_labels,
                 std::vector<std::string> covariate_names)
    : subjects_(std::move(subjects)), covariate_names_(std::move(covariate_names)) {
  p_ = subjects_.empty() ? static_cast<Index>(covariate_names_.size()) : subjects_.front().x.cols();
  if (!covariate_names_.empty() && static_cast<Index>(covariate_names_.size()) != p_)
    throw std::invalid_argument("covariate name count does not match covariate columns");

  const auto q_count = static_cast<Index>(group_labels.size());
  std::vector<std::vector<Index>> members(group_labels.size());
  offsets_.reserve(subjects_.size());
  for (std::size_t i = 0; i < subjects_.size(); ++i) {
    auto& s = subjects_[i];
    const Index n = s.y.size();
    if (s.x.rows() != n || s.x.cols() != p_)
      throw std::invalid_argument("subject '" + s.id + "': covariate matrix has wrong shape");
    if (s.w.size() == 0) s.w = Eigen::VectorXd::Ones(n);
    if (s.w.size() != n)
      throw std::invalid_argument("subject '" + s.id + "': weight vector has wrong length");
    if (static_cast<Index>(s.group.size()) != n)
      throw std::invalid_argument("subject '" + s.id + "': group label count mismatch");
    offsets_.push_back(num_obs_);
    for (Index j = 0; j < n; ++j) {
      const Index g = s.group[static_cast<std::size_t>(j)];
      if (g < 0 || g >= q_count)
        throw std::invalid_argument("subject '" + s.id + "': group id out of range");
      members[static_cast<std::size_t>(g)].push_back(num_obs_ + j);
      obs_subject_.push_back(static_cast<Index>(i));
    }
    num_obs_ += n;
  }
  groups_ = GroupIndex(std::move(group_labels), std::move(members));
}

std::optional<Index> Dataset::find_subject(std::string_view id) const {
  for (std::size_t i = 0; i < subjects_.size(); ++i)
    if (subjects_[i].id == id) return static_cast<Index>(i);
  return std::nullopt;
}

Eigen::MatrixXd Dataset::stacked_x() const {
  Eigen::MatrixXd x(num_obs_, p_);
  for (std::size_t i = 0; i < subjects_.size(); ++i)
    x.middleRows(offsets_[i], subjects_[i].size()) = subjects_[i].x;
  return x;
}

Eigen::VectorXd Dataset::stacked_y() const {
  Eigen::VectorXd y(num_obs_);
  for (std::size_t i = 0; i < subjects_.size(); ++i)
    y.segment(offsets_[i], subjects_[i].size()) = subjects_[i].y;
  return y;
}

Eigen::VectorXd Dataset::stacked_w() const {
  Eigen::VectorXd w(num_obs_);
  for (std::size_t i = 0; i < subjects_.size(); ++i)
    w.segment(offsets_[i], subjects_[i].size()) = subjects_[i].w;
  return w;
}

Eigen::VectorXd Dataset::x_row(Index obs) const {
  const Index i = subject_of(obs);
  return subject(i).x.row(obs - offset(i)).transpose();
}

double Dataset::y_at(Index obs) const {
  const Index i = subject_of(obs);
  return subject(i).y(obs - offset(i));
}

double ParamVector::sigma() const { return std::sqrt(sigma2); }

void ParamVector::check(Family family) const {
  if (!(sigma2 >= 0.0) || !std::isfinite(sigma2))
    throw std::invalid_argument("sigma2 must be finite and >= 0");
  if (family == Family::NegBinomial) {
    if (!kappa) throw std::invalid_argument("negative-binomial parameters require kappa");
    if (!(*kappa > 0.0) || !std::isfinite(*kappa))
      throw std::invalid_argument("kappa must be finite and > 0");
  } else if (kappa) {
    throw std::invalid_argument("kappa is only defined for the negative-binomial family");
  }
}

double linear_predictor(const ParamVector& params, const Eigen::Ref<const Eigen::VectorXd>& x,
                        double b) {
  if (x.size() != params.beta.size())
    throw std::invalid_argument("covariate vector length " + std::to_string(x.size()) +
                                " does not match beta length " +
                                std::to_string(params.beta.size()));
  return x.dot(params.beta) + b;
}

double inverse_link(Family family, double eta) {
  if (family == Family::NegBinomial) return std::exp(eta);
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

double inverse_link_derivative(Family family, double eta) {
  if (family == Family::NegBinomial) return std::exp(eta);
  const double m = inverse_link(family, eta);
  return m * (1.0 - m);
}

bool ValidationReport::has(std::string_view code) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.code == code; });
}

ValidationReport validate(const Dataset& dataset, const ModelSpec& spec, double rank_tol) {
  ValidationReport report;
  auto add = [&](std::string code, std::string message, std::optional<Index> obs = std::nullopt) {
    report.violations.push_back({std::move(code), std::move(message), obs});
  };

  if (dataset.num_subjects() == 0) add("empty", "dataset has no subjects");
  if (spec.p != dataset.num_covariates())
    add("dimension", "model declares p=" + std::to_string(spec.p) + " but dataset has " +
                         std::to_string(dataset.num_covariates()) + " covariates");

  for (Index i = 0; i < dataset.num_subjects(); ++i) {
    const auto& s = dataset.subject(i);
    if (s.size() == 0) add("empty_subject", "subject '" + s.id + "' has no observations");
    for (Index j = 0; j < s.size(); ++j) {
      const Index obs = dataset.offset(i) + j;
      const double y = s.y(j);
      if (!std::isfinite(y)) {
        add("response_domain", "non-finite response", obs);
        continue;
      }
      if (spec.family == Family::Logistic && y != 0.0 && y != 1.0)
        add("response_domain", "logistic response must be 0 or 1", obs);
      if (spec.family == Family::NegBinomial && (y < 0.0 || y != std::floor(y)))
        add("response_domain", "negative-binomial response must be a nonnegative integer", obs);
      if (!(s.w(j) > 0.0) || !std::isfinite(s.w(j)))
        add("weights", "weights must be positive and finite", obs);
      if (!s.x.row(j).allFinite()) add("covariates", "non-finite covariate value", obs);
    }
  }

  // Partition check on the group index.
  std::vector<int> seen(static_cast<std::size_t>(dataset.num_obs()), 0);
  const auto& groups = dataset.groups();
  for (Index q = 0; q < groups.num_groups(); ++q) {
    if (groups.size(q) == 0) add("group", "group '" + groups.label(q) + "' is empty");
    for (Index obs : groups.members(q)) ++seen[static_cast<std::size_t>(obs)];
  }
  for (std::size_t obs = 0; obs < seen.size(); ++obs)
    if (seen[obs] != 1)
      add("group", "observation is not in exactly one group", static_cast<Index>(obs));

  if (dataset.num_obs() > 0 && dataset.num_covariates() > 0) {
    const Eigen::MatrixXd x = dataset.stacked_x();
    if (x.allFinite()) {
      Eigen::BDCSVD<Eigen::MatrixXd> svd(x);
      const auto& sv = svd.singularValues();
      const double smax = sv.size() > 0 ? sv(0) : 0.0;
      Index rank = 0;
      for (Index k = 0; k < sv.size(); ++k)
        if (sv(k) > rank_tol * smax) ++rank;
      if (rank < dataset.num_covariates())
        add("rank", "covariate matrix has rank " + std::to_string(rank) + " < p=" +
                        std::to_string(dataset.num_covariates()));
    }
  }
  return report;
}

}  // namespace glmmgm
