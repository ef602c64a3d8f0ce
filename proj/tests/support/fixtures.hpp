#pragma once

// Small hand-built datasets and fitted models shared by the unit tests.

#include "glmmgm/fitter.hpp"
#include "glmmgm/model.hpp"

#include <initializer_list>
#include <string>
#include <vector>

namespace fixture {

using glmmgm::Index;

inline glmmgm::SubjectBlock subject(std::string id, const std::vector<double>& y,
                                    const std::vector<std::vector<double>>& x,
                                    std::vector<Index> groups = {}) {
  glmmgm::SubjectBlock s;
  s.id = std::move(id);
  const auto n = static_cast<Index>(y.size());
  const auto p = static_cast<Index>(x.front().size());
  s.y.resize(n);
  s.x.resize(n, p);
  s.w = Eigen::VectorXd::Ones(n);
  for (Index r = 0; r < n; ++r) {
    s.y(r) = y[static_cast<std::size_t>(r)];
    for (Index c = 0; c < p; ++c) s.x(r, c) = x[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  }
  s.group = groups.empty() ? std::vector<Index>(static_cast<std::size_t>(n), 0) : std::move(groups);
  return s;
}

/// Three subjects with two logistic observations each and covariates (1, x).
inline glmmgm::Dataset logistic_toy() {
  std::vector<glmmgm::SubjectBlock> s;
  s.push_back(subject("a", {1, 0}, {{1, 0.3}, {1, -0.8}}, {0, 1}));
  s.push_back(subject("b", {1, 1}, {{1, 1.2}, {1, 0.1}}, {0, 1}));
  s.push_back(subject("c", {0, 1}, {{1, -0.5}, {1, 0.9}}, {0, 1}));
  return glmmgm::Dataset(std::move(s), {"g0", "g1"}, {"intercept", "x"});
}

/// Three subjects with negative-binomial counts and covariates (1, x).
inline glmmgm::Dataset negbin_toy() {
  std::vector<glmmgm::SubjectBlock> s;
  s.push_back(subject("a", {2, 0, 3}, {{1, 0.3}, {1, -0.8}, {1, 0.5}}, {0, 1, 1}));
  s.push_back(subject("b", {1, 4}, {{1, 1.2}, {1, 0.1}}, {0, 1}));
  s.push_back(subject("c", {0, 2}, {{1, -0.5}, {1, 0.9}}, {0, 1}));
  return glmmgm::Dataset(std::move(s), {"g0", "g1"}, {"intercept", "x"});
}

/// A fitted model assembled by hand, for testing estimators in isolation.
inline glmmgm::FittedModel hand_model(glmmgm::Family family, const Eigen::VectorXd& beta,
                                      double sigma2, const Eigen::MatrixXd& cov,
                                      double kappa = 50.0) {
  glmmgm::FittedModel f;
  f.family = family;
  f.params.beta = beta;
  f.params.sigma2 = sigma2;
  if (family == glmmgm::Family::NegBinomial) f.params.kappa = kappa;
  f.cov_psi = cov;
  f.converged = true;
  return f;
}

}  // namespace fixture
