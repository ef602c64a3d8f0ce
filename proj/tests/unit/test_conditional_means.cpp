#include "fixtures.hpp"
#include "oracles.hpp"

#include "glmmgm/conditional_means.hpp"
#include "glmmgm/family.hpp"
#include "glmmgm/simulation.hpp"

#include <doctest.h>

#include <numeric>

using namespace glmmgm;

namespace {

struct Layout {
  Eigen::MatrixXd x;
  std::vector<Index> subject;
  Eigen::VectorXd w;
};

Layout random_layout(Index k, Index per, Index p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.05, 0.25);
  Layout l;
  l.x.resize(k * per, p);
  l.w.resize(k * per);
  for (Index r = 0; r < k * per; ++r) {
    l.x(r, 0) = 1.0;
    for (Index c = 1; c < p; ++c) l.x(r, c) = z(rng);
    l.w(r) = u(rng);
    l.subject.push_back(r / per);
  }
  return l;
}

std::vector<Index> all_rows(Index n) {
  std::vector<Index> r(static_cast<std::size_t>(n));
  std::iota(r.begin(), r.end(), Index{0});
  return r;
}

struct Fitted {
  Dataset d;
  FittedModel f;
};

Fitted fitted_time(Family fam, std::uint64_t seed) {
  const auto design = SimDesign::defaults(fam, Baseline::Bernoulli, ControlType::Time);
  Dataset d = generate_dataset(design, seed).data;
  FittedModel f = fit(d, ModelSpec{fam, 4, true});
  REQUIRE(f.converged);
  return {std::move(d), std::move(f)};
}

}  // namespace

TEST_CASE("predicted_eta") {
  const Dataset d = fixture::logistic_toy();
  FittedModel f = fixture::hand_model(Family::Logistic, Eigen::Vector2d(0.2, 0.5), 0.0, Eigen::Matrix3d::Zero());
  f.subject_ids = {"a", "b", "c"};
  f.cond_modes = {0.0, 0.0, 0.0};
  f.cond_curvatures = {INFINITY, INFINITY, INFINITY};
  const Eigen::Vector2d x(1.0, 0.4);
  CHECK(predicted_eta(f, x, "b") == doctest::Approx(0.4).epsilon(1e-15));
  CHECK_THROWS_AS(predicted_eta(f, x, "zz"), std::out_of_range);

  f.cond_modes = {0.1, -0.3, 0.7};
  CHECK(predicted_eta(f, x, "c") == doctest::Approx(1.1).epsilon(1e-15));
  CHECK(group_predicted_eta(f, d, 0)(1) == doctest::Approx(0.2 + 0.6 - 0.3).epsilon(1e-15));
}

TEST_CASE("balanced responses give a near-zero mode") {
  const SubjectBlock s = fixture::subject("s", {1, 0, 1, 0}, {{1}, {1}, {1}, {1}});
  ParamVector p;
  p.beta = Eigen::VectorXd::Zero(1);
  p.sigma2 = 0.8;
  CHECK(std::abs(conditional_mode(s, Family::Logistic, p).mode) <= 1e-12);
}

TEST_CASE("Gaussian terms: modes reproduce the Henderson BLUP") {
  const Index k = 20, per = 3;
  const double s2 = 0.6, resid = 0.5;
  Layout l = random_layout(k, per, 2, 41);
  l.w.setConstant(1.0 / resid);
  std::mt19937_64 rng(42);
  std::normal_distribution<double> z;
  Eigen::VectorXd y(k * per);
  for (Index r = 0; r < y.size(); ++r) y(r) = 0.3 + 0.8 * l.x(r, 1) + z(rng);

  PredictionStructure st(l.x, l.subject, l.w, s2);
  const Eigen::MatrixXd zmat = st.dense_z();
  const Eigen::VectorXd sol = oracle::henderson_solve(l.x, zmat, l.w, Eigen::VectorXd::Constant(k, s2), y);
  const Eigen::VectorXd beta = sol.head(2);
  for (Index i = 0; i < k; ++i) {
    auto terms = [&](double b) {
      EtaDerivatives t{0.0, 0.0, 0.0};
      for (Index j = 0; j < per; ++j) {
        const Index r = i * per + j;
        const double e = y(r) - l.x.row(r).dot(beta) - b;
        t.value -= 0.5 * e * e / resid;
        t.d1 += e / resid;
        t.d2 -= 1.0 / resid;
      }
      return t;
    };
    const ConditionalMode m = solve_conditional_mode(terms, s2, 0.0, 1e-12);
    CHECK(m.mode == doctest::Approx(sol(2 + i)).epsilon(1e-10));
    CHECK(m.curvature == doctest::Approx(per / resid + 1.0 / s2).epsilon(1e-14));
  }
}

TEST_CASE("prediction covariance matches the explicit Henderson inverse") {
  const Index k = 20, per = 3;
  const Layout l = random_layout(k, per, 3, 7);
  for (double s2 : {0.0, 0.05, 1.3}) {
    const PredictionStructure st(l.x, l.subject, l.w, s2);
    CHECK_FALSE(st.jittered());
    const std::vector<Index> rows = {0, 1, 2, 5, 17, 33, 59};
    const Eigen::MatrixXd got = st.covariance(rows);
    Eigen::MatrixXd ref;
    if (s2 == 0.0) {
      // Without the random effect C = X_q (X'WX)^{-1} X_q'.
      Eigen::MatrixXd xq(static_cast<Index>(rows.size()), 3);
      for (std::size_t a = 0; a < rows.size(); ++a) xq.row(static_cast<Index>(a)) = l.x.row(rows[a]);
      ref = xq * (l.x.transpose() * l.w.asDiagonal() * l.x).inverse() * xq.transpose();
    } else {
      ref = oracle::henderson_prediction_covariance(l.x, st.dense_z(), l.w, Eigen::VectorXd::Constant(k, s2), rows);
    }
    CHECK(oracle::rel_error(got.reshaped(), ref.reshaped()) <= 1e-8);
  }
  CHECK_THROWS_AS(PredictionStructure(l.x, l.subject, l.w.head(3), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(PredictionStructure(l.x, l.subject, l.w, -1.0), std::invalid_argument);
  const PredictionStructure st(l.x, l.subject, l.w, 1.0);
  const std::vector<Index> bad = {60};
  CHECK_THROWS_AS(st.covariance(bad), std::out_of_range);
}

TEST_CASE("prediction covariance: fixed-effect and random-effect terms") {
  // C = Z (Z'WZ + G^{-1})^{-1} Z' + A' (X'V^{-1}X)^{-1} A with
  // A = X_q' - X'WZ (Z'WZ + G^{-1})^{-1} Z_q' and V = W^{-1} + Z G Z'.
  const Index k = 4, per = 2;
  const Layout l = random_layout(k, per, 2, 19);
  const double s2 = 0.7;
  const PredictionStructure st(l.x, l.subject, l.w, s2);
  const Eigen::MatrixXd z = st.dense_z();
  const Eigen::MatrixXd v =
      Eigen::MatrixXd(l.w.cwiseInverse().asDiagonal()) + s2 * z * z.transpose();
  const Eigen::MatrixXd info_beta = l.x.transpose() * v.inverse() * l.x;
  Eigen::MatrixXd dinv = (z.transpose() * l.w.asDiagonal() * z).diagonal().array() + 1.0 / s2;
  dinv = dinv.cwiseInverse();
  const Eigen::MatrixXd a = l.x.transpose() - l.x.transpose() * l.w.asDiagonal() * z * dinv.asDiagonal() * z.transpose();
  const Eigen::MatrixXd ref = z * dinv.asDiagonal() * z.transpose() + a.transpose() * info_beta.inverse() * a;
  const auto rows = all_rows(k * per);
  CHECK(oracle::rel_error(st.covariance(rows).reshaped(), ref.reshaped()) <= 1e-10);
}

TEST_CASE("prediction variance grows with sigma2") {
  const Layout l = random_layout(10, 4, 2, 3);
  const auto rows = all_rows(40);
  Eigen::VectorXd prev = Eigen::VectorXd::Zero(40);
  for (double s2 : {0.0, 0.01, 0.1, 1.0, 10.0}) {
    const Eigen::VectorXd diag = PredictionStructure(l.x, l.subject, l.w, s2).covariance(rows).diagonal();
    CHECK((diag.array() >= prev.array() - 1e-12).all());
    prev = diag;
  }
}

TEST_CASE("conditional group variance on fitted data") {
  for (Family fam : {Family::Logistic, Family::NegBinomial}) {
    const auto [d, f] = fitted_time(fam, 13);
    const PredictionStructure st(d, f);
    for (Index q = 0; q < d.groups().num_groups(); ++q) {
      const Eigen::MatrixXd c = prediction_covariance(st, d, q);
      CHECK(c.rows() == d.groups().size(q));
      CHECK((c - c.transpose()).cwiseAbs().maxCoeff() == 0.0);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
      CHECK(eig.eigenvalues().minCoeff() >= -1e-10 * eig.eigenvalues().maxCoeff());

      const Eigen::VectorXd eta = group_predicted_eta(f, d, q);
      Eigen::VectorXd dv(eta.size());
      for (Index r = 0; r < eta.size(); ++r)
        dv(r) = fam == Family::Logistic ? oracle::expit(eta(r)) * (1 - oracle::expit(eta(r))) : std::exp(eta(r));
      const double n = static_cast<double>(eta.size());
      CHECK(conditional_group_variance(f, d, st, q) ==
            doctest::Approx(dv.dot(c * dv) / (n * n)).epsilon(1e-12));

      double mean = 0.0;
      for (Index r = 0; r < eta.size(); ++r)
        mean += (fam == Family::Logistic ? oracle::expit(eta(r)) : std::exp(eta(r))) / n;
      CHECK(conditional_group_mean(f, d, q) == doctest::Approx(mean).epsilon(1e-13));

      const GroupMeanEstimate e = estimate_conditional(f, d, st, q);
      CHECK(e.kind == EstimateKind::Conditional);
      CHECK(e.intervals.size() == 2);
      for (const auto& li : e.intervals) CHECK(li.interval.contains(e.point));
      if (fam == Family::Logistic) {
        CHECK(e.interval("inverse").lower > 0.0);
        CHECK(e.interval("inverse").upper < 1.0);
      } else {
        CHECK(e.interval("inverse").lower > 0.0);
      }
    }
  }
  CHECK(inverse_link_derivative(Family::Logistic, 0.0) == 0.25);
}

TEST_CASE("conditional estimates are invariant under subject permutation") {
  const auto [d, f] = fitted_time(Family::Logistic, 14);
  std::vector<Index> order(static_cast<std::size_t>(d.num_subjects()));
  std::iota(order.begin(), order.end(), Index{0});
  std::mt19937_64 rng(1);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<SubjectBlock> subjects;
  FittedModel g = f;
  g.subject_ids.clear();
  g.cond_modes.clear();
  g.cond_curvatures.clear();
  for (Index i : order) {
    const auto ui = static_cast<std::size_t>(i);
    subjects.push_back(d.subject(i));
    g.subject_ids.push_back(f.subject_ids[ui]);
    g.cond_modes.push_back(f.cond_modes[ui]);
    g.cond_curvatures.push_back(f.cond_curvatures[ui]);
  }
  const Dataset e(std::move(subjects), d.groups().labels(), d.covariate_names());
  const PredictionStructure sd(d, f), se(e, g);
  for (Index q = 0; q < d.groups().num_groups(); ++q) {
    CHECK(conditional_group_mean(g, e, q) == doctest::Approx(conditional_group_mean(f, d, q)).epsilon(1e-13));
    CHECK(conditional_group_variance(g, e, se, q) ==
          doctest::Approx(conditional_group_variance(f, d, sd, q)).epsilon(1e-9));
  }
}

TEST_CASE("mode_beta_sensitivity matches finite differences of the mode") {
  for (Family fam : {Family::Logistic, Family::NegBinomial}) {
    const SubjectBlock s = fixture::subject("s", {1, 0, 1}, {{1, 0.3}, {1, -0.6}, {1, 1.1}});
    ParamVector p;
    p.beta = Eigen::Vector2d(0.2, -0.4);
    p.sigma2 = 0.9;
    if (fam == Family::NegBinomial) p.kappa = 4.0;
    const double mode = conditional_mode(s, fam, p, 1e-13).mode;
    const Eigen::VectorXd fd = oracle::fd_gradient(
        [&](const Eigen::VectorXd& b) {
          ParamVector q = p;
          q.beta = b;
          return conditional_mode(s, fam, q, 1e-13).mode;
        },
        p.beta);
    CHECK(oracle::rel_error(mode_beta_sensitivity(s, fam, p, mode), fd) <= 1e-6);
    p.sigma2 = 0.0;
    CHECK(mode_beta_sensitivity(s, fam, p, 0.0).isZero());
  }
}

TEST_CASE("predictor at the mean covariate and posterior means") {
  const auto [d, f] = fitted_time(Family::Logistic, 15);
  for (Index q = 0; q < d.groups().num_groups(); ++q) {
    const Eigen::MatrixXd xq = group_design(d, q);
    const double eta_bar = xq.colwise().mean().dot(f.params.beta.transpose());
    double ref = 0.0;
    for (Index obs : d.groups().members(q))
      ref += oracle::expit(eta_bar + f.cond_modes[static_cast<std::size_t>(d.subject_of(obs))]);
    CHECK(predictor_at_mean_covariate(f, d, q) ==
          doctest::Approx(ref / static_cast<double>(xq.rows())).epsilon(1e-13));
  }

  // With identical rows in a group both predictors coincide.
  std::vector<SubjectBlock> same;
  same.push_back(fixture::subject("a", {1, 0}, {{1, 0.3}, {1, 0.3}}));
  same.push_back(fixture::subject("b", {0, 0}, {{1, 0.3}, {1, 0.3}}));
  const Dataset ds(std::move(same), {"all"}, {"intercept", "x"});
  FittedModel h = fixture::hand_model(Family::Logistic, Eigen::Vector2d(0.1, 0.9), 0.5, Eigen::Matrix3d::Zero());
  h.subject_ids = {"a", "b"};
  h.cond_modes = {0.2, -0.4};
  h.cond_curvatures = {3.0, 3.0};
  CHECK(predictor_at_mean_covariate(h, ds, 0) == doctest::Approx(conditional_group_mean(h, ds, 0)).epsilon(1e-14));

  const std::vector<double> pm = posterior_means(d, f);
  REQUIRE(pm.size() == f.cond_modes.size());
  Eigen::Map<const Eigen::VectorXd> a(pm.data(), static_cast<Index>(pm.size()));
  Eigen::Map<const Eigen::VectorXd> b(f.cond_modes.data(), static_cast<Index>(pm.size()));
  const Eigen::VectorXd ca = a.array() - a.mean(), cb = b.array() - b.mean();
  CHECK(ca.dot(cb) / (ca.norm() * cb.norm()) > 0.99);
  const double pmean = conditional_group_mean(f, d, 0, RandomEffectEstimate::PosteriorMean);
  CHECK(pmean == doctest::Approx(conditional_group_mean(f, d, 0)).epsilon(0.02));
}
