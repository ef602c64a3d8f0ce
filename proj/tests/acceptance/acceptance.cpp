// Acceptance checks 1-11. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Criteria 6-9 run the R = 500 coverage studies.

#include "fixtures.hpp"
#include "oracles.hpp"

#include "glmmgm/cli.hpp"
#include "glmmgm/conditional_means.hpp"
#include "glmmgm/csv_io.hpp"
#include "glmmgm/marginal_means.hpp"
#include "glmmgm/quadrature.hpp"
#include "glmmgm/simulation.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace glmmgm;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& what, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << ": " << what << " [" << detail << "]"
            << std::endl;
}

void info(const std::string& text) { std::cout << "  info: " << text << std::endl; }

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

bool within(double v, double centre, double tol) { return std::abs(v - centre) <= tol; }

const std::vector<double> kEta = {-3.0, -1.0, 0.0, 1.0, 3.0};
const std::vector<double> kSigma2 = {0.01, 0.25, 1.0};

void criterion1() {
  double worst = 0.0;
  for (double eta : kEta)
    for (double s2 : kSigma2)
      worst = std::max(worst, std::abs(logistic_normal_integral(eta, s2) - oracle::logistic_normal(eta, s2)));
  report(1, worst <= 1e-8, "25-node Gauss-Hermite vs 1e6-point trapezoid", "max abs error " + fmt(worst));
}

void criterion2() {
  double worst = 0.0;
  for (double eta : kEta)
    for (double s2 : kSigma2)
      worst = std::max(worst, std::abs(zeger_mean(eta, s2) - logistic_normal_integral(eta, s2)));
  report(2, worst <= 0.01, "Zeger surrogate within 0.01 of the exact integral", "max abs error " + fmt(worst));
}

void criterion3() {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> z;
  double worst = 0.0;
  for (Index n : {1, 2, 5}) {
    Eigen::MatrixXd a(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) a(i, j) = z(rng);
    const Eigen::MatrixXd cov = 0.05 * a * a.transpose() / static_cast<double>(n);
    Eigen::VectorXd nu(n);
    for (Index i = 0; i < n; ++i) nu(i) = 0.3 * z(rng);
    const double mc = oracle::mc_lognormal_sum_variance(nu, cov, 1'000'000, 99 + static_cast<std::uint64_t>(n));
    worst = std::max(worst, std::abs(lognormal_sum_variance(nu, cov) / mc - 1.0));
  }
  report(3, worst <= 0.02, "lognormal-sum variance vs Monte Carlo (n = 1, 2, 5)", "max rel error " + fmt(worst));
}

void criterion4() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst_mean = 0.0, worst_score = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    for (Family fam : {Family::Logistic, Family::NegBinomial}) {
      const Eigen::Vector3d beta(u(rng), u(rng), u(rng));
      const double s2 = std::exp(1.5 * u(rng));
      const Eigen::Vector3d x(1.0, u(rng), u(rng));
      const Index q = fam == Family::Logistic ? 4 : 5;
      auto model = [&](const Eigen::VectorXd& b, double s) {
        return fixture::hand_model(fam, b, s, Eigen::MatrixXd::Zero(q, q));
      };
      Eigen::VectorXd at(4);
      at << beta, s2;
      const Eigen::VectorXd fd = oracle::fd_gradient(
          [&](const Eigen::VectorXd& v) { return mu_hat_i(model(v.head(3), v(3)), x); }, at);
      worst_mean = std::max(worst_mean, oracle::rel_error(grad_mu_i(model(beta, s2), x).wrt_sigma2, fd));

      const Dataset d = fam == Family::Logistic ? fixture::logistic_toy() : fixture::negbin_toy();
      const ModelSpec spec{fam, 2, true};
      ParamVector p;
      p.beta = Eigen::Vector2d(u(rng), u(rng));
      p.sigma2 = std::exp(1.5 * u(rng));
      if (fam == Family::NegBinomial) p.kappa = std::exp(1.0 + 2.0 * u(rng));
      const Eigen::VectorXd fs = oracle::fd_gradient(
          [&](const Eigen::VectorXd& t) { return marginal_loglik(d, spec, from_unconstrained(t, fam, 2)); },
          to_unconstrained(p, fam));
      worst_score = std::max(worst_score, oracle::rel_error(subject_scores(d, spec, p).total(), fs));
    }
  }
  report(4, worst_mean <= 1e-4 && worst_score <= 1e-4, "mean gradients and scores vs central differences",
         "max rel error grad_mu " + fmt(worst_mean) + ", score " + fmt(worst_score));
}

void criterion5() {
  const Index k = 20, per = 3, p = 2;
  const double s2 = 0.8, resid = 0.6;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  Eigen::MatrixXd x(k * per, p);
  std::vector<Index> subject;
  for (Index r = 0; r < k * per; ++r) {
    x(r, 0) = 1.0;
    x(r, 1) = z(rng);
    subject.push_back(r / per);
  }
  const Eigen::VectorXd w = Eigen::VectorXd::Constant(k * per, 1.0 / resid);
  const PredictionStructure st(x, subject, w, s2);
  std::vector<Index> rows(static_cast<std::size_t>(k * per));
  std::iota(rows.begin(), rows.end(), Index{0});
  const Eigen::MatrixXd got = st.covariance(rows);
  const Eigen::MatrixXd ref =
      oracle::henderson_prediction_covariance(x, st.dense_z(), w, Eigen::VectorXd::Constant(k, s2), rows);
  const double err = (got - ref).cwiseAbs().maxCoeff() / ref.cwiseAbs().maxCoeff();
  report(5, err <= 1e-8, "Gaussian prediction covariance vs Henderson equations (K=20, n_i=3)",
         "max rel error " + fmt(err));
}

struct Study {
  SimReport report;
  double seconds = 0.0;
};

Study run(Family fam) {
  const auto design = SimDesign::defaults(fam, Baseline::Bernoulli, ControlType::Gender);
  const auto t0 = std::chrono::steady_clock::now();
  const auto records = run_replications(design);
  Study s;
  s.report = summarize(design, records);
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s;
}

void describe(const Study& s, const char* name) {
  info(std::string(name) + ": R = " + std::to_string(s.report.reps) + ", failures " +
       std::to_string(s.report.failures) + ", " + fmt(s.seconds, 3) + " s");
  for (const auto* rows : {&s.report.marginal, &s.report.conditional}) {
    for (const auto& g : *rows) {
      std::string cps;
      for (double c : g.coverage) cps += " " + fmt(c, 3);
      info(std::string(rows == &s.report.marginal ? "marginal" : "conditional") + " U=" + std::to_string(g.u) +
           " t=" + std::to_string(g.t) + " truth " + fmt(g.truth) + " star bias " + fmt(g.star_bias.mean) +
           " hat bias " + fmt(g.hat_bias.mean) + " hat sd " + fmt(g.hat_bias.sd) + " CP" + cps);
    }
  }
}

void criteria6and7(const Study& s) {
  const GroupSummary& m = s.report.marginal[0];
  const GroupSummary& c = s.report.conditional[0];
  const bool ok6 = within(m.population_truth, 0.530, 0.002) && std::abs(m.hat_bias.mean) <= 0.01 &&
                   within(m.coverage[0], 0.951, 0.025) && within(m.coverage[1], 0.951, 0.025);
  report(6, ok6, "logistic CIs, gender design, R=500, row (U=1,t=0)",
         "mu " + fmt(m.population_truth) + ", mu_hat bias " + fmt(m.hat_bias.mean) + ", CP1 " +
             fmt(m.coverage[0], 3) + ", CP2 " + fmt(m.coverage[1], 3));
  const bool ok7 = within(c.coverage[0], 0.949, 0.025) && within(c.coverage[1], 0.947, 0.025) &&
                   within(m.star_bias.mean, 0.018, 0.005);
  report(7, ok7, "logistic PIs, gender design, R=500, row (U=1,t=0)",
         "CP1 " + fmt(c.coverage[0], 3) + ", CP2 " + fmt(c.coverage[1], 3) + ", mu_star bias " +
             fmt(m.star_bias.mean) + ", lambda_star bias " + fmt(c.star_bias.mean));
}

void criteria8and9(const Study& s) {
  const GroupSummary& m = s.report.marginal[0];
  const GroupSummary& c = s.report.conditional[0];
  bool cps = true;
  for (double cp : m.coverage) cps = cps && within(cp, 0.945, 0.025);
  const bool ok8 = within(m.population_truth, 1.665, 0.005) && cps && std::abs(m.hat_bias.mean) <= 0.01 &&
                   within(m.hat_bias.sd, 0.083, 0.2 * 0.083);
  report(8, ok8, "NB CIs, gender design, R=500, row (U=1,t=0)",
         "mu " + fmt(m.population_truth) + ", CP " + fmt(m.coverage[0], 3) + "/" + fmt(m.coverage[1], 3) + "/" +
             fmt(m.coverage[2], 3) + ", mu_hat bias " + fmt(m.hat_bias.mean) + ", sd " + fmt(m.hat_bias.sd));
  const bool ok9 =
      within(c.coverage[0], 0.942, 0.025) && within(c.coverage[1], 0.934, 0.025) && c.hat_bias.mean < 0.0;
  report(9, ok9, "NB PIs, gender design, R=500, row (U=1,t=0)",
         "CP1 " + fmt(c.coverage[0], 3) + ", CP2 " + fmt(c.coverage[1], 3) + ", lambda_hat bias " +
             fmt(c.hat_bias.mean));
}

void criterion10(const Study& logistic, const Study& nb) {
  // Required on the logistic control rows; NB rows are reported only.
  bool ok = true;
  std::string detail;
  for (std::size_t q : {2u, 3u}) {
    const GroupSummary& g = logistic.report.marginal[q];
    ok = ok && std::abs(g.star_bias.mean) > 3.0 * std::abs(g.hat_bias.mean);
    detail += "t=" + std::to_string(g.t) + ": star " + fmt(g.star_bias.mean) + " vs hat " + fmt(g.hat_bias.mean) + "; ";
  }
  for (const auto& g : nb.report.marginal)
    info("NB U=" + std::to_string(g.u) + " t=" + std::to_string(g.t) + ": |star bias| / |hat bias| = " +
         fmt(std::abs(g.star_bias.mean) / std::abs(g.hat_bias.mean), 3));
  report(10, ok, "mean-covariate benchmark is biased on the logistic control rows", detail);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void criterion11() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "glmmgm_acceptance";
  fs::create_directories(dir);
  const auto design = SimDesign::defaults(Family::NegBinomial, Baseline::Bernoulli, ControlType::Time);
  {
    std::ofstream csv(dir / "data.csv");
    write_dataset(csv, generate_dataset(design, 11).data);
  }
  const std::string input = (dir / "data.csv").string();
  const std::vector<std::string> data = {"--input", input, "--family", "negbin", "--covariates", "X,U,t",
                                         "--group-by", "group"};
  std::vector<std::vector<std::string>> commands;
  for (const char* fmt_name : {"json", "csv"}) {
    for (const char* cmd : {"fit", "means", "validate"}) {
      std::vector<std::string> a = {cmd, "--format", fmt_name};
      a.insert(a.end(), data.begin(), data.end());
      commands.push_back(a);
    }
    commands.push_back({"simulate", "--format", fmt_name, "--reps", "3", "--seed", "7", "--design", "time",
                        "--family", "negbin"});
  }
  bool same = true;
  int checked = 0;
  for (const auto& args : commands) {
    std::string outputs[2];
    for (int run = 0; run < 2; ++run) {
      const fs::path out = dir / ("report" + std::to_string(run));
      std::vector<std::string> full = {"glmm_gm"};
      full.insert(full.end(), args.begin(), args.end());
      full.push_back("--out");
      full.push_back(out.string());
      std::vector<const char*> argv;
      for (const auto& a : full) argv.push_back(a.c_str());
      std::ostringstream sink, err;
      const int code = run_command_line(static_cast<int>(argv.size()), argv.data(), sink, err);
      if (code != kExitSuccess) {
        same = false;
        info(args[0] + " exited with " + std::to_string(code) + ": " + err.str());
      }
      outputs[run] = slurp(out);
    }
    if (outputs[0].empty() || outputs[0] != outputs[1]) same = false;
    ++checked;
  }
  report(11, same, "byte-identical reports across two runs", std::to_string(checked) + " command/format pairs");
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  const Study logistic = run(Family::Logistic);
  describe(logistic, "logistic gender study");
  criteria6and7(logistic);
  const Study nb = run(Family::NegBinomial);
  describe(nb, "NB gender study");
  criteria8and9(nb);
  criterion10(logistic, nb);
  criterion11();
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
