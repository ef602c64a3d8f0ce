#include "glmmgm/simulation.hpp"

#include "glmmgm/quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <thread>

namespace glmmgm {

std::string_view to_string(Baseline baseline) {
  return baseline == Baseline::Bernoulli ? "bernoulli" : "uniform";
}

std::string_view to_string(ControlType control) {
  return control == ControlType::Gender ? "gender" : "time";
}

Baseline parse_baseline(std::string_view name) {
  if (name == "bernoulli") return Baseline::Bernoulli;
  if (name == "uniform") return Baseline::Uniform;
  throw std::invalid_argument("unknown baseline '" + std::string(name) + "'");
}

ControlType parse_control(std::string_view name) {
  if (name == "gender") return ControlType::Gender;
  if (name == "time") return ControlType::Time;
  throw std::invalid_argument("unknown design '" + std::string(name) + "'");
}

SimDesign SimDesign::defaults(Family family, Baseline baseline, ControlType control) {
  SimDesign d;
  d.family = family;
  d.baseline = baseline;
  d.control = control;
  d.beta.resize(4);
  if (family == Family::Logistic) {
    d.beta << -0.3, -3.0, 2.0, 0.2;
    d.sigma = 0.5;
  } else {
    d.beta << 0.3, -0.2, 0.3, 0.4;
    d.sigma = 0.1;
    d.kappa = 50.0;
  }
  return d;
}

std::pair<int, int> SimDesign::group_cell(Index q) {
  static constexpr std::array<std::pair<int, int>, 4> cells{{{1, 0}, {1, 1}, {0, 0}, {0, 1}}};
  return cells.at(static_cast<std::size_t>(q));
}

std::string SimDesign::group_label(Index q) {
  const auto [u, t] = group_cell(q);
  return "U" + std::to_string(u) + "_t" + std::to_string(t);
}

void SimDesign::check() const {
  if (beta.size() != 4) throw std::invalid_argument("SimDesign: beta must have 4 entries");
  if (!(sigma >= 0.0)) throw std::invalid_argument("SimDesign: sigma must be >= 0");
  if (family == Family::NegBinomial && !(kappa > 0.0))
    throw std::invalid_argument("SimDesign: kappa must be > 0");
  for (Index s : sizes)
    if (s < 1) throw std::invalid_argument("SimDesign: group sizes must be positive");
  if (control == ControlType::Time && (sizes[1] > sizes[0] || sizes[3] > sizes[2]))
    throw std::invalid_argument("SimDesign: time design needs t=1 sizes <= t=0 sizes");
  if (reps < 1) throw std::invalid_argument("SimDesign: reps must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("SimDesign: alpha in (0,1)");
  fit.check();
}

std::mt19937_64 replication_engine(std::uint64_t seed, std::uint64_t replication) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replication),
                    static_cast<std::uint32_t>(replication >> 32)};
  return std::mt19937_64(seq);
}

namespace {

double draw_response(const SimDesign& design, double eta, std::mt19937_64& rng) {
  const double mu = inverse_link(design.family, eta);
  if (design.family == Family::Logistic) {
    return std::bernoulli_distribution(mu)(rng) ? 1.0 : 0.0;
  }
  // Gamma-Poisson mixture: NB with mean mu and size kappa.
  const double rate = std::gamma_distribution<double>(design.kappa, mu / design.kappa)(rng);
  return static_cast<double>(std::poisson_distribution<long long>(rate)(rng));
}

SubjectBlock make_subject(std::string id, std::size_t rows) {
  SubjectBlock s;
  s.id = std::move(id);
  s.y.resize(static_cast<Index>(rows));
  s.x.resize(static_cast<Index>(rows), 4);
  s.w = Eigen::VectorXd::Ones(static_cast<Index>(rows));
  s.group.resize(rows);
  return s;
}

Index group_of(int u, int t) { return u == 1 ? (t == 0 ? 0 : 1) : (t == 0 ? 2 : 3); }

double marginal_mean_at(const SimDesign& design, double eta) {
  const double s2 = design.sigma * design.sigma;
  return design.family == Family::Logistic ? logistic_normal_integral(eta, s2)
                                           : std::exp(eta + 0.5 * s2);
}

}  // namespace

SimDataset generate_dataset(const SimDesign& design, std::mt19937_64& rng) {
  design.check();
  std::vector<SubjectBlock> subjects;
  std::vector<double> xi;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  auto baseline = [&] {
    return design.baseline == Baseline::Bernoulli ? (coin(rng) ? 1.0 : 0.0) : uniform(rng);
  };

  auto emit = [&](int u, const std::vector<int>& times, double x, double b, std::string id) {
    SubjectBlock s = make_subject(std::move(id), times.size());
    for (std::size_t j = 0; j < times.size(); ++j) {
      const auto r = static_cast<Index>(j);
      s.x.row(r) << 1.0, x, static_cast<double>(u), static_cast<double>(times[j]);
      s.y(r) = draw_response(design, s.x.row(r).dot(design.beta) + b, rng);
      s.group[j] = group_of(u, times[j]);
    }
    subjects.push_back(std::move(s));
    xi.push_back(b);
  };

  int serial = 0;
  for (int u : {1, 0}) {
    const Index n0 = design.sizes[static_cast<std::size_t>(group_of(u, 0))];
    const Index n1 = design.sizes[static_cast<std::size_t>(group_of(u, 1))];
    if (design.control == ControlType::Time) {
      for (Index k = 0; k < n0; ++k) {
        const double x = baseline();
        const double b = design.sigma * normal(rng);
        emit(u, k < n1 ? std::vector<int>{0, 1} : std::vector<int>{0}, x, b,
             "s" + std::to_string(++serial));
      }
    } else {
      for (int t : {0, 1}) {
        for (Index k = 0; k < (t == 0 ? n0 : n1); ++k) {
          const double x = baseline();
          const double b = design.sigma * normal(rng);
          emit(u, {t}, x, b, "s" + std::to_string(++serial));
        }
      }
    }
  }
  std::vector<std::string> labels;
  for (Index q = 0; q < 4; ++q) labels.push_back(SimDesign::group_label(q));
  return {Dataset(std::move(subjects), std::move(labels), {"intercept", "X", "U", "t"}),
          std::move(xi)};
}

SimDataset generate_dataset(const SimDesign& design, std::uint64_t seed) {
  auto rng = replication_engine(seed, 0);
  return generate_dataset(design, rng);
}

std::array<double, 4> population_marginal_means(const SimDesign& design) {
  design.check();
  std::array<double, 4> out{};
  for (Index q = 0; q < 4; ++q) {
    const auto [u, t] = SimDesign::group_cell(q);
    auto at = [&](double x) {
      const double eta = design.beta(0) + design.beta(1) * x + design.beta(2) * u +
                         design.beta(3) * t;
      return marginal_mean_at(design, eta);
    };
    out[static_cast<std::size_t>(q)] =
        design.baseline == Baseline::Bernoulli
            ? 0.5 * (at(0.0) + at(1.0))
            : boost::math::quadrature::gauss<double, 30>::integrate(at, 0.0, 1.0);
  }
  return out;
}

std::vector<double> sample_marginal_means(const SimDesign& design, const Dataset& data) {
  std::vector<double> out;
  for (Index q = 0; q < data.groups().num_groups(); ++q) {
    double sum = 0.0;
    for (Index obs : data.groups().members(q))
      sum += marginal_mean_at(design, data.x_row(obs).dot(design.beta));
    out.push_back(sum / static_cast<double>(data.groups().size(q)));
  }
  return out;
}

std::vector<double> sample_conditional_means(const SimDesign& design, const Dataset& data,
                                             const std::vector<double>& xi) {
  std::vector<double> out;
  for (Index q = 0; q < data.groups().num_groups(); ++q) {
    double sum = 0.0;
    for (Index obs : data.groups().members(q)) {
      const double b = xi.at(static_cast<std::size_t>(data.subject_of(obs)));
      sum += inverse_link(design.family, data.x_row(obs).dot(design.beta) + b);
    }
    out.push_back(sum / static_cast<double>(data.groups().size(q)));
  }
  return out;
}

ReplicationRecord run_replication(const SimDesign& design, std::uint64_t replication) {
  ReplicationRecord rec;
  try {
    auto rng = replication_engine(design.seed, replication);
    const SimDataset sim = generate_dataset(design, rng);
    const Dataset& data = sim.data;
    const FittedModel fitted = fit(data, ModelSpec{design.family, 4, true}, design.fit);
    if (!fitted.converged) {
      rec.error = "fit did not converge";
      return rec;
    }
    rec.params = fitted.params;
    const std::vector<double> mu = sample_marginal_means(design, data);
    const std::vector<double> lambda = sample_conditional_means(design, data, sim.xi);
    const PredictionStructure structure(data, fitted);
    for (Index q = 0; q < 4; ++q) {
      GroupRecord& g = rec.groups[static_cast<std::size_t>(q)];
      const auto uq = static_cast<std::size_t>(q);
      double ysum = 0.0;
      for (Index obs : data.groups().members(q)) ysum += data.y_at(obs);
      g.ybar = ysum / static_cast<double>(data.groups().size(q));
      g.mu = mu[uq];
      g.lambda = lambda[uq];
      const Eigen::MatrixXd xq = group_design(data, q);
      g.mu_star = mean_at_mean_covariate(fitted, xq);
      const GroupMeanEstimate m = estimate_marginal(fitted, data, q, design.alpha);
      g.mu_hat = m.point;
      g.mu_se = m.se();
      for (const auto& li : m.intervals) g.ci.push_back(li.interval);
      g.lambda_star = predictor_at_mean_covariate(fitted, data, q);
      const GroupMeanEstimate c = estimate_conditional(fitted, data, structure, q, design.alpha);
      g.lambda_hat = c.point;
      g.lambda_se = c.se();
      for (const auto& li : c.intervals) g.pi.push_back(li.interval);
    }
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  return rec;
}

int default_thread_count() {
  if (const char* env = std::getenv("GLMM_GM_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

std::vector<ReplicationRecord> run_replications(const SimDesign& design, int threads) {
  design.check();
  if (threads <= 0) threads = default_thread_count();
  const auto reps = static_cast<std::size_t>(design.reps);
  threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(threads), reps));
  std::vector<ReplicationRecord> records(reps);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < reps; r = next++) records[r] = run_replication(design, r);
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return records;
}

namespace {

// Accumulates in replication order so the result does not depend on threads.
class Moments {
 public:
  void add(double v) {
    ++n_;
    const double d = v - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (v - mean_);
  }
  MeanSd result() const {
    if (n_ == 0) return {std::numeric_limits<double>::quiet_NaN(),
                         std::numeric_limits<double>::quiet_NaN()};
    return {mean_, n_ > 1 ? std::sqrt(m2_ / static_cast<double>(n_ - 1)) : 0.0};
  }

 private:
  long n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

}  // namespace

SimReport summarize(const SimDesign& design, const std::vector<ReplicationRecord>& records,
                    PiTarget pi_target) {
  SimReport rep;
  rep.family = design.family;
  rep.baseline = design.baseline;
  rep.control = design.control;
  rep.reps = static_cast<int>(records.size());
  for (const auto& r : records)
    if (!r.ok) ++rep.failures;
  rep.flagged = rep.reps > 0 && static_cast<double>(rep.failures) > 0.02 * rep.reps;
  const auto population = population_marginal_means(design);
  const std::size_t n_ci = design.family == Family::Logistic ? 2 : 3;

  for (Index q = 0; q < 4; ++q) {
    const auto uq = static_cast<std::size_t>(q);
    const auto [u, t] = SimDesign::group_cell(q);
    Moments truth_m, ybar_m, star_m, hat_m, se_m;
    Moments truth_c, ybar_c, star_c, hat_c, se_c;
    std::vector<long> cover_ci(n_ci, 0), cover_pi(2, 0);
    long ok = 0;
    for (const auto& r : records) {
      if (!r.ok) continue;
      ++ok;
      const GroupRecord& g = r.groups[uq];
      truth_m.add(g.mu);
      ybar_m.add(g.ybar - g.mu);
      star_m.add(g.mu_star - g.mu);
      hat_m.add(g.mu_hat - g.mu);
      se_m.add(g.mu_se);
      for (std::size_t k = 0; k < n_ci; ++k) cover_ci[k] += g.ci[k].contains(g.mu) ? 1 : 0;
      const double target = pi_target == PiTarget::RealisedConditional ? g.lambda : g.mu;
      truth_c.add(target);
      ybar_c.add(g.ybar - target);
      star_c.add(g.lambda_star - target);
      hat_c.add(g.lambda_hat - target);
      se_c.add(g.lambda_se);
      for (std::size_t k = 0; k < 2; ++k) cover_pi[k] += g.pi[k].contains(target) ? 1 : 0;
    }
    const double denom = ok > 0 ? static_cast<double>(ok) : std::numeric_limits<double>::quiet_NaN();

    GroupSummary m;
    m.label = SimDesign::group_label(q);
    m.u = u;
    m.t = t;
    m.truth = truth_m.result().mean;
    m.population_truth = population[uq];
    m.ybar_bias = ybar_m.result();
    m.star_bias = star_m.result();
    m.hat_bias = hat_m.result();
    m.mean_se = se_m.result().mean;
    for (long c : cover_ci) m.coverage.push_back(static_cast<double>(c) / denom);
    rep.marginal.push_back(m);

    GroupSummary c;
    c.label = m.label;
    c.u = u;
    c.t = t;
    c.truth = truth_c.result().mean;
    c.population_truth = std::numeric_limits<double>::quiet_NaN();
    c.ybar_bias = ybar_c.result();
    c.star_bias = star_c.result();
    c.hat_bias = hat_c.result();
    c.mean_se = se_c.result().mean;
    for (long k : cover_pi) c.coverage.push_back(static_cast<double>(k) / denom);
    rep.conditional.push_back(c);
  }
  return rep;
}

SimReport run_study(const SimDesign& design, int threads) {
  return summarize(design, run_replications(design, threads));
}

}  // namespace glmmgm
