#pragma once

#include "glmmgm/conditional_means.hpp"
#include "glmmgm/fitter.hpp"
#include "glmmgm/marginal_means.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace glmmgm {

enum class Baseline { Bernoulli, Uniform };
enum class ControlType { Gender, Time };

std::string_view to_string(Baseline baseline);
std::string_view to_string(ControlType control);
Baseline parse_baseline(std::string_view name);
ControlType parse_control(std::string_view name);

/// Generative description of a two-arm study with covariates
/// (1, X, U, t): X the baseline, U the treatment indicator and t either the
/// time point or the gender.
///
/// sizes = group sizes for (U=1,t=0), (U=1,t=1), (U=0,t=0), (U=0,t=1).
/// Time design: every subject is observed at t=0 and the first sizes[1]
/// (resp. sizes[3]) subjects of each arm also at t=1 (dropout by
/// truncation). Gender design: one observation per subject.
struct SimDesign {
  Family family = Family::Logistic;
  Baseline baseline = Baseline::Bernoulli;
  ControlType control = ControlType::Gender;
  Eigen::VectorXd beta;
  double sigma = 0.5;
  double kappa = 50.0;
  std::array<Index, 4> sizes{200, 180, 200, 160};
  int reps = 500;
  std::uint64_t seed = 1;
  double alpha = kDefaultAlpha;
  FitConfig fit;

  /// Coefficients, sigma and kappa of the reference designs:
  /// logistic beta = (-0.3, -3, 2, 0.2), sigma = 0.5;
  /// negative binomial beta = (0.3, -0.2, 0.3, 0.4), sigma = 0.1, kappa = 50.
  static SimDesign defaults(Family family, Baseline baseline = Baseline::Bernoulli,
                            ControlType control = ControlType::Gender);

  Index num_groups() const { return 4; }
  /// (U, t) of group q in the order of `sizes`.
  static std::pair<int, int> group_cell(Index q);
  static std::string group_label(Index q);
  void check() const;
};

struct SimDataset {
  Dataset data;
  /// Realised random intercept of every subject.
  std::vector<double> xi;
};

/// Independent stream for one replication of a study.
std::mt19937_64 replication_engine(std::uint64_t seed, std::uint64_t replication);

SimDataset generate_dataset(const SimDesign& design, std::mt19937_64& rng);
SimDataset generate_dataset(const SimDesign& design, std::uint64_t seed);

/// Marginal group means of the design population: the expectation over the
/// baseline distribution and the random intercept.
std::array<double, 4> population_marginal_means(const SimDesign& design);

/// Marginal group means given the sampled covariates: the group average of
/// E_xi g^{-1}(x'beta + xi).
std::vector<double> sample_marginal_means(const SimDesign& design, const Dataset& data);

/// Conditional group means given the realised intercepts: the group average
/// of g^{-1}(x'beta + xi_i).
std::vector<double> sample_conditional_means(const SimDesign& design, const Dataset& data,
                                             const std::vector<double>& xi);

/// Per-group results of one replication.
struct GroupRecord {
  double ybar = 0.0;
  double mu = 0.0;       // marginal target
  double lambda = 0.0;   // conditional target
  double mu_star = 0.0;
  double mu_hat = 0.0;
  double mu_se = 0.0;
  std::vector<Interval> ci;  // inverse, direct, [lognormal]
  double lambda_star = 0.0;
  double lambda_hat = 0.0;
  double lambda_se = 0.0;
  std::vector<Interval> pi;  // inverse, direct
};

struct ReplicationRecord {
  bool ok = false;
  std::string error;
  std::array<GroupRecord, 4> groups;
  ParamVector params;
};

/// Generate, fit and estimate for one replication. Fit failures are returned
/// with ok = false.
ReplicationRecord run_replication(const SimDesign& design, std::uint64_t replication);

/// Target used when scoring prediction intervals.
enum class PiTarget {
  /// The replication's realised conditional mean (the defining choice).
  RealisedConditional,
  /// The marginal target instead; used to show that the choice matters.
  Marginal,
};

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

struct GroupSummary {
  std::string label;
  int u = 0;
  int t = 0;
  double truth = 0.0;            // average target over replications
  double population_truth = 0.0; // marginal only; NaN for conditional rows
  MeanSd ybar_bias;
  MeanSd star_bias;
  MeanSd hat_bias;
  double mean_se = 0.0;
  std::vector<double> coverage;  // CP1, CP2, [CP3]
};

struct SimReport {
  Family family = Family::Logistic;
  Baseline baseline = Baseline::Bernoulli;
  ControlType control = ControlType::Gender;
  int reps = 0;
  int failures = 0;
  /// More than 2% of replications failed.
  bool flagged = false;
  std::vector<GroupSummary> marginal;
  std::vector<GroupSummary> conditional;
};

/// Number of worker threads: GLMM_GM_THREADS if set and positive, otherwise
/// the hardware concurrency.
int default_thread_count();

/// Runs every replication (in parallel when threads > 1) and returns the
/// records in replication order.
std::vector<ReplicationRecord> run_replications(const SimDesign& design, int threads = 0);

SimReport summarize(const SimDesign& design, const std::vector<ReplicationRecord>& records,
                    PiTarget pi_target = PiTarget::RealisedConditional);

SimReport run_study(const SimDesign& design, int threads = 0);

}  // namespace glmmgm
