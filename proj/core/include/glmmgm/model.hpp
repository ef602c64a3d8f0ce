#pragma once

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace glmmgm {

using Index = Eigen::Index;

/// Response family. The link is always the canonical one: logit for
/// Logistic, log for NegBinomial.
enum class Family { Logistic, NegBinomial };

std::string_view to_string(Family family);

/// Parses "logistic" or "negbin" (also accepts "negative-binomial").
/// Throws std::invalid_argument on anything else.
Family parse_family(std::string_view name);

/// All observations of one subject. Rows of `x` line up with entries of
/// `y`, `w` and `group`.
struct SubjectBlock {
  std::string id;
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  Eigen::VectorXd w;
  std::vector<Index> group;

  Index size() const { return y.size(); }
};

/// Partition of the stacked observation indices into Q groups.
class GroupIndex {
 public:
  GroupIndex() = default;
  GroupIndex(std::vector<std::string> labels, std::vector<std::vector<Index>> members);

  Index num_groups() const { return static_cast<Index>(labels_.size()); }
  const std::string& label(Index q) const { return labels_.at(static_cast<std::size_t>(q)); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::span<const Index> members(Index q) const;
  Index size(Index q) const { return static_cast<Index>(members(q).size()); }
  std::optional<Index> find(std::string_view label) const;

 private:
  std::vector<std::string> labels_;
  std::vector<std::vector<Index>> members_;
};

/// Immutable collection of subject blocks. Observations are numbered by
/// stacking subjects in order, so subject i owns [offset(i), offset(i) + n_i).
///
/// The constructor only enforces structural consistency (matching
/// dimensions, group ids in range). Statistical requirements such as full
/// column rank or the response domain are reported by validate().
class Dataset {
 public:
  Dataset(std::vector<SubjectBlock> subjects, std::vector<std::string> group_labels,
          std::vector<std::string> covariate_names = {});

  Index num_subjects() const { return static_cast<Index>(subjects_.size()); }
  Index num_obs() const { return num_obs_; }
  Index num_covariates() const { return p_; }

  const SubjectBlock& subject(Index i) const { return subjects_.at(static_cast<std::size_t>(i)); }
  const std::vector<SubjectBlock>& subjects() const { return subjects_; }
  std::optional<Index> find_subject(std::string_view id) const;

  Index offset(Index i) const { return offsets_.at(static_cast<std::size_t>(i)); }
  Index subject_of(Index obs) const { return obs_subject_.at(static_cast<std::size_t>(obs)); }

  const GroupIndex& groups() const { return groups_; }
  const std::vector<std::string>& covariate_names() const { return covariate_names_; }

  Eigen::MatrixXd stacked_x() const;
  Eigen::VectorXd stacked_y() const;
  Eigen::VectorXd stacked_w() const;
  Eigen::VectorXd x_row(Index obs) const;
  double y_at(Index obs) const;

 private:
  std::vector<SubjectBlock> subjects_;
  std::vector<std::string> covariate_names_;
  std::vector<Index> offsets_;
  std::vector<Index> obs_subject_;
  GroupIndex groups_;
  Index num_obs_ = 0;
  Index p_ = 0;
};

struct ModelSpec {
  Family family = Family::Logistic;
  Index p = 0;
  /// Always true: one Gaussian intercept per subject is the only supported
  /// random-effect structure.
  bool random_intercept = true;
};

/// psi = (beta, sigma2, [kappa]). sigma0_2 is the GLM dispersion, fixed at 1
/// for both supported families.
struct ParamVector {
  Eigen::VectorXd beta;
  double sigma2 = 0.0;
  std::optional<double> kappa;
  double sigma0_2 = 1.0;

  double sigma() const;
  /// Throws std::invalid_argument if sigma2 < 0, kappa <= 0, or kappa is
  /// present/absent contrary to the family.
  void check(Family family) const;
};

/// x'beta + b. Throws std::invalid_argument when x has the wrong length.
double linear_predictor(const ParamVector& params, const Eigen::Ref<const Eigen::VectorXd>& x,
                        double b);

/// Canonical inverse link, overflow-safe for any finite eta.
double inverse_link(Family family, double eta);

/// d g^{-1}(eta) / d eta.
double inverse_link_derivative(Family family, double eta);

inline constexpr double kRankTolerance = 1e-10;

struct Violation {
  std::string code;
  std::string message;
  std::optional<Index> observation;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  bool has(std::string_view code) const;
};

/// Checks every dataset invariant against the model: non-empty subjects,
/// full column rank of the stacked design (singular values relative to the
/// largest, tolerance rank_tol), the group partition, positive weights and
/// the response domain of the family.
ValidationReport validate(const Dataset& dataset, const ModelSpec& spec,
                          double rank_tol = kRankTolerance);

}  // namespace glmmgm
