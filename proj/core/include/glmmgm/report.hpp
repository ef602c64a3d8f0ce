#pragma once

#include "glmmgm/fitter.hpp"
#include "glmmgm/marginal_means.hpp"
#include "glmmgm/simulation.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace glmmgm {

/// Output encoding. JSON numbers round-trip exactly; CSV numbers carry six
/// significant digits.
enum class Format { Csv, Json };

std::string_view to_string(Format format);
/// Parses "csv" or "json"; throws std::invalid_argument otherwise.
Format parse_format(std::string_view name);

/// One row of the group means table.
struct MeansRow {
  std::string group;
  Index n = 0;
  double ybar = 0.0;
  double mu_star = 0.0;
  double mu_star_se = 0.0;
  double lambda_hat = 0.0;
  double lambda_se = 0.0;
  double mu_hat = 0.0;
  double mu_se = 0.0;
  /// Confidence intervals ("ci_inverse", "ci_direct", ["ci_lognormal"])
  /// followed by prediction intervals ("pi_inverse", "pi_direct").
  std::vector<LabeledInterval> intervals;
};

/// Marginal and conditional estimates for every group of the dataset.
std::vector<MeansRow> means_table(const FittedModel& fitted, const Dataset& dataset,
                                  double alpha = kDefaultAlpha);

/// Parameter names in the order of cov_psi: covariate names, sigma2, [kappa].
std::vector<std::string> parameter_names(const FittedModel& fitted, const Dataset& dataset);

std::string format_fit(const FittedModel& fitted, const Dataset& dataset, Format format);
std::string format_means(const std::vector<MeansRow>& rows, double alpha, Format format);
std::string format_validation(const ValidationReport& report, Format format);
/// Columns T1, T2, U, t, kind, truth, then mean and SD of the Ybar, star and
/// hat deviations, the mean SE and CP1..CP3.
std::string format_sim(const SimReport& report, Format format);

/// Machine-readable error record, always JSON.
std::string format_error(std::string_view code, std::string_view message,
                         std::optional<Index> row = std::nullopt, std::string_view column = {});

/// Six-significant-digit rendering used by every CSV writer.
std::string csv_number(double value);

}  // namespace glmmgm
