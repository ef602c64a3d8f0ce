#include "glmmgm/report.hpp"

#include "glmmgm/conditional_means.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace glmmgm {

using nlohmann::json;

namespace {

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// NaN and infinities have no JSON number form; they become null.
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string_view to_string(Format format) {
  return format == Format::Csv ? "csv" : "json";
}

Format parse_format(std::string_view name) {
  if (name == "csv") return Format::Csv;
  if (name == "json") return Format::Json;
  throw std::invalid_argument("unknown format '" + std::string(name) + "' (expected csv or json)");
}

std::string csv_number(double value) {
  if (std::isnan(value)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

std::vector<MeansRow> means_table(const FittedModel& fitted, const Dataset& dataset, double alpha) {
  const PredictionStructure structure(dataset, fitted);
  std::vector<MeansRow> rows;
  const GroupIndex& groups = dataset.groups();
  for (Index q = 0; q < groups.num_groups(); ++q) {
    const Eigen::MatrixXd xq = group_design(dataset, q);
    MeansRow row;
    row.group = groups.label(q);
    row.n = groups.size(q);
    double sum = 0.0;
    for (Index obs : groups.members(q)) sum += dataset.y_at(obs);
    row.ybar = sum / static_cast<double>(row.n);
    row.mu_star = mean_at_mean_covariate(fitted, xq);
    row.mu_star_se = std::sqrt(std::max(0.0, mean_at_mean_covariate_variance(fitted, xq)));

    const GroupMeanEstimate marginal = estimate_marginal(fitted, dataset, q, alpha);
    const GroupMeanEstimate conditional =
        estimate_conditional(fitted, dataset, structure, q, alpha);
    row.mu_hat = marginal.point;
    row.mu_se = marginal.se();
    row.lambda_hat = conditional.point;
    row.lambda_se = conditional.se();
    for (const auto& li : marginal.intervals) row.intervals.push_back({"ci_" + li.label, li.interval});
    for (const auto& li : conditional.intervals)
      row.intervals.push_back({"pi_" + li.label, li.interval});
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<std::string> parameter_names(const FittedModel& fitted, const Dataset& dataset) {
  std::vector<std::string> names = dataset.covariate_names();
  if (names.size() != static_cast<std::size_t>(fitted.p())) {
    names.clear();
    for (Index c = 0; c < fitted.p(); ++c) names.push_back("beta" + std::to_string(c));
  }
  names.emplace_back("sigma2");
  if (fitted.family == Family::NegBinomial) names.emplace_back("kappa");
  return names;
}

std::string format_fit(const FittedModel& fitted, const Dataset& dataset, Format format) {
  const auto names = parameter_names(fitted, dataset);
  Eigen::VectorXd est(static_cast<Index>(names.size()));
  est.head(fitted.p()) = fitted.params.beta;
  est(fitted.p()) = fitted.params.sigma2;
  if (fitted.family == Family::NegBinomial) est(fitted.p() + 1) = *fitted.params.kappa;
  const Eigen::VectorXd se = fitted.standard_errors();

  if (format == Format::Csv) {
    std::ostringstream out;
    out << "parameter,estimate,se\n";
    for (std::size_t k = 0; k < names.size(); ++k) {
      const auto i = static_cast<Index>(k);
      out << names[k] << ',' << csv_number(est(i)) << ',' << csv_number(se(i)) << '\n';
    }
    out << "loglik," << csv_number(fitted.loglik) << ",NA\n";
    return out.str();
  }

  json j;
  j["family"] = std::string(to_string(fitted.family));
  json params = json::array();
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto i = static_cast<Index>(k);
    params.push_back({{"name", names[k]}, {"estimate", number(est(i))}, {"se", number(se(i))}});
  }
  j["parameters"] = params;
  json cov = json::array();
  for (Index r = 0; r < fitted.cov_psi.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < fitted.cov_psi.cols(); ++c) row.push_back(number(fitted.cov_psi(r, c)));
    cov.push_back(row);
  }
  j["covariance"] = cov;
  j["loglik"] = number(fitted.loglik);
  j["converged"] = fitted.converged;
  j["iterations"] = fitted.iterations;
  const FitDiagnostics& d = fitted.diagnostics;
  j["diagnostics"] = {{"optimizer", std::string(to_string(d.optimizer_used))},
                      {"score_norm", number(d.score_norm)},
                      {"information_condition", number(d.information_condition)},
                      {"singular_information", d.singular_information},
                      {"sigma2_at_boundary", d.sigma2_at_boundary},
                      {"kappa_at_boundary", d.kappa_at_boundary},
                      {"newton_polish", d.newton_polish},
                      {"notes", d.notes}};
  return dump(j);
}

std::string format_means(const std::vector<MeansRow>& rows, double alpha, Format format) {
  if (format == Format::Csv) {
    std::ostringstream out;
    out << "group,n,Ybar,mu_star,mu_star_se,lambda_hat,lambda_se,mu_hat,mu_se";
    // Interval columns: the union of labels over rows, in first-seen order.
    std::vector<std::string> labels;
    for (const auto& row : rows)
      for (const auto& li : row.intervals)
        if (std::find(labels.begin(), labels.end(), li.label) == labels.end())
          labels.push_back(li.label);
    for (const auto& l : labels) out << ',' << l << "_lo," << l << "_hi";
    out << '\n';
    for (const auto& row : rows) {
      out << row.group << ',' << row.n << ',' << csv_number(row.ybar) << ','
          << csv_number(row.mu_star) << ',' << csv_number(row.mu_star_se) << ','
          << csv_number(row.lambda_hat) << ',' << csv_number(row.lambda_se) << ','
          << csv_number(row.mu_hat) << ',' << csv_number(row.mu_se);
      for (const auto& l : labels) {
        auto it = std::find_if(row.intervals.begin(), row.intervals.end(),
                               [&](const LabeledInterval& li) { return li.label == l; });
        if (it == row.intervals.end())
          out << ",NA,NA";
        else
          out << ',' << csv_number(it->interval.lower) << ',' << csv_number(it->interval.upper);
      }
      out << '\n';
    }
    return out.str();
  }

  json j;
  j["alpha"] = alpha;
  json groups = json::array();
  for (const auto& row : rows) {
    json g = {{"group", row.group},
              {"n", row.n},
              {"Ybar", number(row.ybar)},
              {"mu_star", number(row.mu_star)},
              {"mu_star_se", number(row.mu_star_se)},
              {"lambda_hat", number(row.lambda_hat)},
              {"lambda_se", number(row.lambda_se)},
              {"mu_hat", number(row.mu_hat)},
              {"mu_se", number(row.mu_se)}};
    json iv = json::object();
    for (const auto& li : row.intervals)
      iv[li.label] = {{"lo", number(li.interval.lower)}, {"hi", number(li.interval.upper)}};
    g["intervals"] = iv;
    groups.push_back(g);
  }
  j["groups"] = groups;
  return dump(j);
}

std::string format_validation(const ValidationReport& report, Format format) {
  if (format == Format::Csv) {
    std::ostringstream out;
    out << "code,message,observation\n";
    for (const auto& v : report.violations) {
      std::string msg = v.message;
      std::replace(msg.begin(), msg.end(), '"', '\'');
      out << v.code << ",\"" << msg << "\"," << (v.observation ? std::to_string(*v.observation) : "NA")
          << '\n';
    }
    return out.str();
  }
  json j;
  j["ok"] = report.ok();
  json vs = json::array();
  for (const auto& v : report.violations) {
    json e = {{"code", v.code}, {"message", v.message}};
    e["observation"] = v.observation ? json(*v.observation) : json(nullptr);
    vs.push_back(e);
  }
  j["violations"] = vs;
  return dump(j);
}

std::string format_sim(const SimReport& report, Format format) {
  const int t1 = report.baseline == Baseline::Bernoulli ? 1 : 2;
  const int t2 = report.control == ControlType::Gender ? 1 : 2;
  auto rows = [&](auto&& emit) {
    for (const auto& g : report.marginal) emit("marginal", g);
    for (const auto& g : report.conditional) emit("conditional", g);
  };

  if (format == Format::Csv) {
    std::ostringstream out;
    out << "T1,T2,U,t,kind,truth,ybar_bias,ybar_sd,star_bias,star_sd,hat_bias,hat_sd,mean_se,"
           "CP1,CP2,CP3\n";
    rows([&](const char* kind, const GroupSummary& g) {
      out << t1 << ',' << t2 << ',' << g.u << ',' << g.t << ',' << kind << ','
          << csv_number(g.truth) << ',' << csv_number(g.ybar_bias.mean) << ','
          << csv_number(g.ybar_bias.sd) << ',' << csv_number(g.star_bias.mean) << ','
          << csv_number(g.star_bias.sd) << ',' << csv_number(g.hat_bias.mean) << ','
          << csv_number(g.hat_bias.sd) << ',' << csv_number(g.mean_se);
      for (std::size_t k = 0; k < 3; ++k)
        out << ',' << (k < g.coverage.size() ? csv_number(g.coverage[k]) : "NA");
      out << '\n';
    });
    return out.str();
  }

  json j;
  j["family"] = std::string(to_string(report.family));
  j["T1"] = t1;
  j["T2"] = t2;
  j["baseline"] = std::string(to_string(report.baseline));
  j["design"] = std::string(to_string(report.control));
  j["reps"] = report.reps;
  j["failures"] = report.failures;
  j["flagged"] = report.flagged;
  json out = json::array();
  rows([&](const char* kind, const GroupSummary& g) {
    json r = {{"kind", kind},
              {"group", g.label},
              {"U", g.u},
              {"t", g.t},
              {"truth", number(g.truth)},
              {"population_truth", number(g.population_truth)},
              {"ybar_bias", {{"mean", number(g.ybar_bias.mean)}, {"sd", number(g.ybar_bias.sd)}}},
              {"star_bias", {{"mean", number(g.star_bias.mean)}, {"sd", number(g.star_bias.sd)}}},
              {"hat_bias", {{"mean", number(g.hat_bias.mean)}, {"sd", number(g.hat_bias.sd)}}},
              {"mean_se", number(g.mean_se)}};
    json cp = json::array();
    for (double c : g.coverage) cp.push_back(number(c));
    r["coverage"] = cp;
    out.push_back(r);
  });
  j["groups"] = out;
  return dump(j);
}

std::string format_error(std::string_view code, std::string_view message, std::optional<Index> row,
                         std::string_view column) {
  json e = {{"code", std::string(code)}, {"message", std::string(message)}};
  if (row) e["row"] = *row;
  if (!column.empty()) e["column"] = std::string(column);
  return json({{"error", e}}).dump() + "\n";
}

}  // namespace glmmgm
