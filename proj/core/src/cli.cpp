#include "glmmgm/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <ostream>
#include <sstream>

namespace glmmgm {

namespace {

// Failure carrying its exit code and error record fields.
struct CommandError {
  int exit_code;
  std::string code;
  std::string message;
  std::optional<Index> row;
  std::string column;
};

void emit(const RunConfig& config, const std::string& text, std::ostream& out) {
  if (config.out.empty()) {
    out << text;
    return;
  }
  std::ofstream file(config.out, std::ios::binary);
  if (!file) throw CommandError{kExitIo, "io", "cannot open '" + config.out + "' for writing", {}, {}};
  file << text;
  if (!file) throw CommandError{kExitIo, "io", "failed writing '" + config.out + "'", {}, {}};
}

Dataset load(const RunConfig& config) {
  if (config.input.empty())
    throw CommandError{kExitValidation, "config", "--input is required", {}, {}};
  try {
    return read_dataset(config.input, config.columns);
  } catch (const ParseError& e) {
    throw CommandError{kExitIo, "parse", e.what(), e.row(), e.column()};
  } catch (const std::invalid_argument& e) {
    throw CommandError{kExitIo, "parse", e.what(), {}, {}};
  }
}

ModelSpec spec_for(const RunConfig& config, const Dataset& data) {
  return ModelSpec{config.family, data.num_covariates(), true};
}

void require_valid(const Dataset& data, const ModelSpec& spec, std::ostream& err) {
  const ValidationReport report = validate(data, spec);
  if (report.ok()) return;
  err << format_validation(report, Format::Json);
  const Violation& first = report.violations.front();
  throw CommandError{kExitValidation, first.code, first.message, first.observation, {}};
}

FittedModel fit_checked(const RunConfig& config, const Dataset& data, std::ostream& err) {
  const ModelSpec spec = spec_for(config, data);
  require_valid(data, spec, err);
  FittedModel fitted = fit(data, spec, config.fit);
  if (!fitted.converged)
    throw CommandError{kExitNonConvergence, "nonconvergence",
                       "fit did not converge after " + std::to_string(fitted.iterations) +
                           " iterations (score norm " +
                           std::to_string(fitted.diagnostics.score_norm) + ")",
                       {}, {}};
  return fitted;
}

int dispatch(const RunConfig& config, std::ostream& out, std::ostream& err) {
  switch (config.command) {
    case Command::Validate: {
      const Dataset data = load(config);
      const ValidationReport report = validate(data, spec_for(config, data));
      emit(config, format_validation(report, config.format), out);
      if (!report.ok()) {
        const Violation& first = report.violations.front();
        err << format_error(first.code, first.message, first.observation);
        return kExitValidation;
      }
      return kExitSuccess;
    }
    case Command::Fit: {
      const Dataset data = load(config);
      const FittedModel fitted = fit_checked(config, data, err);
      emit(config, format_fit(fitted, data, config.format), out);
      return kExitSuccess;
    }
    case Command::Means: {
      const Dataset data = load(config);
      const FittedModel fitted = fit_checked(config, data, err);
      emit(config, format_means(means_table(fitted, data, config.alpha), config.alpha, config.format),
           out);
      return kExitSuccess;
    }
    case Command::Simulate: {
      SimDesign design = SimDesign::defaults(config.family, config.baseline, config.design);
      design.reps = config.reps;
      design.seed = config.seed;
      design.alpha = config.alpha;
      design.fit = config.fit;
      design.check();
      if (!config.dataset_out.empty()) {
        std::ofstream file(config.dataset_out, std::ios::binary);
        if (!file)
          throw CommandError{kExitIo, "io", "cannot open '" + config.dataset_out + "' for writing",
                             {}, {}};
        auto rng = replication_engine(design.seed, 0);
        write_dataset(file, generate_dataset(design, rng).data);
      }
      const SimReport report = run_study(design, config.threads);
      emit(config, format_sim(report, config.format), out);
      return kExitSuccess;
    }
  }
  return kExitSuccess;
}

}  // namespace

std::string_view to_string(Command command) {
  switch (command) {
    case Command::Fit: return "fit";
    case Command::Means: return "means";
    case Command::Simulate: return "simulate";
    case Command::Validate: return "validate";
  }
  return "?";
}

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(config, out, err);
  } catch (const CommandError& e) {
    err << format_error(e.code, e.message, e.row, e.column);
    return e.exit_code;
  } catch (const std::invalid_argument& e) {
    err << format_error("invalid", e.what());
    return kExitValidation;
  } catch (const std::domain_error& e) {
    err << format_error("invalid", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    err << format_error("internal", e.what());
    return kExitNonConvergence;
  }
}

int run_command_line(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Group means for random-intercept logistic and negative binomial models",
               "glmm_gm"};
  app.require_subcommand(1, 1);
  app.set_config("--config", "", "Configuration file (key = value); flags override it");

  RunConfig config;
  std::string family = "logistic";
  std::string format = "json";
  std::string design = "gender";
  std::string baseline = "bernoulli";
  std::vector<std::string> covariates;
  std::vector<std::string> group_by;
  bool no_intercept = false;

  app.add_option("--input", config.input, "Input CSV");
  app.add_option("--family", family, "logistic | negbin");
  app.add_option("--covariates", covariates, "Covariate columns (intercept is added)")->delimiter(',');
  app.add_option("--group-by", group_by, "Grouping columns")->delimiter(',');
  app.add_option("--subject-column", config.columns.subject, "Subject id column");
  app.add_option("--response-column", config.columns.response, "Response column");
  app.add_flag("--no-intercept", no_intercept, "Do not add an intercept column");
  app.add_option("--alpha", config.alpha, "Interval level is 1 - alpha")->check(CLI::Range(0.0, 1.0));
  app.add_option("--out", config.out, "Report file (default: standard output)");
  app.add_option("--format", format, "csv | json");
  app.add_option("--seed", config.seed, "Simulation seed");
  app.add_option("--reps", config.reps, "Simulation replications")->check(CLI::PositiveNumber);
  app.add_option("--design", design, "time | gender");
  app.add_option("--baseline", baseline, "bernoulli | uniform");
  app.add_option("--dataset-out", config.dataset_out, "simulate: write replication 0 data here");
  app.add_option("--threads", config.threads, "simulate: worker threads (0 = GLMM_GM_THREADS)");
  app.add_option("--max-iter", config.fit.max_iter, "Optimizer iteration limit");
  app.add_option("--param-tol", config.fit.param_tol, "Score-norm convergence tolerance");
  app.add_option("--gh-nodes", config.fit.gh_nodes, "Gauss-Hermite nodes");

  app.add_subcommand("fit", "Fit the model and report estimates and standard errors")->fallthrough();
  app.add_subcommand("means", "Marginal and conditional group means with intervals")->fallthrough();
  app.add_subcommand("simulate", "Coverage study on a synthetic design")->fallthrough();
  app.add_subcommand("validate", "Check the dataset against the model")->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << format_error("usage", e.what());
    return kExitValidation;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  if (name == "fit") config.command = Command::Fit;
  else if (name == "means") config.command = Command::Means;
  else if (name == "simulate") config.command = Command::Simulate;
  else config.command = Command::Validate;

  try {
    config.family = parse_family(family);
    config.format = parse_format(format);
    config.design = parse_control(design);
    config.baseline = parse_baseline(baseline);
  } catch (const std::exception& e) {
    err << format_error("usage", e.what());
    return kExitValidation;
  }
  config.columns.covariates = covariates;
  config.columns.group_by = group_by;
  config.columns.intercept = !no_intercept;
  return run(config, out, err);
}

}  // namespace glmmgm
