#include "profmatch/estimators.hpp"

#include <cmath>
#include <string>

#include "profmatch/error.hpp"
#include "profmatch/numerics.hpp"
#include "profmatch/parallel.hpp"

namespace profmatch {

namespace {

constexpr double kZ975 = 1.96;

std::string format_optional(const std::optional<double>& value, int digits) {
  return value ? format_significant(*value, digits) : std::string();
}

Eigen::VectorXd to_vector(std::span<const double> values) {
  return Eigen::Map<const Eigen::VectorXd>(values.data(),
                                           static_cast<Eigen::Index>(values.size()));
}

GlmFit fit_arm(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
               const char* arm) {
  try {
    return fit_ols(with_intercept(x), y);
  } catch (Error& e) {
    e.add_context(std::string(arm) + " arm outcome model");
    throw;
  }
}

void check_lengths(std::span<const double> outcome,
                   std::span<const double> treatment,
                   std::span<const double> weights) {
  if (outcome.size() != treatment.size() || outcome.size() != weights.size())
    throw ShapeError("outcome, treatment and weights differ in length");
}

}  // namespace

const char* to_string(Method method) {
  switch (method) {
    case Method::pm:
      return "pm";
    case Method::apm:
      return "apm";
    case Method::iow:
      return "iow";
    case Method::aiow:
      return "aiow";
  }
  return "unknown";
}

Method parse_method(const std::string& text) {
  if (text == "pm") return Method::pm;
  if (text == "apm") return Method::apm;
  if (text == "iow") return Method::iow;
  if (text == "aiow") return Method::aiow;
  throw DomainError("unknown method '" + text + "' (expected pm, apm, iow, aiow)");
}

std::string estimate_csv_header() {
  return "method,estimate,se,ci_low,ci_high,ess,n_boot_used,n_boot_failed";
}

std::string to_csv_row(const EstimateReport& r, int digits) {
  return std::string(to_string(r.method)) + "," +
         format_significant(r.estimate, digits) + "," + format_optional(r.se, digits) +
         "," + format_optional(r.ci_low, digits) + "," +
         format_optional(r.ci_high, digits) + "," + format_significant(r.ess, digits) +
         "," + std::to_string(r.n_boot_used) + "," +
         std::to_string(r.n_boot_failed);
}

EstimateReport estimate_pm(std::span<const double> treated,
                           std::span<const double> control) {
  if (treated.empty() || control.empty())
    throw EmptyArmError(std::string("matched ") +
                        (treated.empty() ? "treated" : "control") +
                        " arm is empty");
  EstimateReport r;
  r.method = Method::pm;
  r.estimate = mean(treated) - mean(control);
  r.ess = static_cast<double>(treated.size() + control.size());
  return r;
}

EstimateReport estimate_apm(const Eigen::MatrixXd& x_treated,
                            const Eigen::VectorXd& y_treated,
                            const Eigen::MatrixXd& x_control,
                            const Eigen::VectorXd& y_control) {
  if (x_treated.rows() == 0 || x_control.rows() == 0)
    throw EmptyArmError("augmented matching estimate needs both arms");
  if (x_treated.cols() != x_control.cols())
    throw ShapeError("augmented matching estimate: arms differ in covariates");
  const GlmFit g1 = fit_arm(x_treated, y_treated, "treated");
  const GlmFit g0 = fit_arm(x_control, y_control, "control");
  Eigen::MatrixXd pooled(x_treated.rows() + x_control.rows(), x_treated.cols());
  pooled << x_treated, x_control;
  const Eigen::MatrixXd design = with_intercept(pooled);
  EstimateReport r;
  r.method = Method::apm;
  r.estimate = predict(g1, design).mean() - predict(g0, design).mean();
  r.ess = static_cast<double>(pooled.rows());
  return r;
}

IowWeights fit_iow_weights(const Dataset& cohort,
                           std::span<const FeatureSpec> selection_features,
                           Link link, const std::string& selection_column,
                           const std::string& treatment_column) {
  IowWeights out;
  const auto s = cohort.column(selection_column);
  out.trial_rows = cohort.rows_where(selection_column, 1.0);
  if (out.trial_rows.empty() || out.trial_rows.size() == cohort.rows())
    throw DegenerateResponseError(
        "inverse odds weights need both selected and unselected cohort rows");

  const Eigen::MatrixXd features = eval_features(cohort, selection_features);
  try {
    out.selection = fit_binary_glm(features, to_vector(s), link);
  } catch (Error& e) {
    e.add_context("selection model");
    throw;
  }

  const auto z = cohort.column(treatment_column);
  Eigen::VectorXd z_trial(static_cast<Eigen::Index>(out.trial_rows.size()));
  for (std::size_t i = 0; i < out.trial_rows.size(); ++i)
    z_trial[static_cast<Eigen::Index>(i)] = z[out.trial_rows[i]];
  try {
    out.treatment = fit_binary_glm(
        Eigen::MatrixXd::Ones(z_trial.size(), 1), z_trial, link);
  } catch (Error& e) {
    e.add_context("treatment model");
    throw;
  }
  const double e1 = predict(out.treatment, Eigen::MatrixXd::Ones(1, 1))[0];

  Eigen::MatrixXd trial_features(static_cast<Eigen::Index>(out.trial_rows.size()),
                                 features.cols());
  for (std::size_t i = 0; i < out.trial_rows.size(); ++i)
    trial_features.row(static_cast<Eigen::Index>(i)) =
        features.row(static_cast<Eigen::Index>(out.trial_rows[i]));
  const Eigen::VectorXd p = predict(out.selection, trial_features);

  out.weights.resize(out.trial_rows.size());
  for (std::size_t i = 0; i < out.trial_rows.size(); ++i) {
    const double pi = p[static_cast<Eigen::Index>(i)];
    if (!(pi > 0.0))
      throw PositivityError("fitted selection probability is 0 for cohort row " +
                            std::to_string(out.trial_rows[i] + 1));
    const double e = z_trial[static_cast<Eigen::Index>(i)] == 1.0 ? e1 : 1.0 - e1;
    out.weights[i] = ((1.0 - pi) / pi) / e;
  }
  return out;
}

EstimateReport estimate_iow(std::span<const double> outcome,
                            std::span<const double> treatment,
                            std::span<const double> weights) {
  check_lengths(outcome, treatment, weights);
  double sw[2] = {0.0, 0.0};
  double swy[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < outcome.size(); ++i) {
    const int arm = treatment[i] == 1.0 ? 1 : 0;
    sw[arm] += weights[i];
    swy[arm] += weights[i] * outcome[i];
  }
  if (!(sw[0] > 0.0) || !(sw[1] > 0.0))
    throw DegenerateWeightsError(std::string(sw[1] > 0.0 ? "control" : "treated") +
                                 " arm has zero total weight");
  EstimateReport r;
  r.method = Method::iow;
  r.estimate = swy[1] / sw[1] - swy[0] / sw[0];
  r.ess = kish_ess(weights);
  return r;
}

EstimateReport estimate_aiow(const Eigen::MatrixXd& x_trial,
                             std::span<const double> outcome,
                             std::span<const double> treatment,
                             std::span<const double> weights,
                             const Eigen::MatrixXd& x_target) {
  check_lengths(outcome, treatment, weights);
  if (x_trial.rows() != static_cast<Eigen::Index>(outcome.size()))
    throw ShapeError("augmented weighting: covariate rows differ from outcomes");
  if (x_target.rows() == 0) throw EmptyInputError("augmented weighting: no target rows");

  std::vector<Eigen::Index> arm_rows[2];
  for (std::size_t i = 0; i < outcome.size(); ++i)
    arm_rows[treatment[i] == 1.0 ? 1 : 0].push_back(static_cast<Eigen::Index>(i));
  GlmFit g[2];
  for (int arm = 0; arm < 2; ++arm) {
    const auto& rows = arm_rows[arm];
    if (rows.empty())
      throw EmptyArmError(std::string(arm ? "treated" : "control") + " arm is empty");
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), x_trial.cols());
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      x.row(static_cast<Eigen::Index>(i)) = x_trial.row(rows[i]);
      y[static_cast<Eigen::Index>(i)] = outcome[static_cast<std::size_t>(rows[i])];
    }
    g[arm] = fit_arm(x, y, arm ? "treated" : "control");
  }

  const Eigen::MatrixXd target_design = with_intercept(x_target);
  double estimate =
      (predict(g[1], target_design) - predict(g[0], target_design)).mean();

  const Eigen::MatrixXd trial_design = with_intercept(x_trial);
  const Eigen::VectorXd fitted[2] = {predict(g[0], trial_design),
                                     predict(g[1], trial_design)};
  double sw[2] = {0.0, 0.0};
  double swr[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < outcome.size(); ++i) {
    const int arm = treatment[i] == 1.0 ? 1 : 0;
    sw[arm] += weights[i];
    swr[arm] += weights[i] * (outcome[i] - fitted[arm][static_cast<Eigen::Index>(i)]);
  }
  if (!(sw[0] > 0.0) || !(sw[1] > 0.0))
    throw DegenerateWeightsError(std::string(sw[1] > 0.0 ? "control" : "treated") +
                                 " arm has zero total weight");
  estimate += swr[1] / sw[1] - swr[0] / sw[0];

  EstimateReport r;
  r.method = Method::aiow;
  r.estimate = estimate;
  r.ess = kish_ess(weights);
  return r;
}

Eigen::MatrixXd design_matrix(const Dataset& data,
                              std::span<const std::string> columns,
                              std::span<const std::size_t> rows) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const auto values = data.column(columns[c]);
    for (std::size_t i = 0; i < rows.size(); ++i)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = values[rows[i]];
  }
  return x;
}

std::vector<std::size_t> bootstrap_rows(std::size_t n, std::uint64_t master_seed,
                                        std::uint64_t replicate,
                                        std::uint64_t resample) {
  RngStream stream = derive_substream(master_seed, bootstrap_stream_id(replicate, resample));
  std::vector<std::size_t> rows(n);
  for (auto& r : rows) {
    r = static_cast<std::size_t>(stream.uniform01() * static_cast<double>(n));
    if (r >= n) r = n - 1;
  }
  return rows;
}

EstimateReport bootstrap_ci(EstimateReport point, const Dataset& cohort,
                            const ResampleEstimator& estimator,
                            const BootstrapOptions& options) {
  if (options.resamples < 2)
    throw DomainError("bootstrap needs at least 2 resamples");
  if (options.resamples > kBootstrapStreamStride)
    throw DomainError("bootstrap supports at most " +
                      std::to_string(kBootstrapStreamStride) + " resamples");
  if (cohort.rows() == 0) throw EmptyInputError("bootstrap of an empty cohort");

  std::vector<double> estimates(options.resamples, 0.0);
  std::vector<std::uint8_t> ok(options.resamples, 0);
  parallel_for(options.resamples, options.workers, [&](std::size_t b) {
    const auto rows = bootstrap_rows(cohort.rows(), options.master_seed,
                                     options.replicate, b);
    try {
      estimates[b] = estimator(cohort.select_rows(rows));
      ok[b] = std::isfinite(estimates[b]) ? 1 : 0;
    } catch (const Error&) {
      ok[b] = 0;
    }
  });

  std::vector<double> kept;
  for (std::size_t b = 0; b < options.resamples; ++b)
    if (ok[b]) kept.push_back(estimates[b]);
  point.n_boot_used = kept.size();
  point.n_boot_failed = options.resamples - kept.size();
  if (2 * point.n_boot_failed > options.resamples || kept.size() < 2)
    throw BootstrapDegenerateError(std::to_string(point.n_boot_failed) + " of " +
                                   std::to_string(options.resamples) +
                                   " bootstrap resamples failed");
  const double se = sample_sd(kept);
  point.se = se;
  point.ci_low = point.estimate - kZ975 * se;
  point.ci_high = point.estimate + kZ975 * se;
  return point;
}

}  // namespace profmatch
