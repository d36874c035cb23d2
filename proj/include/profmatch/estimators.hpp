#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "profmatch/balance.hpp"
#include "profmatch/dataset.hpp"
#include "profmatch/glm.hpp"

namespace profmatch {

enum class Method { pm, apm, iow, aiow };

const char* to_string(Method method);
/// Accepts "pm", "apm", "iow", "aiow"; DomainError otherwise.
Method parse_method(const std::string& text);

struct EstimateReport {
  Method method = Method::pm;
  double estimate = 0.0;
  /// Kish effective sample size; the matched count for profile matching.
  double ess = 0.0;
  std::optional<double> se;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  std::size_t n_boot_used = 0;
  std::size_t n_boot_failed = 0;
};

/// "method,estimate,se,ci_low,ci_high,ess,n_boot_used,n_boot_failed"
std::string estimate_csv_header();
/// Absent values print as empty fields. `digits` significant digits; 17
/// round-trips a double.
std::string to_csv_row(const EstimateReport& report, int digits = 6);

/// Difference in means of the matched arms; ess = total matched count.
/// Throws EmptyArmError when an arm is empty.
EstimateReport estimate_pm(std::span<const double> treated,
                           std::span<const double> control);

/// Per-arm least squares with an intercept on the given covariates; both fits
/// predict on the union of the matched arms and the estimate is the
/// difference of the mean predictions. Fit errors name the arm.
EstimateReport estimate_apm(const Eigen::MatrixXd& x_treated,
                            const Eigen::VectorXd& y_treated,
                            const Eigen::MatrixXd& x_control,
                            const Eigen::VectorXd& y_control);

struct IowWeights {
  /// Cohort rows with S = 1, in cohort order; weights run parallel.
  std::vector<std::size_t> trial_rows;
  std::vector<double> weights;
  GlmFit selection;
  GlmFit treatment;
};

/// Inverse-odds weights for the trial rows:
///   w_i = [(1 - p(X_i)) / p(X_i)] / e(Z_i),
/// with p from a binary regression of S on the features over the whole
/// cohort (no intercept is added; include a constant feature for one) and e
/// from an intercept-only regression of Z on the trial rows, e(1) = e and
/// e(0) = 1 - e. Throws PositivityError when some trial p is 0.
IowWeights fit_iow_weights(const Dataset& cohort,
                           std::span<const FeatureSpec> selection_features,
                           Link link, const std::string& selection_column = "S",
                           const std::string& treatment_column = "Z");

/// Weighted (Hajek) difference of arm means; ess = Kish over all weights.
/// Throws DegenerateWeightsError when an arm's weight sums to zero.
EstimateReport estimate_iow(std::span<const double> outcome,
                            std::span<const double> treatment,
                            std::span<const double> weights);

/// Augmented inverse-odds estimate:
///   mean over target rows of [g1(x) - g0(x)]
///   + sum_{Z=1} w (Y - g1(X)) / sum_{Z=1} w
///   - sum_{Z=0} w (Y - g0(X)) / sum_{Z=0} w,
/// where g_z is least squares with an intercept on arm z of the trial.
EstimateReport estimate_aiow(const Eigen::MatrixXd& x_trial,
                             std::span<const double> outcome,
                             std::span<const double> treatment,
                             std::span<const double> weights,
                             const Eigen::MatrixXd& x_target);

/// Rows of `data` as a matrix, one column per named column.
Eigen::MatrixXd design_matrix(const Dataset& data,
                              std::span<const std::string> columns,
                              std::span<const std::size_t> rows);

/// Re-runs an estimator on a resample of the cohort and returns the
/// estimate.
using ResampleEstimator = std::function<double(const Dataset& resample)>;

struct BootstrapOptions {
  std::size_t resamples = 200;
  std::uint64_t master_seed = 0;
  /// Resample b draws from stream bootstrap_stream_id(replicate, b).
  std::uint64_t replicate = 0;
  /// Threads for the resamples; 1 keeps everything on the caller's thread.
  std::size_t workers = 1;
};

/// Nonparametric bootstrap over cohort rows. se is the sd (n - 1) of the
/// successful resample estimates and the interval is point +/- 1.96 se.
/// Resamples whose estimator throws a library error are dropped and
/// counted; more than half failing raises BootstrapDegenerateError. Needs at
/// least 2 resamples.
EstimateReport bootstrap_ci(EstimateReport point, const Dataset& cohort,
                            const ResampleEstimator& estimator,
                            const BootstrapOptions& options);

/// The bootstrap row draw for one resample: n indices uniform on [0, n).
std::vector<std::size_t> bootstrap_rows(std::size_t n, std::uint64_t master_seed,
                                        std::uint64_t replicate,
                                        std::uint64_t resample);

}  // namespace profmatch
