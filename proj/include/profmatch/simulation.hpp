#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "profmatch/balance.hpp"
#include "profmatch/dataset.hpp"
#include "profmatch/estimators.hpp"

namespace profmatch {

enum class SelectionFamily { probit, logit };
enum class Overlap { high, low };
enum class Heterogeneity { A, B };
enum class HetForm { shift, draft_noise };
/// Population the profile and TASMD are taken from: the cohort rows outside
/// the trial, or the whole cohort.
enum class TargetPopulation { non_trial, cohort };

const char* to_string(SelectionFamily v);
const char* to_string(Overlap v);
const char* to_string(Heterogeneity v);
const char* to_string(HetForm v);
const char* to_string(TargetPopulation v);
SelectionFamily parse_selection_family(const std::string& text);
Overlap parse_overlap(const std::string& text);
Heterogeneity parse_heterogeneity(const std::string& text);
HetForm parse_het_form(const std::string& text);
TargetPopulation parse_target(const std::string& text);

struct ScenarioSpec {
  SelectionFamily selection_family = SelectionFamily::probit;
  Overlap overlap = Overlap::high;
  int outcome_model = 1;
  Heterogeneity heterogeneity = Heterogeneity::A;
  HetForm het_form = HetForm::shift;
  int ps_spec = 1;
  Method method = Method::pm;
  std::size_t n_cohort = 1500;
  std::size_t replicates = 200;
  /// 0 skips the bootstrap; coverage and length are then absent.
  std::size_t bootstrap_B = 200;
  std::uint64_t master_seed = 1;
  TargetPopulation target = TargetPopulation::non_trial;
  double multiplier = 0.05;
  double solver_time_limit = 60.0;
  int solver_gap = 0;
  /// 0 means no limit.
  long solver_node_limit = 0;
  /// Threads across replicates; 0 means default_workers().
  std::size_t workers = 1;

  /// e.g. "probit-high-om1-A-shift-ps1-pm"
  std::string id() const;
  /// Throws DomainError on out-of-range fields.
  void validate() const;
};

/// Probit sigma or logit nu for the scenario's family and overlap.
double selection_scale(SelectionFamily family, Overlap overlap);

/// Columns X1..X6, S, Z, Y0, Y1, Y. Z and Y are NaN outside the trial.
/// Covariates, selection and treatment come from stream 2r and outcomes from
/// stream 2r + 1, so cells sharing a seed share covariates across outcome
/// models and overlaps share covariates as well.
Dataset generate_cohort(const ScenarioSpec& spec, std::size_t replicate);

/// PS 1: X1..X6. PS 2: X1^2, X2^2, X3, X4^2, X5^2, X6.
/// PS 3: X1*X3, X2^2, X4, X5, X6.
std::vector<FeatureSpec> build_ps_features(int ps_spec);

inline constexpr std::size_t kRawCovariates = 6;
/// Raw covariate names X1..X6.
const std::array<std::string, kRawCovariates>& raw_covariates();

/// One replicate's estimate and diagnostics. Arm 0 is control, arm 1 treated.
struct ReplicateOutcome {
  double estimate = 0.0;
  double ess = 0.0;
  std::array<std::array<double, kRawCovariates>, 2> tasmd_before{};
  std::array<std::array<double, kRawCovariates>, 2> tasmd_after{};
  /// Largest after-adjustment TASMD over both arms on the PS features, with
  /// the profile's scales.
  double max_feature_tasmd = 0.0;
  /// Matching solves that ended without a proof of optimality.
  std::size_t nonoptimal_solves = 0;
};

/// Runs one method on one cohort. The default is method_pipeline.
using ScenarioPipeline =
    std::function<ReplicateOutcome(const Dataset& cohort, const ScenarioSpec& spec)>;

/// The spec's method on a cohort: profile from the target rows, matching or
/// weighting of the trial arms, estimate, ESS and raw-covariate TASMDs.
ReplicateOutcome method_pipeline(const Dataset& cohort, const ScenarioSpec& spec);

struct MetricsRow {
  std::string scenario;
  std::size_t replicates_ok = 0;
  std::size_t replicates_failed = 0;
  double mab = 0.0;
  double rmse = 0.0;
  double mean_bias = 0.0;
  /// Sample variance (n - 1) of the estimates.
  double variance = 0.0;
  std::optional<double> coverage;
  std::optional<double> mean_ci_length;
  double mean_ess = 0.0;
  double mean_n_trial = 0.0;
  std::size_t nonoptimal_solves = 0;
  std::size_t bootstrap_failed = 0;
  std::array<std::array<double, kRawCovariates>, 2> tasmd_before{};
  std::array<std::array<double, kRawCovariates>, 2> tasmd_after{};
  /// Largest after-adjustment TASMD seen in any replicate, arm and covariate.
  double max_tasmd_after = 0.0;
  /// Largest max_feature_tasmd over replicates.
  double max_feature_tasmd_after = 0.0;
  /// Per-replicate estimates in replicate order; NaN marks a failure.
  std::vector<double> estimates;
};

/// Runs all replicates and aggregates against the true effect 0. Failed
/// replicates are dropped and counted; more than 20% failing raises
/// ScenarioDegenerateError.
MetricsRow run_scenario(const ScenarioSpec& spec,
                        const ScenarioPipeline& pipeline = method_pipeline);

std::string metrics_csv_header();
std::string to_csv_row(const MetricsRow& row, int digits = 6);

/// Runs every scenario and returns header plus one row per scenario.
/// Errors carry the scenario id. Throws DomainError on an empty grid.
std::string run_grid(const std::vector<ScenarioSpec>& grid, int digits = 6);

/// 2 overlaps x 3 outcome models x 2 heterogeneity settings x 3 PS specs x 4
/// methods, all other fields copied from `base`.
std::vector<ScenarioSpec> full_grid(const ScenarioSpec& base);

}  // namespace profmatch
