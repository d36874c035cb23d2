#include "profmatch/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "profmatch/error.hpp"
#include "profmatch/glm.hpp"
#include "profmatch/matching.hpp"
#include "profmatch/numerics.hpp"
#include "profmatch/parallel.hpp"

namespace profmatch {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kMaxReplicates = 500'000;

std::string format_optional(const std::optional<double>& value, int digits) {
  return value ? format_significant(*value, digits) : std::string();
}

double column_mean(std::span<const double> values, std::span<const std::size_t> rows) {
  double s = 0.0;
  for (auto r : rows) s += values[r];
  return s / static_cast<double>(rows.size());
}

double weighted_column_mean(std::span<const double> values,
                            std::span<const std::size_t> rows,
                            std::span<const double> weights) {
  double s = 0.0;
  double w = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    s += weights[i] * values[rows[i]];
    w += weights[i];
  }
  return s / w;
}

std::vector<double> gather(std::span<const double> values,
                           std::span<const std::size_t> rows) {
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = values[rows[i]];
  return out;
}

struct TargetSummary {
  std::vector<std::size_t> rows;
  std::array<double, kRawCovariates> means{};
  std::array<double, kRawCovariates> sds{};
};

TargetSummary summarize_target(const Dataset& cohort, TargetPopulation target) {
  TargetSummary t;
  if (target == TargetPopulation::non_trial) {
    t.rows = cohort.rows_where("S", 0.0);
  } else {
    t.rows.resize(cohort.rows());
    for (std::size_t i = 0; i < t.rows.size(); ++i) t.rows[i] = i;
  }
  if (t.rows.size() < 2) throw EmptyInputError("target population has fewer than 2 rows");
  for (std::size_t k = 0; k < kRawCovariates; ++k) {
    const auto values = gather(cohort.column(raw_covariates()[k]), t.rows);
    t.means[k] = mean(values);
    t.sds[k] = sample_sd(values);
  }
  return t;
}

// TASMD of the raw covariates for one arm, optionally weighted.
std::array<double, kRawCovariates> raw_tasmd(const Dataset& cohort,
                                             const TargetSummary& target,
                                             std::span<const std::size_t> rows,
                                             std::span<const double> weights = {}) {
  std::array<double, kRawCovariates> out{};
  for (std::size_t k = 0; k < kRawCovariates; ++k) {
    const auto values = cohort.column(raw_covariates()[k]);
    if (rows.empty()) {
      out[k] = kNaN;
      continue;
    }
    const double m = weights.empty() ? column_mean(values, rows)
                                     : weighted_column_mean(values, rows, weights);
    out[k] = tasmd(m, target.means[k], target.sds[k]);
  }
  return out;
}

ReplicateOutcome matching_pipeline(const Dataset& cohort, const ScenarioSpec& spec,
                                   const TargetSummary& target) {
  const auto features = build_ps_features(spec.ps_spec);
  const Profile profile =
      profile_from_target(cohort.select_rows(target.rows), features, spec.multiplier);
  const MatchOptions options{spec.solver_time_limit, spec.solver_gap,
                             spec.solver_node_limit};
  const double labels[2] = {0.0, 1.0};
  const auto groups = profile_match(cohort, profile, "Z", labels, options);

  ReplicateOutcome out;
  std::vector<std::size_t> matched[2];
  for (int arm = 0; arm < 2; ++arm) {
    const GroupMatch& g = groups[static_cast<std::size_t>(arm)];
    const auto status = g.result.status;
    if (status == SolveStatus::gap_feasible || status == SolveStatus::time_limit ||
        status == SolveStatus::node_limit)
      ++out.nonoptimal_solves;
    matched[arm] = g.matched_rows();
    out.tasmd_before[static_cast<std::size_t>(arm)] = raw_tasmd(cohort, target, g.rows);
    out.tasmd_after[static_cast<std::size_t>(arm)] =
        raw_tasmd(cohort, target, matched[arm]);
    for (const auto& fb :
         balance_report(cohort, profile, g.rows, matched[arm], *profile.scale_sds))
      if (!matched[arm].empty())
        out.max_feature_tasmd = std::max(out.max_feature_tasmd, fb.after);
  }

  const auto y = cohort.column("Y");
  if (spec.method == Method::pm) {
    const auto report = estimate_pm(gather(y, matched[1]), gather(y, matched[0]));
    out.estimate = report.estimate;
    out.ess = report.ess;
    return out;
  }
  const std::vector<std::string> columns(raw_covariates().begin(), raw_covariates().end());
  Eigen::VectorXd y_arm[2];
  Eigen::MatrixXd x_arm[2];
  for (int arm = 0; arm < 2; ++arm) {
    x_arm[arm] = design_matrix(cohort, columns, matched[arm]);
    const auto v = gather(y, matched[arm]);
    y_arm[arm] = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  const auto report = estimate_apm(x_arm[1], y_arm[1], x_arm[0], y_arm[0]);
  out.estimate = report.estimate;
  out.ess = report.ess;
  return out;
}

ReplicateOutcome weighting_pipeline(const Dataset& cohort, const ScenarioSpec& spec,
                                    const TargetSummary& target) {
  const auto features = build_ps_features(spec.ps_spec);
  const Link link =
      spec.selection_family == SelectionFamily::probit ? Link::probit : Link::logit;
  IowWeights w = fit_iow_weights(cohort, features, link);
  const auto z_col = cohort.column("Z");
  if (spec.target == TargetPopulation::cohort) {
    // 1/(p e) = (1 - p)/(p e) + 1/e
    const double e1 = predict(w.treatment, Eigen::MatrixXd::Ones(1, 1))[0];
    for (std::size_t i = 0; i < w.trial_rows.size(); ++i)
      w.weights[i] += 1.0 / (z_col[w.trial_rows[i]] == 1.0 ? e1 : 1.0 - e1);
  }

  ReplicateOutcome out;
  for (int arm = 0; arm < 2; ++arm) {
    std::vector<std::size_t> rows;
    std::vector<double> weights;
    for (std::size_t i = 0; i < w.trial_rows.size(); ++i) {
      if (z_col[w.trial_rows[i]] != static_cast<double>(arm)) continue;
      rows.push_back(w.trial_rows[i]);
      weights.push_back(w.weights[i]);
    }
    out.tasmd_before[static_cast<std::size_t>(arm)] = raw_tasmd(cohort, target, rows);
    out.tasmd_after[static_cast<std::size_t>(arm)] =
        raw_tasmd(cohort, target, rows, weights);
    const Eigen::MatrixXd values = eval_features(cohort, features);
    const Eigen::MatrixXd target_values =
        eval_features(cohort.select_rows(target.rows), features);
    const auto target_means = column_means(target_values);
    const auto target_sds = column_sds(target_values);
    const auto adjusted = weighted_means(values, rows, weights);
    for (std::size_t k = 0; k < features.size(); ++k)
      out.max_feature_tasmd = std::max(
          out.max_feature_tasmd, tasmd(adjusted[k], target_means[k], target_sds[k]));
  }

  const auto y = gather(cohort.column("Y"), w.trial_rows);
  const auto z = gather(z_col, w.trial_rows);
  EstimateReport report;
  if (spec.method == Method::iow) {
    report = estimate_iow(y, z, w.weights);
  } else {
    const std::vector<std::string> columns(raw_covariates().begin(),
                                           raw_covariates().end());
    report = estimate_aiow(design_matrix(cohort, columns, w.trial_rows), y, z,
                           w.weights, design_matrix(cohort, columns, target.rows));
  }
  out.estimate = report.estimate;
  out.ess = report.ess;
  return out;
}

struct ReplicateRecord {
  bool ok = false;
  ReplicateOutcome outcome;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  std::size_t bootstrap_failed = 0;
  std::size_t n_trial = 0;
};

template <typename Enum>
Enum parse_enum(const std::string& text, std::initializer_list<Enum> values,
                const char* what) {
  for (Enum v : values)
    if (text == to_string(v)) return v;
  throw DomainError(std::string("unknown ") + what + " '" + text + "'");
}

}  // namespace

const char* to_string(SelectionFamily v) {
  return v == SelectionFamily::probit ? "probit" : "logit";
}
const char* to_string(Overlap v) { return v == Overlap::high ? "high" : "low"; }
const char* to_string(Heterogeneity v) { return v == Heterogeneity::A ? "A" : "B"; }
const char* to_string(HetForm v) { return v == HetForm::shift ? "shift" : "draft_noise"; }
const char* to_string(TargetPopulation v) {
  return v == TargetPopulation::non_trial ? "non_trial" : "cohort";
}

SelectionFamily parse_selection_family(const std::string& text) {
  return parse_enum(text, {SelectionFamily::probit, SelectionFamily::logit},
                    "selection family");
}
Overlap parse_overlap(const std::string& text) {
  return parse_enum(text, {Overlap::high, Overlap::low}, "overlap");
}
Heterogeneity parse_heterogeneity(const std::string& text) {
  return parse_enum(text, {Heterogeneity::A, Heterogeneity::B}, "heterogeneity");
}
HetForm parse_het_form(const std::string& text) {
  return parse_enum(text, {HetForm::shift, HetForm::draft_noise}, "heterogeneity form");
}
TargetPopulation parse_target(const std::string& text) {
  return parse_enum(text, {TargetPopulation::non_trial, TargetPopulation::cohort},
                    "target population");
}

std::string ScenarioSpec::id() const {
  return std::string(to_string(selection_family)) + "-" + to_string(overlap) + "-om" +
         std::to_string(outcome_model) + "-" + to_string(heterogeneity) + "-" +
         to_string(het_form) + "-ps" + std::to_string(ps_spec) + "-" +
         to_string(method);
}

void ScenarioSpec::validate() const {
  if (outcome_model < 1 || outcome_model > 3)
    throw DomainError("outcome model must be 1, 2 or 3");
  if (ps_spec < 1 || ps_spec > 3) throw DomainError("PS specification must be 1, 2 or 3");
  if (n_cohort < 2) throw DomainError("n_cohort must be at least 2");
  if (replicates < 1) throw DomainError("replicates must be at least 1");
  if (replicates > kMaxReplicates)
    throw DomainError("replicates must be at most " + std::to_string(kMaxReplicates));
  if (bootstrap_B == 1) throw DomainError("bootstrap_B must be 0 or at least 2");
  if (bootstrap_B > kBootstrapStreamStride)
    throw DomainError("bootstrap_B must be at most " +
                      std::to_string(kBootstrapStreamStride));
  if (!(multiplier > 0.0) || !std::isfinite(multiplier))
    throw DomainError("multiplier must be positive");
  if (!(solver_time_limit > 0.0)) throw DomainError("solver time limit must be positive");
  if (solver_gap < 0) throw DomainError("solver gap must be nonnegative");
  if (solver_node_limit < 0) throw DomainError("solver node limit must be nonnegative");
}

double selection_scale(SelectionFamily family, Overlap overlap) {
  if (family == SelectionFamily::probit)
    return std::sqrt(overlap == Overlap::high ? 100.0 : 30.0);
  return overlap == Overlap::high ? 5.0 : 2.0;
}

const std::array<std::string, kRawCovariates>& raw_covariates() {
  static const std::array<std::string, kRawCovariates> names = {"X1", "X2", "X3",
                                                                "X4", "X5", "X6"};
  return names;
}

Dataset generate_cohort(const ScenarioSpec& spec, std::size_t replicate) {
  spec.validate();
  const std::size_t n = spec.n_cohort;
  Eigen::Matrix3d sigma;
  sigma << 2.0, 1.0, -1.0, 1.0, 1.0, -0.5, -1.0, -0.5, 1.0;
  const MvnSampler mvn(dist::Mvn{Eigen::Vector3d::Zero(), sigma});
  const double scale = selection_scale(spec.selection_family, spec.overlap);

  std::vector<std::vector<double>> cols(11, std::vector<double>(n));
  auto& x1 = cols[0];
  auto& x2 = cols[1];
  auto& x3 = cols[2];
  auto& x4 = cols[3];
  auto& x5 = cols[4];
  auto& x6 = cols[5];
  auto& s = cols[6];
  auto& z = cols[7];
  auto& y0 = cols[8];
  auto& y1 = cols[9];
  auto& y = cols[10];

  RngStream design = derive_substream(spec.master_seed, 2 * replicate);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::VectorXd x = mvn.draw(design);
    x1[i] = x[0];
    x2[i] = x[1];
    x3[i] = x[2];
    x4[i] = draw(design, dist::Uniform{-3.0, 3.0});
    x5[i] = draw(design, dist::ChiSquare1{});
    x6[i] = draw(design, dist::Bernoulli{0.5});
    const double lin = x1[i] + 2.0 * x2[i] - 2.0 * x3[i] - x4[i] - 0.5 * x5[i] + x6[i];
    const double p = spec.selection_family == SelectionFamily::probit
                         ? normal_cdf(lin / scale)
                         : expit(lin / scale);
    s[i] = design.uniform01() < p ? 1.0 : 0.0;
    z[i] = design.uniform01() < 0.5 ? 1.0 : 0.0;
  }

  RngStream noise = derive_substream(spec.master_seed, 2 * replicate + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double eta0 = noise.standard_normal();
    const double eta1 = noise.standard_normal();
    const double zeta = draw(noise, dist::Normal{5.0, 0.5});
    double base = 0.0;
    switch (spec.outcome_model) {
      case 1:
        base = x1[i] + x2[i] + x3[i] - x4[i] + x5[i] + x6[i];
        break;
      case 2:
        base = x1[i] + x2[i] + 0.2 * x3[i] * x4[i] - std::sqrt(x5[i]);
        break;
      default: {
        const double t = x1[i] + x2[i] + x5[i];
        base = t * t;
      }
    }
    double effect = 0.0;
    if (spec.heterogeneity == Heterogeneity::B)
      effect = spec.het_form == HetForm::shift ? 10.0 * (x6[i] - 0.5)
                                               : (x6[i] == 1.0 ? -zeta : zeta);
    y0[i] = base + eta0;
    y1[i] = base + effect + eta1;
    if (s[i] == 1.0) {
      y[i] = z[i] == 1.0 ? y1[i] : y0[i];
    } else {
      z[i] = kNaN;
      y[i] = kNaN;
    }
  }
  return Dataset({"X1", "X2", "X3", "X4", "X5", "X6", "S", "Z", "Y0", "Y1", "Y"},
                 std::move(cols));
}

std::vector<FeatureSpec> build_ps_features(int ps_spec) {
  std::vector<std::string> terms;
  switch (ps_spec) {
    case 1:
      terms = {"X1", "X2", "X3", "X4", "X5", "X6"};
      break;
    case 2:
      terms = {"X1^2", "X2^2", "X3", "X4^2", "X5^2", "X6"};
      break;
    case 3:
      terms = {"X1*X3", "X2^2", "X4", "X5", "X6"};
      break;
    default:
      throw DomainError("PS specification must be 1, 2 or 3");
  }
  std::vector<FeatureSpec> out;
  for (const auto& t : terms) out.push_back(FeatureSpec::parse(t));
  return out;
}

ReplicateOutcome method_pipeline(const Dataset& cohort, const ScenarioSpec& spec) {
  const TargetSummary target = summarize_target(cohort, spec.target);
  if (spec.method == Method::pm || spec.method == Method::apm)
    return matching_pipeline(cohort, spec, target);
  return weighting_pipeline(cohort, spec, target);
}

MetricsRow run_scenario(const ScenarioSpec& spec, const ScenarioPipeline& pipeline) {
  spec.validate();
  std::vector<ReplicateRecord> records(spec.replicates);
  parallel_for(spec.replicates, spec.workers, [&](std::size_t r) {
    ReplicateRecord& rec = records[r];
    try {
      const Dataset cohort = generate_cohort(spec, r);
      for (double v : cohort.column("S")) rec.n_trial += v == 1.0 ? 1 : 0;
      rec.outcome = pipeline(cohort, spec);
      if (spec.bootstrap_B > 0) {
        EstimateReport point;
        point.method = spec.method;
        point.estimate = rec.outcome.estimate;
        const BootstrapOptions options{spec.bootstrap_B, spec.master_seed, r, 1};
        const auto ci = bootstrap_ci(
            point, cohort,
            [&](const Dataset& resample) { return pipeline(resample, spec).estimate; },
            options);
        rec.ci_low = ci.ci_low;
        rec.ci_high = ci.ci_high;
        rec.bootstrap_failed = ci.n_boot_failed;
      }
      rec.ok = std::isfinite(rec.outcome.estimate);
    } catch (const Error&) {
      rec.ok = false;
    }
  });

  MetricsRow m;
  m.scenario = spec.id();
  std::vector<double> est;
  std::size_t covered = 0;
  double length = 0.0;
  double n_trial = 0.0;
  for (const auto& rec : records) {
    m.estimates.push_back(rec.ok ? rec.outcome.estimate : kNaN);
    if (!rec.ok) {
      ++m.replicates_failed;
      continue;
    }
    ++m.replicates_ok;
    est.push_back(rec.outcome.estimate);
    m.mean_ess += rec.outcome.ess;
    n_trial += static_cast<double>(rec.n_trial);
    m.nonoptimal_solves += rec.outcome.nonoptimal_solves;
    m.bootstrap_failed += rec.bootstrap_failed;
    for (std::size_t arm = 0; arm < 2; ++arm) {
      for (std::size_t k = 0; k < kRawCovariates; ++k) {
        m.tasmd_before[arm][k] += rec.outcome.tasmd_before[arm][k];
        m.tasmd_after[arm][k] += rec.outcome.tasmd_after[arm][k];
        m.max_tasmd_after = std::max(m.max_tasmd_after, rec.outcome.tasmd_after[arm][k]);
      }
    }
    m.max_feature_tasmd_after =
        std::max(m.max_feature_tasmd_after, rec.outcome.max_feature_tasmd);
    if (rec.ci_low && rec.ci_high) {
      if (*rec.ci_low <= 0.0 && 0.0 <= *rec.ci_high) ++covered;
      length += *rec.ci_high - *rec.ci_low;
    }
  }
  if (5 * m.replicates_failed > spec.replicates || m.replicates_ok == 0)
    throw ScenarioDegenerateError(std::to_string(m.replicates_failed) + " of " +
                                  std::to_string(spec.replicates) +
                                  " replicates failed");

  const double n_ok = static_cast<double>(m.replicates_ok);
  double sum = 0.0;
  double sum_abs = 0.0;
  double sum_sq = 0.0;
  for (double e : est) {
    sum += e;
    sum_abs += std::abs(e);
    sum_sq += e * e;
  }
  m.mean_bias = sum / n_ok;
  m.mab = sum_abs / n_ok;
  m.rmse = std::sqrt(sum_sq / n_ok);
  double ss = 0.0;
  for (double e : est) ss += (e - m.mean_bias) * (e - m.mean_bias);
  m.variance = est.size() > 1 ? ss / (n_ok - 1.0) : 0.0;
  m.mean_ess /= n_ok;
  m.mean_n_trial = n_trial / n_ok;
  for (std::size_t arm = 0; arm < 2; ++arm) {
    for (std::size_t k = 0; k < kRawCovariates; ++k) {
      m.tasmd_before[arm][k] /= n_ok;
      m.tasmd_after[arm][k] /= n_ok;
    }
  }
  if (spec.bootstrap_B > 0) {
    m.coverage = static_cast<double>(covered) / n_ok;
    m.mean_ci_length = length / n_ok;
  }
  return m;
}

std::string metrics_csv_header() {
  std::string h =
      "scenario,replicates_ok,replicates_failed,mab,rmse,mean_bias,variance,coverage,"
      "mean_ci_length,mean_ess,mean_n_trial,nonoptimal_solves,bootstrap_failed,"
      "max_tasmd_after,max_feature_tasmd_after";
  for (const char* when : {"before", "after"})
    for (const char* arm : {"control", "treated"})
      for (const auto& x : raw_covariates())
        h += std::string(",tasmd_") + when + "_" + arm + "_" + x;
  return h;
}

std::string to_csv_row(const MetricsRow& m, int digits) {
  auto num = [digits](double v) { return format_significant(v, digits); };
  std::string row = m.scenario + "," + std::to_string(m.replicates_ok) + "," +
                    std::to_string(m.replicates_failed) + "," + num(m.mab) + "," +
                    num(m.rmse) + "," + num(m.mean_bias) + "," + num(m.variance) + "," +
                    format_optional(m.coverage, digits) + "," +
                    format_optional(m.mean_ci_length, digits) + "," + num(m.mean_ess) +
                    "," + num(m.mean_n_trial) + "," +
                    std::to_string(m.nonoptimal_solves) + "," +
                    std::to_string(m.bootstrap_failed) + "," + num(m.max_tasmd_after) +
                    "," + num(m.max_feature_tasmd_after);
  for (const auto* table : {&m.tasmd_before, &m.tasmd_after})
    for (std::size_t arm = 0; arm < 2; ++arm)
      for (std::size_t k = 0; k < kRawCovariates; ++k) row += "," + num((*table)[arm][k]);
  return row;
}

std::string run_grid(const std::vector<ScenarioSpec>& grid, int digits) {
  if (grid.empty()) throw DomainError("scenario grid is empty");
  std::string out = metrics_csv_header() + "\n";
  for (const auto& spec : grid) {
    try {
      out += to_csv_row(run_scenario(spec), digits) + "\n";
    } catch (Error& e) {
      e.add_context("scenario " + spec.id());
      throw;
    }
  }
  return out;
}

std::vector<ScenarioSpec> full_grid(const ScenarioSpec& base) {
  std::vector<ScenarioSpec> grid;
  for (Overlap overlap : {Overlap::high, Overlap::low})
    for (int om = 1; om <= 3; ++om)
      for (Heterogeneity het : {Heterogeneity::A, Heterogeneity::B})
        for (int ps = 1; ps <= 3; ++ps)
          for (Method method : {Method::pm, Method::apm, Method::iow, Method::aiow}) {
            ScenarioSpec s = base;
            s.overlap = overlap;
            s.outcome_model = om;
            s.heterogeneity = het;
            s.ps_spec = ps;
            s.method = method;
            grid.push_back(s);
          }
  return grid;
}

}  // namespace profmatch
