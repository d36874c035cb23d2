#include "profmatch/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "profmatch/error.hpp"
#include "profmatch/numerics.hpp"
#include "profmatch/paired.hpp"
#include "profmatch/parallel.hpp"

namespace profmatch {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string label_text(double label) { return format_significant(label, 17); }

std::size_t resolve_workers(std::size_t requested) {
  if (const char* env = std::getenv("PROFMATCH_WORKERS"); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1)
      throw ConfigError(std::string("PROFMATCH_WORKERS must be a positive integer, got '") +
                        env + "'");
    return static_cast<std::size_t>(v);
  }
  return requested == 0 ? default_workers() : requested;
}

std::vector<double> distinct_labels(std::span<const double> values) {
  std::set<double> seen;
  for (double v : values)
    if (!std::isnan(v)) seen.insert(v);
  return {seen.begin(), seen.end()};
}

RoleRequirements treatment_required() {
  RoleRequirements r;
  r.treatment = true;
  return r;
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  return rows;
}

std::vector<double> gather(std::span<const double> values,
                           std::span<const std::size_t> rows) {
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = values[rows[i]];
  return out;
}

// How the profile is obtained; rebuilt on bootstrap resamples when it comes
// from the data.
struct ProfileRule {
  std::optional<Profile> fixed;
  std::vector<FeatureSpec> features;
  std::string scale_name;
};

ProfileRule profile_rule(const RunConfig& c, const LoadedData& loaded) {
  ProfileRule rule;
  if (!c.profile_path.empty()) {
    if (!c.features.empty())
      throw ConfigError("--features and --profile are mutually exclusive");
    rule.fixed = read_profile(c.profile_path);
    rule.features = rule.fixed->features;
    rule.scale_name = "profile";
    return rule;
  }
  if (!c.features.empty()) {
    for (const auto& f : c.features) rule.features.push_back(FeatureSpec::parse(f));
  } else {
    if (loaded.covariates.empty())
      throw ConfigError("no balance features: give --features, --covariates or --profile");
    for (const auto& name : loaded.covariates) rule.features.push_back(FeatureSpec::raw(name));
  }
  rule.scale_name = to_string(c.scale);
  return rule;
}

Profile build_profile(const RunConfig& c, const ProfileRule& rule, const Dataset& data,
                      std::span<const double> labels) {
  if (rule.fixed) return *rule.fixed;
  const std::vector<std::size_t> target_rows =
      c.roles.selection.empty() ? all_rows(data.rows())
                                : data.rows_where(c.roles.selection, c.target_value);
  if (target_rows.empty())
    throw EmptyInputError("no target rows with " + c.roles.selection + " = " +
                          label_text(c.target_value));
  const Dataset target = data.select_rows(target_rows);
  std::vector<double> scales;
  switch (c.scale) {
    case ScaleChoice::cohort:
      scales = column_sds(eval_features(data, rule.features));
      break;
    case ScaleChoice::target:
      scales = column_sds(eval_features(target, rule.features));
      break;
    case ScaleChoice::pooled:
      scales = pooled_feature_sds(data, rule.features, c.roles.treatment, labels);
      break;
  }
  return profile_from_target(target, rule.features, c.multiplier, std::move(scales));
}

std::vector<double> resolve_groups(const RunConfig& c, const Dataset& data) {
  std::vector<double> labels =
      c.groups.empty() ? distinct_labels(data.column(c.roles.treatment)) : c.groups;
  if (labels.empty())
    throw DataError("treatment column '" + c.roles.treatment + "' has no labels");
  return labels;
}

void warn_statuses(const std::vector<GroupMatch>& groups, std::ostream& warn) {
  for (const auto& g : groups) {
    const auto status = g.result.status;
    if (status == SolveStatus::empty_only)
      warn << "warning: group " << label_text(g.label)
           << ": only the empty selection meets the tolerances\n";
    else if (status != SolveStatus::optimal)
      warn << "warning: group " << label_text(g.label) << ": solve ended with status "
           << to_string(status) << "; selected " << g.result.objective
           << ", proven bound " << g.result.upper_bound << "\n";
  }
}

// Matched-group estimate for the treated/control pair of labels.
EstimateReport matched_estimate(const Dataset& data, const std::vector<GroupMatch>& groups,
                                double treated, double control, Method method,
                                const std::string& outcome,
                                const std::vector<std::string>& covariates) {
  const GroupMatch* t = nullptr;
  const GroupMatch* k = nullptr;
  for (const auto& g : groups) {
    if (g.label == treated) t = &g;
    if (g.label == control) k = &g;
  }
  const auto rows_t = t->matched_rows();
  const auto rows_c = k->matched_rows();
  const auto y = data.column(outcome);
  if (method == Method::pm) return estimate_pm(gather(y, rows_t), gather(y, rows_c));
  const auto yt = gather(y, rows_t);
  const auto yc = gather(y, rows_c);
  return estimate_apm(design_matrix(data, covariates, rows_t),
                      Eigen::Map<const Eigen::VectorXd>(yt.data(), static_cast<Eigen::Index>(yt.size())),
                      design_matrix(data, covariates, rows_c),
                      Eigen::Map<const Eigen::VectorXd>(yc.data(), static_cast<Eigen::Index>(yc.size())));
}

std::string balance_csv(const std::vector<GroupMatch>& groups, const std::string& scale,
                        int digits) {
  std::string out =
      "group,status,n_group,n_matched,feature,target,scale,scale_sd,tasmd_before,"
      "tasmd_after\n";
  for (const auto& g : groups) {
    const std::size_t matched = g.matched_rows().size();
    for (const auto& b : g.balance)
      out += csv_line({label_text(g.label), to_string(g.result.status),
                       std::to_string(g.rows.size()), std::to_string(matched), b.feature,
                       format_significant(b.target, digits), scale,
                       format_significant(b.scale_sd, digits),
                       format_significant(b.before, digits),
                       matched ? format_significant(b.after, digits) : std::string()});
  }
  return out;
}

void check_outputs(std::initializer_list<const std::string*> paths) {
  for (const auto* p : paths)
    if (!p->empty()) require_writable(*p);
}

int run_match(const RunConfig& c, std::ostream& warn) {
  require_readable(c.data_path);
  if (!c.profile_path.empty()) require_readable(c.profile_path);
  if (c.out_path.empty() || c.out_path == "-")
    throw ConfigError("match needs --out for the matched rows");
  check_outputs({&c.out_path, &c.report_path, &c.estimate_path, &c.write_profile_path});
  if (c.method != Method::pm && c.method != Method::apm)
    throw ConfigError("match estimates with pm or apm");

  const LoadedData loaded = load_dataset(c.data_path, c.roles, treatment_required());
  for (const auto& m : loaded.missing)
    warn << "note: column " << m.column << " has " << m.count << " missing cells\n";
  const Dataset& data = loaded.data;
  const auto labels = resolve_groups(c, data);
  const ProfileRule rule = profile_rule(c, loaded);
  const Profile profile = build_profile(c, rule, data, labels);
  if (!c.write_profile_path.empty()) write_profile(c.write_profile_path, profile);

  const auto groups = profile_match(data, profile, c.roles.treatment, labels, c.solver);
  warn_statuses(groups, warn);

  std::vector<std::size_t> matched;
  for (const auto& g : groups) {
    const auto rows = g.matched_rows();
    matched.insert(matched.end(), rows.begin(), rows.end());
  }
  std::sort(matched.begin(), matched.end());
  CsvTable out{loaded.table.header, {}};
  for (auto r : matched) out.rows.push_back(loaded.table.rows[r]);
  write_output(c.out_path, to_csv(out));
  write_output(c.report_path, balance_csv(groups, rule.scale_name, c.digits));

  if (c.roles.outcome.empty()) return 0;
  if (labels.size() != 2) {
    warn << "warning: estimate skipped: it needs exactly two groups\n";
    return 0;
  }
  for (const auto& g : groups)
    if (g.result.objective == 0) {
      warn << "warning: estimate skipped: group " << label_text(g.label)
           << " has no matched rows\n";
      return 0;
    }
  const double treated = c.treated_label.value_or(std::max(labels[0], labels[1]));
  if (treated != labels[0] && treated != labels[1])
    throw ConfigError("--treated-label " + label_text(treated) + " is not a matched group");
  const double control = treated == labels[0] ? labels[1] : labels[0];
  const std::vector<std::string>& covariates = loaded.covariates;
  if (c.method == Method::apm && covariates.empty())
    throw ConfigError("apm needs --covariates for the outcome model");

  EstimateReport report = matched_estimate(data, groups, treated, control, c.method,
                                           c.roles.outcome, covariates);
  if (c.bootstrap > 0) {
    const BootstrapOptions options{c.bootstrap, c.seed, 0, resolve_workers(c.workers)};
    report = bootstrap_ci(
        report, data,
        [&](const Dataset& resample) {
          const Profile p = build_profile(c, rule, resample, labels);
          const auto g = profile_match(resample, p, c.roles.treatment, labels, c.solver);
          return matched_estimate(resample, g, treated, control, c.method, c.roles.outcome,
                                  covariates)
              .estimate;
        },
        options);
  }
  write_output(c.estimate_path,
               estimate_csv_header() + "\n" + to_csv_row(report, c.digits) + "\n");
  return 0;
}

int run_pairmatch(const RunConfig& c, std::ostream& warn) {
  require_readable(c.data_path);
  if (!c.profile_path.empty()) require_readable(c.profile_path);
  check_outputs({&c.out_path, &c.write_profile_path});
  if (c.groups.size() != 2)
    throw ConfigError("pairmatch needs exactly two --groups labels");

  ColumnRoles roles = c.roles;
  if (!roles.covariates.empty())
    for (const auto& d : c.distance_columns)
      if (std::find(roles.covariates.begin(), roles.covariates.end(), d) ==
          roles.covariates.end())
        roles.covariates.push_back(d);
  const LoadedData loaded = load_dataset(c.data_path, roles, treatment_required());
  for (const auto& m : loaded.missing)
    warn << "note: column " << m.column << " has " << m.count << " missing cells\n";
  const Dataset& data = loaded.data;
  const ProfileRule rule = profile_rule(c, loaded);
  const Profile profile = build_profile(c, rule, data, c.groups);
  if (!c.write_profile_path.empty()) write_profile(c.write_profile_path, profile);

  DistanceSpec spec;
  spec.columns = c.distance_columns.empty() ? loaded.covariates : c.distance_columns;
  if (spec.columns.empty()) throw ConfigError("pairmatch needs --distance columns");
  std::vector<std::size_t> both = data.rows_where(c.roles.treatment, c.groups[0]);
  const auto rows_b = data.rows_where(c.roles.treatment, c.groups[1]);
  both.insert(both.end(), rows_b.begin(), rows_b.end());
  for (const auto& col : spec.columns) {
    const auto v = gather(data.column(col), both);
    const double sd = v.size() > 1 ? sample_sd(v) : 0.0;
    spec.scales.push_back(sd > 0.0 ? sd : 1.0);
  }

  const PairMatchResult result = pairwise_cardinality_match(
      data, c.roles.treatment, c.groups[0], c.groups[1], profile, spec, c.solver);
  if (result.pairs.empty())
    warn << "warning: only the empty selection meets the tolerances\n";
  else if (result.solve.status != SolveStatus::optimal)
    warn << "warning: solve ended with status " << to_string(result.solve.status)
         << "; pairs " << result.solve.objective << ", proven bound "
         << result.solve.upper_bound << "\n";

  std::vector<std::string> header = {"pair_id", "row_a", "row_b"};
  std::size_t id_col = 0;
  if (!c.id_column.empty()) {
    const auto it =
        std::find(loaded.table.header.begin(), loaded.table.header.end(), c.id_column);
    if (it == loaded.table.header.end())
      throw ConfigError("id column '" + c.id_column + "' not found in header");
    id_col = static_cast<std::size_t>(it - loaded.table.header.begin());
    header.push_back("id_a");
    header.push_back("id_b");
  }
  header.push_back("distance");
  std::string outcome_type;
  if (!c.roles.outcome.empty()) {
    header.insert(header.end(), {"y_treated", "y_control", "outcome_type"});
    outcome_type = c.outcome_type;
    if (outcome_type == "auto") {
      outcome_type = "binary";
      const auto y = data.column(c.roles.outcome);
      for (const auto& [a, b] : result.pairs)
        for (double v : {y[a], y[b]})
          if (v != 0.0 && v != 1.0) outcome_type = "continuous";
    } else if (outcome_type != "binary" && outcome_type != "continuous") {
      throw ConfigError("--outcome-type must be auto, binary or continuous");
    }
  }

  const Eigen::MatrixXd dist =
      result.pairs.empty() ? Eigen::MatrixXd()
                           : distance_matrix(data, result.selected_a, result.selected_b, spec);
  std::string out = csv_line(header);
  for (std::size_t i = 0; i < result.pairs.size(); ++i) {
    const auto [a, b] = result.pairs[i];
    const auto ia = static_cast<Eigen::Index>(
        std::find(result.selected_a.begin(), result.selected_a.end(), a) -
        result.selected_a.begin());
    const auto ib = static_cast<Eigen::Index>(
        std::find(result.selected_b.begin(), result.selected_b.end(), b) -
        result.selected_b.begin());
    std::vector<std::string> fields = {std::to_string(i + 1), std::to_string(a + 1),
                                       std::to_string(b + 1)};
    if (!c.id_column.empty()) {
      fields.push_back(loaded.table.rows[a][id_col]);
      fields.push_back(loaded.table.rows[b][id_col]);
    }
    fields.push_back(format_significant(dist(ia, ib), c.digits));
    if (!c.roles.outcome.empty()) {
      const auto y = data.column(c.roles.outcome);
      fields.push_back(format_significant(y[a], c.digits));
      fields.push_back(format_significant(y[b], c.digits));
      fields.push_back(outcome_type);
    }
    out += csv_line(fields);
  }
  write_output(c.out_path, out);
  return 0;
}

int run_balance_report(const RunConfig& c, std::ostream& warn) {
  require_readable(c.data_path);
  if (!c.profile_path.empty()) require_readable(c.profile_path);
  check_outputs({&c.out_path, &c.write_profile_path});
  const LoadedData loaded = load_dataset(c.data_path, c.roles);
  for (const auto& m : loaded.missing)
    warn << "note: column " << m.column << " has " << m.count << " missing cells\n";
  const Dataset& data = loaded.data;
  if (c.roles.treatment.empty() && c.scale == ScaleChoice::pooled)
    throw ConfigError("--scale pooled needs --treatment");
  const std::vector<double> labels =
      c.roles.treatment.empty() ? std::vector<double>{} : resolve_groups(c, data);
  const ProfileRule rule = profile_rule(c, loaded);
  const Profile profile = build_profile(c, rule, data, labels);
  if (!c.write_profile_path.empty()) write_profile(c.write_profile_path, profile);

  std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
  if (labels.empty()) {
    groups.emplace_back("all", all_rows(data.rows()));
  } else {
    for (double l : labels)
      groups.emplace_back(label_text(l), data.rows_where(c.roles.treatment, l));
  }
  const auto scales = report_scales(data, profile, all_rows(data.rows()));
  const Eigen::MatrixXd values = eval_features(data, profile.features);
  std::string out = "group,n,feature,target,scale,scale_sd,mean,tasmd\n";
  for (const auto& [name, rows] : groups) {
    if (rows.empty()) continue;
    const auto means = weighted_means(values, rows);
    for (std::size_t k = 0; k < profile.features.size(); ++k)
      out += csv_line({name, std::to_string(rows.size()), profile.features[k].name,
                       format_significant(profile.targets[k], c.digits), rule.scale_name,
                       format_significant(scales[k], c.digits),
                       format_significant(means[k], c.digits),
                       format_significant(tasmd(means[k], profile.targets[k], scales[k]),
                                          c.digits)});
  }
  write_output(c.out_path, out);
  return 0;
}

int run_simulate(const RunConfig& c, std::ostream&) {
  check_outputs({&c.out_path});
  ScenarioSpec spec = c.scenario;
  spec.workers = resolve_workers(c.workers);
  spec.validate();
  if (c.full_grid) {
    write_output(c.out_path, run_grid(full_grid(spec), c.digits));
  } else {
    write_output(c.out_path, run_grid({spec}, c.digits));
  }
  return 0;
}

double rounded(double v, int digits) { return std::stod(format_significant(v, digits)); }

ordered_json gamma_json(const GammaResult& g, int digits) {
  ordered_json j;
  j["gamma_star"] =
      g.gamma_star ? ordered_json(rounded(*g.gamma_star, digits)) : ordered_json(nullptr);
  j["alpha"] = g.alpha;
  j["p_at_gamma1"] = rounded(g.p_at_gamma1, digits);
  j["search_tolerance"] = g.search_tolerance;
  j["direction"] = g.direction;
  j["at_ceiling"] = g.at_ceiling;
  j["degenerate"] = g.degenerate;
  return j;
}

int run_sensitivity(const RunConfig& c, std::ostream& warn) {
  require_readable(c.pairs_path);
  check_outputs({&c.out_path});
  CsvTable table = read_csv(c.pairs_path);
  auto col = [&](const char* name) {
    const auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it == table.header.end())
      throw ConfigError(c.pairs_path + ": pairs file needs a '" + name + "' column");
    return static_cast<std::size_t>(it - table.header.begin());
  };
  const std::size_t type_col = col("outcome_type");
  col("pair_id");
  if (table.rows.empty()) throw DataError(c.pairs_path + ": no pairs");
  const std::string type = table.rows.front()[type_col];
  for (const auto& row : table.rows)
    if (row[type_col] != type)
      throw DataError(c.pairs_path + ": outcome_type must be the same on every row");
  if (type != "binary" && type != "continuous")
    throw DataError(c.pairs_path + ": outcome_type must be binary or continuous, got '" +
                    type + "'");
  ColumnRoles roles;
  roles.covariates = {"y_treated", "y_control"};
  const LoadedData loaded = dataset_from_table(std::move(table), roles);
  const auto yt = loaded.data.column("y_treated");
  const auto yc = loaded.data.column("y_control");
  for (std::size_t i = 0; i < yt.size(); ++i)
    if (std::isnan(yt[i]) || std::isnan(yc[i]))
      throw DataError("pair row " + std::to_string(i + 1) + " has a missing outcome");

  ordered_json doc;
  doc["outcome_type"] = type;
  doc["pairs"] = yt.size();
  if (type == "binary") {
    PairedBinary counts;
    for (std::size_t i = 0; i < yt.size(); ++i) {
      if ((yt[i] != 0.0 && yt[i] != 1.0) || (yc[i] != 0.0 && yc[i] != 1.0))
        throw DataError("pair row " + std::to_string(i + 1) + " has a non-binary outcome");
      if (yt[i] == 1.0 && yc[i] == 1.0) ++counts.n11;
      if (yt[i] == 1.0 && yc[i] == 0.0) ++counts.n10;
      if (yt[i] == 0.0 && yc[i] == 1.0) ++counts.n01;
      if (yt[i] == 0.0 && yc[i] == 0.0) ++counts.n00;
    }
    const auto test = mcnemar_test(counts, McNemarMode::exact);
    if (test.degenerate) warn << "warning: no discordant pairs\n";
    doc["counts"] = {{"n11", counts.n11}, {"n10", counts.n10}, {"n01", counts.n01},
                     {"n00", counts.n00}};
    doc["test"] = {{"name", "mcnemar_exact"},
                   {"statistic", test.statistic},
                   {"p_two_sided", rounded(test.p_two_sided, c.digits)},
                   {"p_one_sided", rounded(test.p_one_sided, c.digits)},
                   {"degenerate", test.degenerate}};
    doc["sensitivity"] =
        gamma_json(rosenbaum_gamma_binary(counts, c.alpha, c.gamma_tolerance), c.digits);
  } else {
    std::vector<double> d(yt.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = yt[i] - yc[i];
    std::size_t nonzero = 0;
    for (double v : d) nonzero += v != 0.0 ? 1 : 0;
    const auto mode = nonzero <= 15 ? WilcoxonMode::exact : WilcoxonMode::normal;
    const auto test = wilcoxon_signed_rank(d, mode);
    doc["test"] = {{"name", mode == WilcoxonMode::exact ? "wilcoxon_exact" : "wilcoxon_normal"},
                   {"t_plus", rounded(test.t_plus, c.digits)},
                   {"n_nonzero", test.n},
                   {"p_two_sided", rounded(test.p_two_sided, c.digits)}};
    doc["sensitivity"] =
        gamma_json(rosenbaum_gamma_rank(d, c.alpha, c.gamma_tolerance), c.digits);
  }
  write_output(c.out_path, doc.dump(2) + "\n");
  return 0;
}

template <typename Parse>
auto parsed(const std::string& text, Parse parse) {
  try {
    return parse(text);
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

const char* to_string(Command command) {
  switch (command) {
    case Command::match:
      return "match";
    case Command::pairmatch:
      return "pairmatch";
    case Command::balance_report:
      return "balance-report";
    case Command::simulate:
      return "simulate";
    case Command::sensitivity:
      return "sensitivity";
  }
  return "unknown";
}

const char* to_string(ScaleChoice scale) {
  switch (scale) {
    case ScaleChoice::cohort:
      return "cohort";
    case ScaleChoice::target:
      return "target";
    case ScaleChoice::pooled:
      return "pooled";
  }
  return "unknown";
}

int run_command(const RunConfig& config, std::ostream& warn) {
  switch (config.command) {
    case Command::match:
      return run_match(config, warn);
    case Command::pairmatch:
      return run_pairmatch(config, warn);
    case Command::balance_report:
      return run_balance_report(config, warn);
    case Command::simulate:
      return run_simulate(config, warn);
    case Command::sensitivity:
      return run_sensitivity(config, warn);
  }
  return 0;
}

int cli_main(int argc, const char* const* argv) {
  RunConfig c;
  CLI::App app{"Profile matching, weighting estimators, simulation and paired sensitivity"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string precision = "6";
  app.add_option("--workers", c.workers,
                 "Worker threads (default: all cores; PROFMATCH_WORKERS overrides)");
  app.add_option("--precision", precision, "Significant digits, or 'full'");

  std::string method = "pm";
  std::string scale = "cohort";
  auto data_options = [&](CLI::App* sub) {
    sub->add_option("--data", c.data_path, "Input CSV with a header row")->required();
    sub->add_option("--treatment", c.roles.treatment, "Treatment (group) column");
    sub->add_option("--outcome", c.roles.outcome, "Outcome column");
    sub->add_option("--selection", c.roles.selection,
                    "Selection column; the profile is taken over rows equal to --target-value");
    sub->add_option("--target-value", c.target_value, "Selection value of target rows")
        ->default_val(0);
    sub->add_option("--covariates", c.roles.covariates, "Covariate columns")->delimiter(',');
    sub->add_option("--features", c.features, "Balance features, e.g. X1,X2^2,X1*X3")
        ->delimiter(',');
    sub->add_option("--profile", c.profile_path, "Profile JSON to balance toward");
    sub->add_option("--write-profile", c.write_profile_path, "Save the profile used");
    sub->add_option("--multiplier", c.multiplier, "Tolerance as a multiple of the scale sd")
        ->default_val(0.05);
    sub->add_option("--scale", scale, "Tolerance scale: cohort, target or pooled")
        ->default_val("cohort");
    sub->add_option("--out,-o", c.out_path, "Output file ('-' for stdout)");
  };
  auto solver_options = [&](CLI::App* sub, MatchOptions& m) {
    sub->add_option("--time-limit", m.time_limit, "Seconds per solve")->default_val(60.0);
    sub->add_option("--gap", m.gap_tolerance, "Accepted shortfall from the proven bound")
        ->default_val(0);
    sub->add_option("--node-limit", m.node_limit, "Branch-and-bound nodes per solve (0: none)")
        ->default_val(0);
  };

  auto* match = app.add_subcommand("match", "Largest balanced subsample of each group");
  data_options(match);
  solver_options(match, c.solver);
  match->add_option("--groups", c.groups, "Treatment labels to match")->delimiter(',');
  match->add_option("--treated-label", c.treated_label, "Label of the treated group");
  match->add_option("--method", method, "pm or apm")->default_val("pm");
  match->add_option("--report", c.report_path, "Balance report CSV (default stdout)");
  match->add_option("--estimate", c.estimate_path, "Estimate CSV (default stdout)");
  match->add_option("--bootstrap", c.bootstrap, "Bootstrap resamples for the estimate");
  match->add_option("--seed", c.seed, "Bootstrap seed")->default_val(1);

  auto* pairmatch =
      app.add_subcommand("pairmatch", "Balanced equal-size subsamples of two groups, paired");
  data_options(pairmatch);
  solver_options(pairmatch, c.solver);
  pairmatch->add_option("--groups", c.groups, "Labels of groups A and B")->delimiter(',');
  pairmatch->add_option("--distance", c.distance_columns, "Columns for pair distances")
      ->delimiter(',');
  pairmatch->add_option("--id", c.id_column, "Identifier column copied to the output");
  pairmatch->add_option("--outcome-type", c.outcome_type, "auto, binary or continuous")
      ->default_val("auto");

  auto* balance = app.add_subcommand("balance-report", "TASMD of each group to the profile");
  data_options(balance);
  balance->add_option("--groups", c.groups, "Treatment labels to report")->delimiter(',');

  auto* simulate = app.add_subcommand("simulate", "Run simulation scenarios");
  std::string family = "probit", overlap = "high", het = "A", het_form = "shift",
              target = "non_trial", sim_method = "pm";
  ScenarioSpec& s = c.scenario;
  MatchOptions sim_solver;
  simulate->add_option("--selection-family,--family", family, "probit or logit")
      ->default_val("probit");
  simulate->add_option("--overlap", overlap, "high or low")->default_val("high");
  simulate->add_option("--outcome-model,--om", s.outcome_model, "1, 2 or 3")->default_val(1);
  simulate->add_option("--heterogeneity,--het", het, "A or B")->default_val("A");
  simulate->add_option("--het-form", het_form, "shift or draft_noise")->default_val("shift");
  simulate->add_option("--ps-spec,--ps", s.ps_spec, "1, 2 or 3")->default_val(1);
  simulate->add_option("--method", sim_method, "pm, apm, iow or aiow")->default_val("pm");
  simulate->add_option("--n-cohort", s.n_cohort, "Cohort size")->default_val(1500);
  simulate->add_option("--replicates,--reps", s.replicates, "Replicates")->default_val(200);
  simulate->add_option("--bootstrap-b", s.bootstrap_B, "Bootstrap resamples (0: none)")
      ->default_val(200);
  simulate->add_option("--master-seed,--seed", s.master_seed, "Master seed")->default_val(1);
  simulate->add_option("--target", target, "non_trial or cohort")->default_val("non_trial");
  simulate->add_option("--multiplier", s.multiplier, "Tolerance multiplier")
      ->default_val(0.05);
  solver_options(simulate, sim_solver);
  simulate->add_flag("--full-grid", c.full_grid,
                     "Run all 144 overlap/outcome/heterogeneity/PS/method cells");
  simulate->add_option("--out,-o", c.out_path, "Output CSV ('-' for stdout)");

  auto* sensitivity =
      app.add_subcommand("sensitivity", "Paired test and Rosenbaum Gamma for a pairs file");
  sensitivity->add_option("--pairs", c.pairs_path,
                          "CSV with pair_id, y_treated, y_control, outcome_type")
      ->required();
  sensitivity->add_option("--alpha", c.alpha, "Significance level")->default_val(0.05);
  sensitivity->add_option("--tolerance", c.gamma_tolerance, "Gamma search tolerance")
      ->default_val(0.005);
  sensitivity->add_option("--out,-o", c.out_path, "Output JSON ('-' for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[UsageError]: " << e.what() << "\n";
    return 1;
  }

  try {
    if (precision == "full") {
      c.digits = 17;
    } else {
      char* end = nullptr;
      const long d = std::strtol(precision.c_str(), &end, 10);
      if (*end != '\0' || d < 1 || d > 17)
        throw ConfigError("--precision must be 'full' or 1..17");
      c.digits = static_cast<int>(d);
    }
    if (match->parsed()) c.command = Command::match;
    if (pairmatch->parsed()) c.command = Command::pairmatch;
    if (balance->parsed()) c.command = Command::balance_report;
    if (simulate->parsed()) c.command = Command::simulate;
    if (sensitivity->parsed()) c.command = Command::sensitivity;
    c.method = parsed(c.command == Command::simulate ? sim_method : method, parse_method);
    c.scale = scale == "cohort"   ? ScaleChoice::cohort
              : scale == "target" ? ScaleChoice::target
              : scale == "pooled" ? ScaleChoice::pooled
                                  : throw ConfigError("--scale must be cohort, target or pooled");
    if (c.command == Command::simulate) {
      s.selection_family = parsed(family, parse_selection_family);
      s.overlap = parsed(overlap, parse_overlap);
      s.heterogeneity = parsed(het, parse_heterogeneity);
      s.het_form = parsed(het_form, parse_het_form);
      s.target = parsed(target, parse_target);
      s.method = c.method;
      s.solver_time_limit = sim_solver.time_limit;
      s.solver_gap = sim_solver.gap_tolerance;
      s.solver_node_limit = sim_solver.node_limit;
      try {
        s.validate();
      } catch (const DomainError& e) {
        throw ConfigError(e.what());
      }
    }
    if (c.scale == ScaleChoice::pooled && c.roles.treatment.empty())
      throw ConfigError("--scale pooled needs --treatment");
    return run_command(c, std::cerr);
  } catch (const Error& e) {
    std::cerr << "error[" << e.code() << "]: " << e.what() << "\n";
    return e.kind() == ErrorKind::user ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error[InternalError]: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace profmatch
