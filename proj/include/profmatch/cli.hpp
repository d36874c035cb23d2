#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "profmatch/estimators.hpp"
#include "profmatch/io.hpp"
#include "profmatch/matching.hpp"
#include "profmatch/simulation.hpp"

namespace profmatch {

enum class Command { match, pairmatch, balance_report, simulate, sensitivity };

/// Population whose feature sds set the tolerances when the profile is built
/// from the data: every row, the target rows, or the sd pooled across the
/// treatment groups.
enum class ScaleChoice { cohort, target, pooled };

const char* to_string(Command command);
const char* to_string(ScaleChoice scale);

struct RunConfig {
  Command command = Command::match;
  std::string data_path;
  /// "-" writes to stdout.
  std::string out_path = "-";
  std::string report_path;
  std::string estimate_path;
  std::string profile_path;
  std::string write_profile_path;
  std::string pairs_path;

  ColumnRoles roles;
  /// Balance features such as "X1", "X2^2", "X1*X3"; empty means the raw
  /// covariates.
  std::vector<std::string> features;
  double multiplier = 0.05;
  /// With a selection column, the profile is taken over rows whose selection
  /// equals this value.
  double target_value = 0.0;
  ScaleChoice scale = ScaleChoice::cohort;
  /// Treatment labels to match; empty means every label present.
  std::vector<double> groups;
  std::optional<double> treated_label;
  Method method = Method::pm;
  std::size_t bootstrap = 0;
  std::uint64_t seed = 1;
  MatchOptions solver;
  std::vector<std::string> distance_columns;
  std::string id_column;
  /// auto, binary or continuous.
  std::string outcome_type = "auto";
  double alpha = 0.05;
  double gamma_tolerance = 0.005;

  ScenarioSpec scenario;
  bool full_grid = false;

  /// 0 means default_workers().
  std::size_t workers = 0;
  /// Significant digits of numeric output; 17 for --precision full.
  int digits = 6;
};

/// Runs one command. Warnings go to `warn`. Returns 0; failures throw.
int run_command(const RunConfig& config, std::ostream& warn);

/// Parses arguments, runs the command and maps errors to exit codes:
/// 1 for user errors, 2 for numerical failures. Errors print as
/// "error[<code>]: <message>".
int cli_main(int argc, const char* const* argv);

}  // namespace profmatch
