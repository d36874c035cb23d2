#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "profmatch/balance.hpp"
#include "profmatch/dataset.hpp"
#include "profmatch/solver.hpp"

namespace profmatch {

struct MatchOptions {
  double time_limit = 60.0;
  int gap_tolerance = 0;
  /// 0 means no limit.
  long node_limit = 0;
};

/// TASMD of one feature before and after matching.
struct FeatureBalance {
  std::string feature;
  double target = 0.0;
  double scale_sd = 0.0;
  double before = 0.0;
  /// NaN when nothing was selected.
  double after = 0.0;
};

struct GroupMatch {
  double label = 0.0;
  /// Dataset rows of the group, in dataset order; `result.selected` runs
  /// parallel to this list.
  std::vector<std::size_t> rows;
  SelectionResult result;
  std::vector<FeatureBalance> balance;

  std::vector<std::size_t> matched_rows() const;
};

/// Scale used for TASMD reports: the profile's scale_sds when present,
/// otherwise each feature's sd over `rows`.
std::vector<double> report_scales(const Dataset& data, const Profile& profile,
                                  std::span<const std::size_t> rows);

/// TASMD per feature for the `before` and `after` row sets.
std::vector<FeatureBalance> balance_report(const Dataset& data,
                                           const Profile& profile,
                                           std::span<const std::size_t> before,
                                           std::span<const std::size_t> after,
                                           std::span<const double> scale_sds);

/// Balance problem for a subset of rows.
BalanceProblem balance_problem(const Dataset& data, const Profile& profile,
                               std::span<const std::size_t> rows,
                               const MatchOptions& options = {});

/// Independent largest-balanced-subset solves, one per group label. Errors
/// carry the group label in their message; a label with no rows is an
/// EmptyInputError.
std::vector<GroupMatch> profile_match(const Dataset& data,
                                      const Profile& profile,
                                      const std::string& group_column,
                                      std::span<const double> labels,
                                      const MatchOptions& options = {});

/// The same problem posed on the unit set and an identical copy, with equal
/// selected counts and balance on both sides. Variables are
/// [original n][copy n]; only originals carry objective weight.
BinaryProgram copy_program(const BalanceProblem& problem);
/// Solves copy_program and returns the original-side selection.
SelectionResult profile_match_via_copy(const BalanceProblem& problem);

/// Two groups balanced toward the same profile with equal selected counts.
/// Variables are [group A][group B]; the objective counts group A.
BinaryProgram pairwise_program(const BalanceProblem& a, const BalanceProblem& b);

struct DistanceSpec {
  std::vector<std::string> columns;
  /// One per column; empty means 1 for every column.
  std::vector<double> scales;
};

/// sum_c |a_c - b_c| / scale_c between every selected A row and B row.
Eigen::MatrixXd distance_matrix(const Dataset& data,
                                std::span<const std::size_t> rows_a,
                                std::span<const std::size_t> rows_b,
                                const DistanceSpec& spec);

struct Assignment {
  /// column_of_row[i] is the column assigned to row i.
  std::vector<std::size_t> column_of_row;
  double total = 0.0;
};

/// Minimum-cost perfect assignment (Hungarian method with potentials). Among
/// optimal assignments the one whose column_of_row vector is
/// lexicographically smallest is returned. Throws SizeError unless square.
Assignment solve_assignment(const Eigen::MatrixXd& cost);

struct PairMatchResult {
  std::vector<std::size_t> selected_a;
  std::vector<std::size_t> selected_b;
  /// (row in A, row in B), ordered by the A row.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  double total_distance = 0.0;
  SelectionResult solve;
};

/// Pairs selected_a[i] with selected_b[assignment[i]] at minimum total
/// distance. Throws SizeError for unequal sizes.
PairMatchResult optimal_rematch(const Dataset& data,
                                std::span<const std::size_t> selected_a,
                                std::span<const std::size_t> selected_b,
                                const DistanceSpec& spec);

/// Largest equal-size balanced subsets of groups A and B, then re-paired by
/// optimal_rematch.
PairMatchResult pairwise_cardinality_match(const Dataset& data,
                                           const std::string& group_column,
                                           double label_a, double label_b,
                                           const Profile& profile,
                                           const DistanceSpec& spec,
                                           const MatchOptions& options = {});

}  // namespace profmatch
