#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "profmatch/balance.hpp"

namespace profmatch {

/// Maximize sum_t m_t subject to |sum_t m_t d_tk| <= delta_k sum_t m_t for
/// every feature k, with m in {0,1}^n. Row t of `deviations` holds
/// B_k(X_t) - x*_k.
struct BalanceProblem {
  Eigen::MatrixXd deviations;
  std::vector<double> tolerances;
  double time_limit = 60.0;
  /// Accepted shortfall of the incumbent from the proven bound.
  int gap_tolerance = 0;
  /// Branch-and-bound nodes before giving up; 0 means no limit. Unlike the
  /// time limit, results under a node limit do not depend on machine speed.
  long node_limit = 0;

  /// deviations = feature values - profile targets.
  static BalanceProblem from_profile(const Eigen::MatrixXd& feature_values,
                                     const Profile& profile);
  void validate() const;
};

/// The homogeneous 0/1 program behind every matching formulation:
/// maximize sum_t c_t m_t subject to rows * m <= 0, m in {0,1}^n, with
/// integer weights c_t >= 0.
struct BinaryProgram {
  /// R x n; column t holds the coefficients of m_t.
  Eigen::MatrixXd rows;
  std::vector<int> weights;
  double time_limit = 60.0;
  int gap_tolerance = 0;
  long node_limit = 0;

  std::size_t size() const { return weights.size(); }
};

/// Two rows per feature, (d - delta) <= 0 and (-d - delta) <= 0, each
/// divided by max(1, max_t |d_tk|).
BinaryProgram to_binary_program(const BalanceProblem& problem);

enum class SolveStatus { optimal, gap_feasible, time_limit, node_limit, empty_only };
const char* to_string(SolveStatus status);

struct SelectionResult {
  std::vector<std::uint8_t> selected;
  int objective = 0;
  int upper_bound = 0;
  SolveStatus status = SolveStatus::optimal;
  long nodes_explored = 0;

  std::vector<std::size_t> selected_indices() const;
};

enum class Fix : std::int8_t { free = -1, zero = 0, one = 1 };

struct LpRelaxation {
  bool feasible = true;
  double objective = 0.0;
  /// One value in [0, 1] per variable, fixed ones included.
  std::vector<double> values;
  /// c_j - y.a_j per variable with the row prices y clipped at zero; zero for
  /// basic and fixed variables.
  std::vector<double> reduced_costs;
  /// sum_j max over the bounds of reduced_cost_j * m_j: an upper bound on the
  /// LP optimum valid for any nonnegative prices.
  double lagrangian_bound = 0.0;
  int iterations = 0;
};

/// LP relaxation with m in [0,1]^n, honoring `fixed` (empty means all free).
/// Bounded-variable revised primal simplex, two phases, Dantzig pricing with
/// a switch to Bland's rule after a run of degenerate pivots. Throws LpError
/// on numerical failure.
LpRelaxation solve_lp_relaxation(const BinaryProgram& program,
                                 std::span<const Fix> fixed = {});
LpRelaxation solve_lp_relaxation(const BalanceProblem& problem,
                                 std::span<const Fix> fixed = {});

/// Best-bound branch and bound. The bound at each node is
/// floor(lp + 1e-6); ties in bound go to the deeper node, then to the most
/// recently created one. Branches on the most fractional variable (lowest
/// index on ties), exploring the "set to 1" child first. The incumbent starts
/// from a greedy rounding of the root LP.
SelectionResult solve_binary_program(const BinaryProgram& program);
SelectionResult solve_max_balanced_subset(const BalanceProblem& problem);

/// Exhaustive enumeration (n <= 25, else SizeError). Among optimal
/// selections returns the lexicographically smallest selector vector.
SelectionResult brute_force_reference(const BinaryProgram& program);
SelectionResult brute_force_reference(const BalanceProblem& problem);

/// Row activities are <= 0 up to 1e-12 of their absolute mass. This is the
/// acceptance test used by both the solver and the brute-force oracle.
bool satisfies_rows(const BinaryProgram& program,
                    std::span<const std::uint8_t> selected);

/// Audit against the raw problem: |sum m d_k| <= delta_k sum m + 1e-9 *
/// scale, where scale is the absolute mass of the sum.
bool satisfies_balance(const BalanceProblem& problem,
                       std::span<const std::uint8_t> selected);

}  // namespace profmatch
