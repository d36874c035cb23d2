#include "profmatch/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <bit>
#include <numeric>
#include <optional>
#include <queue>
#include <string>

#include "profmatch/error.hpp"

namespace profmatch {

namespace {

constexpr double kBoundSlack = 1e-6;
constexpr double kIntegralityTol = 1e-9;
constexpr double kRowRelativeTol = 1e-12;
constexpr std::size_t kBruteForceLimit = 25;

int weighted_count(const BinaryProgram& program,
                   std::span<const std::uint8_t> selected) {
  int total = 0;
  for (std::size_t t = 0; t < selected.size(); ++t)
    if (selected[t]) total += program.weights[t];
  return total;
}

// Greedy rounding of an LP point: visit units by decreasing LP value (lowest
// index first on ties), keep the longest feasible prefix, then add any later
// unit that keeps every row satisfied.
std::vector<std::uint8_t> greedy_round(const BinaryProgram& program,
                                       std::span<const double> values) {
  const std::size_t n = program.size();
  const auto rows = program.rows.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] > values[b];
  });

  std::vector<long double> activity(static_cast<std::size_t>(rows), 0.0L);
  std::vector<long double> mass(static_cast<std::size_t>(rows), 0.0L);
  auto fits = [&](std::size_t t) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      const long double a = program.rows(r, static_cast<Eigen::Index>(t));
      const long double act = activity[r] + a;
      const long double tol = kRowRelativeTol * (mass[r] + std::abs(a));
      if (act > tol) return false;
    }
    return true;
  };
  auto add = [&](std::size_t t) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      const long double a = program.rows(r, static_cast<Eigen::Index>(t));
      activity[r] += a;
      mass[r] += std::abs(a);
    }
  };
  auto prefix_ok = [&]() {
    for (Eigen::Index r = 0; r < rows; ++r)
      if (activity[r] > kRowRelativeTol * mass[r]) return false;
    return true;
  };

  std::size_t best_prefix = 0;
  for (std::size_t i = 0; i < n; ++i) {
    add(order[i]);
    if (prefix_ok()) best_prefix = i + 1;
  }
  std::fill(activity.begin(), activity.end(), 0.0L);
  std::fill(mass.begin(), mass.end(), 0.0L);
  std::vector<std::uint8_t> chosen(n, 0);
  for (std::size_t i = 0; i < best_prefix; ++i) {
    add(order[i]);
    chosen[order[i]] = 1;
  }
  for (std::size_t i = best_prefix; i < n; ++i) {
    if (program.weights[order[i]] == 0) continue;
    if (fits(order[i])) {
      add(order[i]);
      chosen[order[i]] = 1;
    }
  }
  return chosen;
}

// Rounding of an LP vertex: keep the units at 1 and try every subset of the
// fractional ones, returning the heaviest subset that satisfies every row.
// Basic solutions have at most one fractional unit per row, so the search is
// small; beyond kVertexEnumLimit fractional units nothing is returned.
constexpr std::size_t kVertexEnumLimit = 16;

std::optional<std::vector<std::uint8_t>> vertex_round(
    const BinaryProgram& program, std::span<const double> values) {
  const std::size_t n = program.size();
  const auto rows = program.rows.rows();
  std::vector<std::uint8_t> base(n, 0);
  std::vector<std::size_t> fractional;
  for (std::size_t t = 0; t < n; ++t) {
    if (values[t] >= 1.0 - kIntegralityTol)
      base[t] = 1;
    else if (values[t] > kIntegralityTol && program.weights[t] > 0)
      fractional.push_back(t);
  }
  if (fractional.size() > kVertexEnumLimit) return std::nullopt;

  Eigen::VectorXd activity = Eigen::VectorXd::Zero(rows);
  for (std::size_t t = 0; t < n; ++t)
    if (base[t]) activity += program.rows.col(static_cast<Eigen::Index>(t));
  const double filter = 1e-9 * std::max(1.0, program.rows.cwiseAbs().maxCoeff()) *
                        static_cast<double>(n);

  const std::size_t f = fractional.size();
  const std::uint64_t total = std::uint64_t{1} << f;
  std::uint64_t current = 0;
  std::uint64_t best_mask = 0;
  int best_value = -1;
  int value = 0;
  for (std::uint64_t step = 0; step < total; ++step) {
    if (step > 0) {
      const auto bit = static_cast<std::size_t>(std::countr_zero(step));
      const auto col = static_cast<Eigen::Index>(fractional[bit]);
      current ^= std::uint64_t{1} << bit;
      const bool on = (current >> bit) & 1U;
      activity += (on ? 1.0 : -1.0) * program.rows.col(col);
      value += (on ? 1 : -1) * program.weights[fractional[bit]];
    }
    if (value <= best_value || activity.maxCoeff() > filter) continue;
    std::vector<std::uint8_t> candidate = base;
    for (std::size_t i = 0; i < f; ++i)
      if ((current >> i) & 1U) candidate[fractional[i]] = 1;
    if (!satisfies_rows(program, candidate)) continue;
    best_value = value;
    best_mask = current;
  }
  if (best_value < 0) return std::nullopt;
  for (std::size_t i = 0; i < f; ++i)
    if ((best_mask >> i) & 1U) base[fractional[i]] = 1;
  return base;
}

struct Node {
  std::vector<Fix> fixed;
  int bound = 0;
  int depth = 0;
  long sequence = 0;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound < b.bound;
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.sequence < b.sequence;
  }
};

}  // namespace

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::optimal:
      return "optimal";
    case SolveStatus::gap_feasible:
      return "gap_feasible";
    case SolveStatus::time_limit:
      return "time_limit";
    case SolveStatus::node_limit:
      return "node_limit";
    case SolveStatus::empty_only:
      return "empty_only";
  }
  return "unknown";
}

std::vector<std::size_t> SelectionResult::selected_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < selected.size(); ++t)
    if (selected[t]) out.push_back(t);
  return out;
}

BalanceProblem BalanceProblem::from_profile(const Eigen::MatrixXd& feature_values,
                                            const Profile& profile) {
  profile.validate();
  if (feature_values.cols() != static_cast<Eigen::Index>(profile.features.size()))
    throw ShapeError("balance problem: feature matrix width differs from profile");
  BalanceProblem p;
  p.deviations = feature_values;
  for (Eigen::Index k = 0; k < feature_values.cols(); ++k)
    p.deviations.col(k).array() -= profile.targets[static_cast<std::size_t>(k)];
  p.tolerances = profile.tolerances;
  return p;
}

void BalanceProblem::validate() const {
  if (tolerances.size() != static_cast<std::size_t>(deviations.cols()))
    throw ShapeError("balance problem: one tolerance per feature column required");
  if (!deviations.allFinite())
    throw DataError("balance problem: non-finite deviation");
  for (double d : tolerances)
    if (!(d >= 0.0) || !std::isfinite(d))
      throw DomainError("balance problem: tolerances must be finite and >= 0");
  if (gap_tolerance < 0) throw DomainError("balance problem: negative gap");
  if (node_limit < 0) throw DomainError("balance problem: negative node limit");
}

BinaryProgram to_binary_program(const BalanceProblem& problem) {
  problem.validate();
  const Eigen::Index n = problem.deviations.rows();
  const Eigen::Index k = problem.deviations.cols();
  BinaryProgram program;
  program.rows.resize(2 * k, n);
  for (Eigen::Index f = 0; f < k; ++f) {
    const double delta = problem.tolerances[static_cast<std::size_t>(f)];
    const double scale =
        std::max(1.0, n > 0 ? problem.deviations.col(f).cwiseAbs().maxCoeff() : 0.0);
    for (Eigen::Index t = 0; t < n; ++t) {
      const double d = problem.deviations(t, f);
      program.rows(2 * f, t) = (d - delta) / scale;
      program.rows(2 * f + 1, t) = (-d - delta) / scale;
    }
  }
  program.weights.assign(static_cast<std::size_t>(n), 1);
  program.time_limit = problem.time_limit;
  program.gap_tolerance = problem.gap_tolerance;
  program.node_limit = problem.node_limit;
  return program;
}

bool satisfies_rows(const BinaryProgram& program,
                    std::span<const std::uint8_t> selected) {
  for (Eigen::Index r = 0; r < program.rows.rows(); ++r) {
    long double activity = 0.0L;
    long double mass = 0.0L;
    for (std::size_t t = 0; t < selected.size(); ++t) {
      if (!selected[t]) continue;
      const long double a = program.rows(r, static_cast<Eigen::Index>(t));
      activity += a;
      mass += std::abs(a);
    }
    if (activity > kRowRelativeTol * mass) return false;
  }
  return true;
}

bool satisfies_balance(const BalanceProblem& problem,
                       std::span<const std::uint8_t> selected) {
  for (Eigen::Index k = 0; k < problem.deviations.cols(); ++k) {
    long double sum = 0.0L;
    long double mass = 0.0L;
    long double count = 0.0L;
    for (std::size_t t = 0; t < selected.size(); ++t) {
      if (!selected[t]) continue;
      const long double d = problem.deviations(static_cast<Eigen::Index>(t), k);
      sum += d;
      mass += std::abs(d);
      count += 1.0L;
    }
    const long double delta = problem.tolerances[static_cast<std::size_t>(k)];
    if (std::abs(sum) > delta * count + 1e-9L * std::max(1.0L, mass)) return false;
  }
  return true;
}

SelectionResult solve_binary_program(const BinaryProgram& program) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const std::size_t n = program.size();
  if (program.rows.cols() != static_cast<Eigen::Index>(n))
    throw ShapeError("solve: rows and weights disagree");
  for (int w : program.weights)
    if (w < 0) throw DomainError("solve: negative objective weight");

  SelectionResult best;
  best.selected.assign(n, 0);
  best.objective = 0;

  auto offer = [&](std::vector<std::uint8_t> candidate) {
    const int value = weighted_count(program, candidate);
    if (value > best.objective && satisfies_rows(program, candidate)) {
      best.objective = value;
      best.selected = std::move(candidate);
    }
  };

  auto trivial_bound = [&](const std::vector<Fix>& fixed) {
    int bound = 0;
    for (std::size_t t = 0; t < n; ++t)
      if (fixed[t] != Fix::zero) bound += program.weights[t];
    return bound;
  };

  std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
  long sequence = 0;
  {
    Node root;
    root.fixed.assign(n, Fix::free);
    root.bound = trivial_bound(root.fixed);
    root.sequence = sequence++;
    open.push(std::move(root));
  }

  long explored = 0;
  bool timed_out = false;
  bool out_of_nodes = false;
  bool root_done = false;
  while (!open.empty()) {
    if (open.top().bound <= best.objective + program.gap_tolerance) break;
    const double elapsed =
        std::chrono::duration<double>(Clock::now() - start).count();
    if (elapsed > program.time_limit) {
      timed_out = true;
      break;
    }
    if (program.node_limit > 0 && explored >= program.node_limit) {
      out_of_nodes = true;
      break;
    }
    Node node = open.top();
    open.pop();
    ++explored;

    LpRelaxation lp;
    bool lp_ok = true;
    try {
      lp = solve_lp_relaxation(program, node.fixed);
    } catch (const LpError&) {
      lp_ok = false;
    }
    if (lp_ok && !lp.feasible) continue;

    int bound = lp_ok ? static_cast<int>(std::floor(lp.objective + kBoundSlack))
                      : trivial_bound(node.fixed);
    bound = std::min(bound, node.bound);
    if (bound <= best.objective) continue;

    std::size_t branch_var = n;
    if (lp_ok) {
      if (!root_done || node.depth % 4 == 0) offer(greedy_round(program, lp.values));
      root_done = true;
      if (auto rounded = vertex_round(program, lp.values)) offer(std::move(*rounded));
      double best_gap = 1.0;
      bool integral = true;
      for (std::size_t t = 0; t < n; ++t) {
        if (node.fixed[t] != Fix::free) continue;
        const double v = lp.values[t];
        const double frac = std::abs(v - std::round(v));
        if (frac <= kIntegralityTol) continue;
        integral = false;
        const double gap = std::abs(v - 0.5);
        if (gap < best_gap) {
          best_gap = gap;
          branch_var = t;
        }
      }
      if (integral) {
        std::vector<std::uint8_t> candidate(n, 0);
        for (std::size_t t = 0; t < n; ++t)
          candidate[t] = lp.values[t] > 0.5 ? 1 : 0;
        if (satisfies_rows(program, candidate)) {
          offer(std::move(candidate));
          continue;
        }
      }
    }
    if (branch_var == n) {
      // Integral but rejected by the exact row check, or no LP at all.
      for (std::size_t t = 0; t < n; ++t)
        if (node.fixed[t] == Fix::free) {
          branch_var = t;
          break;
        }
      if (branch_var == n) continue;
    }
    if (bound <= best.objective + program.gap_tolerance) continue;

    // Reduced-cost fixing: a free variable whose move off its LP bound would
    // push the Lagrangian bound down to the incumbent stays put below here.
    if (lp_ok) {
      const int cutoff = best.objective + program.gap_tolerance;
      for (std::size_t t = 0; t < n; ++t) {
        if (node.fixed[t] != Fix::free || t == branch_var) continue;
        const double d = lp.reduced_costs[t];
        if (d == 0.0) continue;
        if (std::floor(lp.lagrangian_bound - std::abs(d) + kBoundSlack) > cutoff)
          continue;
        node.fixed[t] = d < 0.0 ? Fix::zero : Fix::one;
      }
    }

    Node zero{node.fixed, bound, node.depth + 1, sequence++};
    zero.fixed[branch_var] = Fix::zero;
    Node one{std::move(node.fixed), bound, node.depth + 1, sequence++};
    one.fixed[branch_var] = Fix::one;
    open.push(std::move(zero));
    open.push(std::move(one));
  }

  best.nodes_explored = explored;
  best.upper_bound = open.empty() ? best.objective
                                  : std::max(best.objective, open.top().bound);
  if (timed_out)
    best.status = SolveStatus::time_limit;
  else if (out_of_nodes)
    best.status = SolveStatus::node_limit;
  else if (best.upper_bound > best.objective)
    best.status = SolveStatus::gap_feasible;
  else
    best.status = best.objective == 0 ? SolveStatus::empty_only
                                      : SolveStatus::optimal;
  return best;
}

SelectionResult solve_max_balanced_subset(const BalanceProblem& problem) {
  SelectionResult result = solve_binary_program(to_binary_program(problem));
  if (!satisfies_balance(problem, result.selected))
    throw LpError("solver returned a selection that fails the balance audit");
  return result;
}

SelectionResult brute_force_reference(const BinaryProgram& program) {
  const std::size_t n = program.size();
  if (n > kBruteForceLimit)
    throw SizeError("brute force limited to 25 units, got " + std::to_string(n));
  const auto rows = program.rows.rows();

  // Gray-code walk with running sums as a cheap filter; candidates that could
  // improve the incumbent are re-checked exactly.
  std::vector<double> running(static_cast<std::size_t>(rows), 0.0);
  double filter_tol = 1e-7;
  for (Eigen::Index r = 0; r < rows; ++r)
    filter_tol = std::max(filter_tol, 1e-7 * program.rows.row(r).cwiseAbs().sum());

  std::vector<std::uint8_t> current(n, 0);
  std::vector<std::uint8_t> best(n, 0);
  int best_value = 0;
  int value = 0;
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t step = 1; step < total; ++step) {
    const auto t = static_cast<std::size_t>(std::countr_zero(step));
    const double sign = current[t] ? -1.0 : 1.0;
    current[t] ^= 1;
    value += current[t] ? program.weights[t] : -program.weights[t];
    for (Eigen::Index r = 0; r < rows; ++r)
      running[r] += sign * program.rows(r, static_cast<Eigen::Index>(t));
    if (value < best_value) continue;
    bool maybe = true;
    for (Eigen::Index r = 0; r < rows && maybe; ++r)
      if (running[r] > filter_tol) maybe = false;
    if (!maybe || !satisfies_rows(program, current)) continue;
    // Lexicographically smaller means a 0 at the first differing position.
    if (value > best_value ||
        std::lexicographical_compare(current.begin(), current.end(),
                                     best.begin(), best.end())) {
      best_value = value;
      best = current;
    }
  }

  SelectionResult result;
  result.selected = std::move(best);
  result.objective = best_value;
  result.upper_bound = best_value;
  result.status = best_value == 0 ? SolveStatus::empty_only : SolveStatus::optimal;
  result.nodes_explored = static_cast<long>(total);
  return result;
}

SelectionResult brute_force_reference(const BalanceProblem& problem) {
  return brute_force_reference(to_binary_program(problem));
}

}  // namespace profmatch
