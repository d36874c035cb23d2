#include "profmatch/matching.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "profmatch/error.hpp"

namespace profmatch {

namespace {

std::string label_text(double label) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", label);
  return buf;
}

std::vector<std::size_t> selected_rows(std::span<const std::size_t> rows,
                                       std::span<const std::uint8_t> selected) {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < rows.size(); ++t)
    if (selected[t]) out.push_back(rows[t]);
  return out;
}

double subset_mean(std::span<const double> values,
                   std::span<const std::size_t> rows) {
  if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (std::size_t r : rows) sum += values[r];
  return sum / static_cast<double>(rows.size());
}

// Block-diagonal stack of two programs plus the two rows that force equal
// selected counts.
BinaryProgram stacked_program(const BinaryProgram& a, const BinaryProgram& b) {
  const Eigen::Index ra = a.rows.rows();
  const Eigen::Index rb = b.rows.rows();
  const auto na = static_cast<Eigen::Index>(a.size());
  const auto nb = static_cast<Eigen::Index>(b.size());
  BinaryProgram out;
  out.rows = Eigen::MatrixXd::Zero(ra + rb + 2, na + nb);
  out.rows.block(0, 0, ra, na) = a.rows;
  out.rows.block(ra, na, rb, nb) = b.rows;
  out.rows.block(ra + rb, 0, 1, na).setOnes();
  out.rows.block(ra + rb, na, 1, nb).setConstant(-1.0);
  out.rows.row(ra + rb + 1) = -out.rows.row(ra + rb);
  out.weights.assign(static_cast<std::size_t>(na), 1);
  out.weights.resize(static_cast<std::size_t>(na + nb), 0);
  out.time_limit = a.time_limit;
  out.gap_tolerance = a.gap_tolerance;
  out.node_limit = a.node_limit;
  return out;
}

SelectionResult split_front(const SelectionResult& joint, std::size_t n) {
  SelectionResult out = joint;
  out.selected.assign(joint.selected.begin(),
                      joint.selected.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

}  // namespace

std::vector<std::size_t> GroupMatch::matched_rows() const {
  return selected_rows(rows, result.selected);
}

std::vector<double> report_scales(const Dataset& data, const Profile& profile,
                                  std::span<const std::size_t> rows) {
  if (profile.scale_sds) return *profile.scale_sds;
  return column_sds(eval_features(data.select_rows(rows), profile.features));
}

std::vector<FeatureBalance> balance_report(const Dataset& data,
                                           const Profile& profile,
                                           std::span<const std::size_t> before,
                                           std::span<const std::size_t> after,
                                           std::span<const double> scale_sds) {
  profile.validate();
  if (scale_sds.size() != profile.features.size())
    throw ShapeError("balance report: one scale per feature required");
  std::vector<std::size_t> all(before.begin(), before.end());
  all.insert(all.end(), after.begin(), after.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());

  // Evaluate features only on the rows that are reported.
  std::vector<std::size_t> slot(data.rows(), 0);
  for (std::size_t i = 0; i < all.size(); ++i) slot[all[i]] = i;
  auto remap = [&](std::span<const std::size_t> rows) {
    std::vector<std::size_t> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) out.push_back(slot[r]);
    return out;
  };
  const Eigen::MatrixXd values =
      eval_features(data.select_rows(all), profile.features);
  const auto before_local = remap(before);
  const auto after_local = remap(after);

  std::vector<FeatureBalance> out;
  for (std::size_t k = 0; k < profile.features.size(); ++k) {
    const auto col = values.col(static_cast<Eigen::Index>(k));
    const std::span<const double> column(col.data(),
                                         static_cast<std::size_t>(col.size()));
    FeatureBalance fb;
    fb.feature = profile.features[k].name;
    fb.target = profile.targets[k];
    fb.scale_sd = scale_sds[k];
    const double mb = subset_mean(column, before_local);
    const double ma = subset_mean(column, after_local);
    fb.before = std::isnan(mb) ? mb : tasmd(mb, fb.target, fb.scale_sd);
    fb.after = std::isnan(ma) ? ma : tasmd(ma, fb.target, fb.scale_sd);
    out.push_back(std::move(fb));
  }
  return out;
}

BalanceProblem balance_problem(const Dataset& data, const Profile& profile,
                               std::span<const std::size_t> rows,
                               const MatchOptions& options) {
  BalanceProblem problem = BalanceProblem::from_profile(
      eval_features(data.select_rows(rows), profile.features), profile);
  problem.time_limit = options.time_limit;
  problem.gap_tolerance = options.gap_tolerance;
  problem.node_limit = options.node_limit;
  return problem;
}

std::vector<GroupMatch> profile_match(const Dataset& data,
                                      const Profile& profile,
                                      const std::string& group_column,
                                      std::span<const double> labels,
                                      const MatchOptions& options) {
  profile.validate();
  std::vector<GroupMatch> out;
  std::vector<std::size_t> union_rows;
  for (double label : labels) {
    GroupMatch g;
    g.label = label;
    g.rows = data.rows_where(group_column, label);
    if (g.rows.empty())
      throw EmptyInputError("group " + label_text(label) + ": no rows with " +
                            group_column + " = " + label_text(label));
    union_rows.insert(union_rows.end(), g.rows.begin(), g.rows.end());
    try {
      g.result = solve_max_balanced_subset(
          balance_problem(data, profile, g.rows, options));
    } catch (Error& e) {
      e.add_context("group " + label_text(label));
      throw;
    }
    out.push_back(std::move(g));
  }
  std::sort(union_rows.begin(), union_rows.end());
  const std::vector<double> scales = report_scales(data, profile, union_rows);
  for (GroupMatch& g : out) {
    try {
      g.balance = balance_report(data, profile, g.rows, g.matched_rows(), scales);
    } catch (Error& e) {
      e.add_context("group " + label_text(g.label));
      throw;
    }
  }
  return out;
}

BinaryProgram copy_program(const BalanceProblem& problem) {
  const BinaryProgram single = to_binary_program(problem);
  return stacked_program(single, single);
}

SelectionResult profile_match_via_copy(const BalanceProblem& problem) {
  const std::size_t n = static_cast<std::size_t>(problem.deviations.rows());
  SelectionResult result = split_front(solve_binary_program(copy_program(problem)), n);
  if (!satisfies_balance(problem, result.selected))
    throw LpError("copy formulation returned a selection that fails the balance audit");
  return result;
}

BinaryProgram pairwise_program(const BalanceProblem& a, const BalanceProblem& b) {
  if (a.deviations.cols() != b.deviations.cols())
    throw ShapeError("pairwise program: groups differ in feature count");
  return stacked_program(to_binary_program(a), to_binary_program(b));
}

Eigen::MatrixXd distance_matrix(const Dataset& data,
                                std::span<const std::size_t> rows_a,
                                std::span<const std::size_t> rows_b,
                                const DistanceSpec& spec) {
  if (!spec.scales.empty() && spec.scales.size() != spec.columns.size())
    throw ShapeError("distance: one scale per column required");
  Eigen::MatrixXd d =
      Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows_a.size()),
                            static_cast<Eigen::Index>(rows_b.size()));
  for (std::size_t c = 0; c < spec.columns.size(); ++c) {
    const double scale = spec.scales.empty() ? 1.0 : spec.scales[c];
    if (!(scale > 0.0) || !std::isfinite(scale))
      throw DomainError("distance: scale for '" + spec.columns[c] +
                        "' must be positive");
    const auto values = data.column(spec.columns[c]);
    for (std::size_t i = 0; i < rows_a.size(); ++i)
      for (std::size_t j = 0; j < rows_b.size(); ++j)
        d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +=
            std::abs(values[rows_a[i]] - values[rows_b[j]]) / scale;
  }
  if (!d.allFinite()) throw DataError("distance: non-finite covariate value");
  return d;
}

Assignment solve_assignment(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols())
    throw SizeError("assignment needs a square cost matrix, got " +
                    std::to_string(cost.rows()) + "x" +
                    std::to_string(cost.cols()));
  if (!cost.allFinite()) throw DataError("assignment: non-finite cost");
  const auto n = static_cast<std::size_t>(cost.rows());
  Assignment out;
  if (n == 0) return out;

  // Shortest augmenting paths with row/column potentials, 1-based with a
  // virtual column 0.
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> owner(n + 1, 0), way(n + 1, 0);
  auto c = [&](std::size_t i, std::size_t j) {
    return cost(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j - 1));
  };
  for (std::size_t i = 1; i <= n; ++i) {
    owner[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = owner[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = c(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  // 0-based matching.
  std::vector<std::size_t> col_of(n), row_of(n);
  for (std::size_t j = 1; j <= n; ++j) {
    row_of[j - 1] = owner[j] - 1;
    col_of[owner[j] - 1] = j - 1;
  }
  const double tol = 1e-9 * std::max(1.0, cost.cwiseAbs().maxCoeff()) *
                     static_cast<double>(n);
  auto tight = [&](std::size_t i, std::size_t j) {
    return c(i + 1, j + 1) - u[i + 1] - v[j + 1] <= tol;
  };

  // Every optimal assignment uses only tight edges. Fix rows in order, each
  // to the smallest tight column reachable by rerouting the rows after it
  // along an alternating path.
  std::vector<std::size_t> via(n);
  std::vector<bool> reached(n);
  std::vector<std::size_t> queue;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t home = col_of[i];
    std::fill(reached.begin(), reached.end(), false);
    queue.assign(1, home);
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const std::size_t col = queue[q];
      for (std::size_t r = i + 1; r < n; ++r) {
        if (reached[r] || !tight(r, col)) continue;
        reached[r] = true;
        via[r] = col;
        queue.push_back(col_of[r]);
      }
    }
    std::size_t pick = home;
    for (std::size_t j = 0; j < home; ++j) {
      if (tight(i, j) && reached[row_of[j]]) {
        pick = j;
        break;
      }
    }
    if (pick == home) continue;
    // Row i takes `pick`; its owner moves to the column it was reached by,
    // and so on back to `home`.
    std::size_t r = row_of[pick];
    col_of[i] = pick;
    row_of[pick] = i;
    while (true) {
      const std::size_t col = via[r];
      const std::size_t next = col == home ? n : row_of[col];
      col_of[r] = col;
      row_of[col] = r;
      if (next == n || next == i) break;
      r = next;
    }
  }

  out.column_of_row = col_of;
  for (std::size_t i = 0; i < n; ++i)
    out.total += cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col_of[i]));
  return out;
}

PairMatchResult optimal_rematch(const Dataset& data,
                                std::span<const std::size_t> selected_a,
                                std::span<const std::size_t> selected_b,
                                const DistanceSpec& spec) {
  if (selected_a.size() != selected_b.size())
    throw SizeError("re-matching needs equal group sizes, got " +
                    std::to_string(selected_a.size()) + " and " +
                    std::to_string(selected_b.size()));
  PairMatchResult out;
  out.selected_a.assign(selected_a.begin(), selected_a.end());
  out.selected_b.assign(selected_b.begin(), selected_b.end());
  const Assignment assignment =
      solve_assignment(distance_matrix(data, selected_a, selected_b, spec));
  for (std::size_t i = 0; i < selected_a.size(); ++i)
    out.pairs.emplace_back(selected_a[i], selected_b[assignment.column_of_row[i]]);
  out.total_distance = assignment.total;
  return out;
}

PairMatchResult pairwise_cardinality_match(const Dataset& data,
                                           const std::string& group_column,
                                           double label_a, double label_b,
                                           const Profile& profile,
                                           const DistanceSpec& spec,
                                           const MatchOptions& options) {
  const auto rows_a = data.rows_where(group_column, label_a);
  const auto rows_b = data.rows_where(group_column, label_b);
  if (rows_a.empty() || rows_b.empty())
    throw EmptyArmError("pair matching: group " +
                        label_text(rows_a.empty() ? label_a : label_b) +
                        " has no rows");
  const BalanceProblem pa = balance_problem(data, profile, rows_a, options);
  const BalanceProblem pb = balance_problem(data, profile, rows_b, options);
  const SelectionResult joint = solve_binary_program(pairwise_program(pa, pb));
  SelectionResult side_a = split_front(joint, rows_a.size());
  std::vector<std::uint8_t> side_b(joint.selected.begin() +
                                       static_cast<std::ptrdiff_t>(rows_a.size()),
                                   joint.selected.end());
  if (!satisfies_balance(pa, side_a.selected) || !satisfies_balance(pb, side_b))
    throw LpError("pair matching returned a selection that fails the balance audit");

  PairMatchResult out = optimal_rematch(data, selected_rows(rows_a, side_a.selected),
                                        selected_rows(rows_b, side_b), spec);
  out.solve = std::move(side_a);
  return out;
}

}  // namespace profmatch
