#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "profmatch/error.hpp"
#include "profmatch/solver.hpp"

namespace profmatch {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPivotTol = 1e-10;
constexpr double kCostTol = 1e-9;
constexpr double kPhaseOneTol = 1e-9;
constexpr int kDegenerateRunBeforeBland = 50;
constexpr int kRefactorEvery = 100;

// Variables are laid out as [structural 0..n) [slack n..n+m) [artificial
// n+m..n+2m). Row i reads  a_i . x + s_i - r_i = 0.
class BoundedSimplex {
 public:
  BoundedSimplex(const BinaryProgram& program, std::span<const Fix> fixed)
      : a_(program.rows),
        m_(static_cast<int>(program.rows.rows())),
        n_(static_cast<int>(program.size())),
        total_(n_ + 2 * m_),
        lower_(static_cast<std::size_t>(total_), 0.0),
        upper_(static_cast<std::size_t>(total_), 0.0),
        x_(static_cast<std::size_t>(total_), 0.0),
        at_upper_(static_cast<std::size_t>(total_), false),
        basic_row_(static_cast<std::size_t>(total_), -1),
        cost_(static_cast<std::size_t>(total_), 0.0),
        weights_(program.weights) {
    for (int j = 0; j < n_; ++j) {
      const Fix f = fixed.empty() ? Fix::free : fixed[static_cast<std::size_t>(j)];
      lower_[j] = f == Fix::one ? 1.0 : 0.0;
      upper_[j] = f == Fix::zero ? 0.0 : 1.0;
      x_[j] = lower_[j];
      at_upper_[j] = f == Fix::one;
    }
    basis_.resize(static_cast<std::size_t>(m_));
    binv_ = Eigen::MatrixXd::Identity(m_, m_);
    // Row activity of the starting point decides slack or artificial.
    Eigen::VectorXd activity = Eigen::VectorXd::Zero(m_);
    for (int j = 0; j < n_; ++j)
      if (x_[j] != 0.0) activity += a_.col(j) * x_[j];
    for (int i = 0; i < m_; ++i) {
      const int slack = n_ + i;
      const int art = n_ + m_ + i;
      upper_[slack] = kInf;
      if (activity[i] <= 0.0) {
        basis_[i] = slack;
        x_[slack] = -activity[i];
        upper_[art] = 0.0;
      } else {
        basis_[i] = art;
        x_[art] = activity[i];
        upper_[art] = kInf;
        binv_(i, i) = -1.0;  // inverse of the -e_i column
        needs_phase_one_ = true;
      }
      basic_row_[basis_[i]] = i;
    }
    max_iterations_ = 50 * (total_ + 10);
  }

  LpRelaxation run() {
    LpRelaxation out;
    if (needs_phase_one_) {
      for (int i = 0; i < m_; ++i) cost_[n_ + m_ + i] = -1.0;
      iterate();
      double infeasibility = 0.0;
      for (int i = 0; i < m_; ++i) infeasibility += x_[n_ + m_ + i];
      if (infeasibility > kPhaseOneTol * (1.0 + scale())) {
        out.feasible = false;
        out.iterations = iterations_;
        return out;
      }
      for (int i = 0; i < m_; ++i) {
        const int art = n_ + m_ + i;
        cost_[art] = 0.0;
        upper_[art] = 0.0;
        if (basic_row_[art] < 0) x_[art] = 0.0;
      }
    }
    for (int j = 0; j < n_; ++j) cost_[j] = static_cast<double>(weights_[j]);
    bland_ = false;
    degenerate_run_ = 0;
    iterate();

    out.values.resize(static_cast<std::size_t>(n_));
    for (int j = 0; j < n_; ++j)
      out.values[j] = std::clamp(x_[j], 0.0, 1.0);
    for (int j = 0; j < n_; ++j) out.objective += weights_[j] * out.values[j];
    price_out(out);
    out.iterations = iterations_;
    return out;
  }

 private:
  void price_out(LpRelaxation& out) const {
    Eigen::RowVectorXd cb(m_);
    for (int i = 0; i < m_; ++i) cb[i] = cost_[basis_[i]];
    const Eigen::RowVectorXd y = (cb * binv_).cwiseMax(0.0);
    out.reduced_costs.assign(static_cast<std::size_t>(n_), 0.0);
    out.lagrangian_bound = 0.0;
    for (int j = 0; j < n_; ++j) {
      const double d = cost_[j] - y.dot(a_.col(j));
      out.lagrangian_bound += std::max(d * lower_[j], d * upper_[j]);
      if (basic_row_[j] < 0 && upper_[j] > lower_[j]) out.reduced_costs[j] = d;
    }
  }

  double scale() const {
    return std::max(1.0, a_.cwiseAbs().maxCoeff()) * std::max(1, n_);
  }

  Eigen::VectorXd column(int j) const {
    if (j < n_) return a_.col(j);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(m_);
    e[j < n_ + m_ ? j - n_ : j - n_ - m_] = j < n_ + m_ ? 1.0 : -1.0;
    return e;
  }

  // B^-1 applied to column j without materializing unit columns.
  Eigen::VectorXd ftran(int j) const {
    if (j < n_) return binv_ * a_.col(j);
    if (j < n_ + m_) return binv_.col(j - n_);
    return -binv_.col(j - n_ - m_);
  }

  double reduced_cost(int j, const Eigen::RowVectorXd& y) const {
    double dot;
    if (j < n_)
      dot = y.dot(a_.col(j));
    else if (j < n_ + m_)
      dot = y[j - n_];
    else
      dot = -y[j - n_ - m_];
    return cost_[j] - dot;
  }

  void refactor() {
    Eigen::MatrixXd b(m_, m_);
    for (int i = 0; i < m_; ++i) b.col(i) = column(basis_[i]);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(b);
    if (!lu.isInvertible()) throw LpError("simplex: singular basis");
    binv_ = lu.inverse();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m_);
    for (int j = 0; j < total_; ++j)
      if (basic_row_[j] < 0 && x_[j] != 0.0) rhs -= column(j) * x_[j];
    const Eigen::VectorXd xb = binv_ * rhs;
    for (int i = 0; i < m_; ++i) x_[basis_[i]] = xb[i];
    pivots_since_refactor_ = 0;
  }

  void iterate() {
    Eigen::RowVectorXd y(m_);
    std::vector<double> reduced(static_cast<std::size_t>(total_), 0.0);
    bool prices_stale = true;
    while (true) {
      if (++iterations_ > max_iterations_)
        throw LpError("simplex: iteration limit reached");
      if (prices_stale) {
        Eigen::RowVectorXd cb(m_);
        for (int i = 0; i < m_; ++i) cb[i] = cost_[basis_[i]];
        y = cb * binv_;
        for (int j = 0; j < total_; ++j)
          reduced[j] = basic_row_[j] >= 0 ? 0.0 : reduced_cost(j, y);
        prices_stale = false;
      }

      int entering = -1;
      double best = 0.0;
      for (int j = 0; j < total_; ++j) {
        if (basic_row_[j] >= 0 || upper_[j] <= lower_[j]) continue;
        const double d = reduced[j];
        const bool improves =
            at_upper_[j] ? d < -kCostTol : d > kCostTol;
        if (!improves) continue;
        if (bland_) {
          entering = j;
          break;
        }
        if (std::abs(d) > best) {
          best = std::abs(d);
          entering = j;
        }
      }
      if (entering < 0) return;

      const double direction = at_upper_[entering] ? -1.0 : 1.0;
      const Eigen::VectorXd alpha = ftran(entering);
      // Basic variable i moves by -theta * direction * alpha_i.
      double theta = upper_[entering] - lower_[entering];
      int leaving_row = -1;
      bool leaving_to_upper = false;
      double leaving_pivot = 0.0;
      for (int i = 0; i < m_; ++i) {
        const double rate = -direction * alpha[i];
        const int var = basis_[i];
        double limit;
        bool to_upper;
        if (rate < -kPivotTol) {
          limit = (x_[var] - lower_[var]) / -rate;
          to_upper = false;
        } else if (rate > kPivotTol && upper_[var] < kInf) {
          limit = (upper_[var] - x_[var]) / rate;
          to_upper = true;
        } else {
          continue;
        }
        limit = std::max(limit, 0.0);
        // Ties with the entering variable's own bound keep the bound flip;
        // ties between rows go to the larger pivot (Bland: lower index).
        bool take = limit < theta - 1e-12;
        if (!take && leaving_row >= 0 && limit <= theta + 1e-12)
          take = bland_ ? var < basis_[leaving_row]
                        : std::abs(alpha[i]) > std::abs(leaving_pivot);
        if (take) {
          theta = limit;
          leaving_row = i;
          leaving_to_upper = to_upper;
          leaving_pivot = alpha[i];
        }
      }
      if (theta == kInf) throw LpError("simplex: unbounded direction");

      if (theta < 1e-12) {
        if (++degenerate_run_ > kDegenerateRunBeforeBland) bland_ = true;
      } else {
        degenerate_run_ = 0;
      }

      x_[entering] += direction * theta;
      for (int i = 0; i < m_; ++i)
        x_[basis_[i]] -= theta * direction * alpha[i];

      if (leaving_row < 0) {
        at_upper_[entering] = !at_upper_[entering];
        x_[entering] = at_upper_[entering] ? upper_[entering] : lower_[entering];
        continue;
      }

      const int leaving = basis_[leaving_row];
      x_[leaving] = leaving_to_upper ? upper_[leaving] : lower_[leaving];
      at_upper_[leaving] = leaving_to_upper;
      basic_row_[leaving] = -1;
      basis_[leaving_row] = entering;
      basic_row_[entering] = leaving_row;
      at_upper_[entering] = false;

      const double pivot = alpha[leaving_row];
      binv_.row(leaving_row) /= pivot;
      for (int i = 0; i < m_; ++i) {
        if (i == leaving_row || alpha[i] == 0.0) continue;
        binv_.row(i) -= alpha[i] * binv_.row(leaving_row);
      }
      if (++pivots_since_refactor_ >= kRefactorEvery) refactor();
      prices_stale = true;
    }
  }

  const Eigen::MatrixXd& a_;
  int m_;
  int n_;
  int total_;
  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<double> x_;
  std::vector<bool> at_upper_;
  std::vector<int> basic_row_;
  std::vector<double> cost_;
  const std::vector<int>& weights_;
  std::vector<int> basis_;
  Eigen::MatrixXd binv_;
  bool needs_phase_one_ = false;
  bool bland_ = false;
  int degenerate_run_ = 0;
  int pivots_since_refactor_ = 0;
  int iterations_ = 0;
  int max_iterations_ = 0;
};

}  // namespace

LpRelaxation solve_lp_relaxation(const BinaryProgram& program,
                                 std::span<const Fix> fixed) {
  if (!fixed.empty() && fixed.size() != program.size())
    throw ShapeError("solve_lp_relaxation: fixed assignment length mismatch");
  if (program.rows.cols() != static_cast<Eigen::Index>(program.size()))
    throw ShapeError("solve_lp_relaxation: rows and weights disagree");
  BoundedSimplex simplex(program, fixed);
  return simplex.run();
}

LpRelaxation solve_lp_relaxation(const BalanceProblem& problem,
                                 std::span<const Fix> fixed) {
  return solve_lp_relaxation(to_binary_program(problem), fixed);
}

}  // namespace profmatch
