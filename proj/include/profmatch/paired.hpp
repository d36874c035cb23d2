#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace profmatch {

/// Pair counts by (treated outcome, control outcome).
struct PairedBinary {
  std::size_t n11 = 0;
  std::size_t n10 = 0;
  std::size_t n01 = 0;
  std::size_t n00 = 0;

  std::size_t discordant() const { return n10 + n01; }
};

/// P(Bin(n, p) >= k).
double binomial_upper_tail(std::size_t n, double p, std::size_t k);

enum class McNemarMode { exact, chi_square };

struct McNemarResult {
  /// Exact mode: max(n10, n01). Chi-square mode: (n10 - n01)^2 / D.
  double statistic = 0.0;
  double p_two_sided = 1.0;
  /// P(Bin(D, 1/2) >= max(n10, n01)), the one-sided sign test.
  double p_one_sided = 1.0;
  /// No discordant pairs; p is 1.
  bool degenerate = false;
};

McNemarResult mcnemar_test(const PairedBinary& pairs, McNemarMode mode);

enum class WilcoxonMode { exact, normal };

struct WilcoxonResult {
  double t_plus = 0.0;
  /// Nonzero differences used.
  std::size_t n = 0;
  double expected = 0.0;
  /// Null variance after the tie correction.
  double variance = 0.0;
  double p_two_sided = 1.0;
  /// Upper tail P(T+ >= observed).
  double p_upper = 1.0;
};

/// Mid-ranks of |d| over the nonzero differences, in input order.
std::vector<double> signed_rank_ranks(std::span<const double> nonzero);

/// Signed-rank test. Zeros are dropped and tied |d| get mid-ranks. Exact
/// mode gives the permutation distribution over all sign patterns and is
/// limited to 200 nonzero differences; normal mode uses the tie-corrected
/// variance with an optional 0.5 continuity correction. Throws
/// DegenerateError when every difference is zero.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> differences,
                                    WilcoxonMode mode,
                                    bool continuity_correction = true);

struct GammaResult {
  /// Largest Gamma in [1, 100] at which the upper-bound p-value is still at
  /// most alpha; absent when the test does not reject at Gamma = 1.
  std::optional<double> gamma_star;
  double alpha = 0.05;
  double p_at_gamma1 = 1.0;
  double search_tolerance = 0.005;
  /// +1 when the test statistic counts treated excesses, -1 when the observed
  /// excess runs the other way and the statistic counts control excesses.
  int direction = 1;
  /// Gamma reached the search ceiling while still rejecting.
  bool at_ceiling = false;
  bool degenerate = false;
};

/// Upper-bound p-value P(Bin(D, G/(1+G)) >= T) in the direction of the
/// observed excess.
double gamma_binary_p(const PairedBinary& pairs, double gamma);
/// Upper-bound p-value 1 - Phi((T - p+ sum r) / sqrt(p+(1-p+) sum r^2)) in
/// the direction of the observed excess, p+ = G/(1+G).
double gamma_rank_p(std::span<const double> differences, double gamma);

/// Sensitivity of McNemar's test to hidden bias. Bisection on [1, 100] to
/// `tolerance`; D = 0 gives an absent gamma_star with the degenerate flag.
GammaResult rosenbaum_gamma_binary(const PairedBinary& pairs, double alpha = 0.05,
                                   double tolerance = 0.005);
/// Sensitivity of the signed-rank test. Throws DegenerateError when every
/// difference is zero.
GammaResult rosenbaum_gamma_rank(std::span<const double> differences,
                                 double alpha = 0.05, double tolerance = 0.005);

}  // namespace profmatch
