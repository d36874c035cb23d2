#include "profmatch/paired.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "profmatch/error.hpp"
#include "profmatch/numerics.hpp"

namespace profmatch {

namespace {

constexpr double kGammaCeiling = 100.0;
constexpr std::size_t kExactLimit = 200;

std::vector<double> nonzero_of(std::span<const double> differences) {
  std::vector<double> out;
  for (double d : differences) {
    if (!std::isfinite(d)) throw DataError("paired difference is not finite");
    if (d != 0.0) out.push_back(d);
  }
  if (out.empty()) throw DegenerateError("all paired differences are zero");
  return out;
}

double chi_square1_upper(double statistic) {
  return std::erfc(std::sqrt(statistic / 2.0));
}

void check_search(double alpha, double tolerance) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  if (!(tolerance > 0.0)) throw DomainError("search tolerance must be positive");
}

// Largest Gamma in [1, ceiling] with p(Gamma) <= alpha, given p nondecreasing.
template <typename PValue>
void search_gamma(GammaResult& result, const PValue& p) {
  result.p_at_gamma1 = p(1.0);
  if (result.p_at_gamma1 > result.alpha) return;
  if (p(kGammaCeiling) <= result.alpha) {
    result.gamma_star = kGammaCeiling;
    result.at_ceiling = true;
    return;
  }
  double lo = 1.0;
  double hi = kGammaCeiling;
  while (hi - lo > result.search_tolerance) {
    const double mid = 0.5 * (lo + hi);
    if (p(mid) <= result.alpha)
      lo = mid;
    else
      hi = mid;
  }
  result.gamma_star = lo;
}

}  // namespace

double binomial_upper_tail(std::size_t n, double p, std::size_t k) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("binomial probability outside [0, 1]");
  if (k == 0) return 1.0;
  if (k > n) return 0.0;
  if (p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;
  const double nn = static_cast<double>(n);
  const double lp = std::log(p);
  const double lq = std::log1p(-p);
  double total = 0.0;
  for (std::size_t j = k; j <= n; ++j) {
    const double jj = static_cast<double>(j);
    total += std::exp(std::lgamma(nn + 1.0) - std::lgamma(jj + 1.0) -
                      std::lgamma(nn - jj + 1.0) + jj * lp + (nn - jj) * lq);
  }
  return std::min(1.0, total);
}

McNemarResult mcnemar_test(const PairedBinary& pairs, McNemarMode mode) {
  McNemarResult r;
  const std::size_t d = pairs.discordant();
  const std::size_t high = std::max(pairs.n10, pairs.n01);
  if (d == 0) {
    r.degenerate = true;
    return r;
  }
  r.p_one_sided = binomial_upper_tail(d, 0.5, high);
  if (mode == McNemarMode::exact) {
    r.statistic = static_cast<double>(high);
    r.p_two_sided = std::min(1.0, 2.0 * r.p_one_sided);
  } else {
    const double diff = static_cast<double>(pairs.n10) - static_cast<double>(pairs.n01);
    r.statistic = diff * diff / static_cast<double>(d);
    r.p_two_sided = chi_square1_upper(r.statistic);
  }
  return r;
}

std::vector<double> signed_rank_ranks(std::span<const double> nonzero) {
  const std::size_t n = nonzero.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(nonzero[a]) < std::abs(nonzero[b]);
  });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(nonzero[order[j + 1]]) == std::abs(nonzero[order[i]])) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = mid;
    i = j + 1;
  }
  return ranks;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> differences,
                                    WilcoxonMode mode, bool continuity_correction) {
  const auto d = nonzero_of(differences);
  const auto ranks = signed_rank_ranks(d);
  WilcoxonResult r;
  r.n = d.size();
  double sum_r = 0.0;
  double sum_r2 = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] > 0.0) r.t_plus += ranks[i];
    sum_r += ranks[i];
    sum_r2 += ranks[i] * ranks[i];
  }
  // With mid-ranks, sum r^2 / 4 equals n(n+1)(2n+1)/24 less the tie term.
  r.expected = sum_r / 2.0;
  r.variance = sum_r2 / 4.0;

  if (mode == WilcoxonMode::exact) {
    if (d.size() > kExactLimit)
      throw SizeError("exact signed-rank test limited to " + std::to_string(kExactLimit) +
                      " nonzero differences");
    // Distribution of twice T+ over equally likely sign patterns.
    std::vector<long> doubled(d.size());
    long total = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      doubled[i] = std::lround(2.0 * ranks[i]);
      total += doubled[i];
    }
    std::vector<double> prob(static_cast<std::size_t>(total) + 1, 0.0);
    prob[0] = 1.0;
    long reach = 0;
    for (long w : doubled) {
      for (long s = reach; s >= 0; --s) {
        const double half = 0.5 * prob[static_cast<std::size_t>(s)];
        prob[static_cast<std::size_t>(s)] = half;
        prob[static_cast<std::size_t>(s + w)] += half;
      }
      reach += w;
    }
    const long observed = std::lround(2.0 * r.t_plus);
    double upper = 0.0;
    double lower = 0.0;
    for (long s = 0; s <= total; ++s) {
      if (s >= observed) upper += prob[static_cast<std::size_t>(s)];
      if (s <= observed) lower += prob[static_cast<std::size_t>(s)];
    }
    r.p_upper = std::min(1.0, upper);
    r.p_two_sided = std::min(1.0, 2.0 * std::min(upper, lower));
    return r;
  }

  const double sd = std::sqrt(r.variance);
  const double shift = r.t_plus - r.expected;
  const double cc = continuity_correction ? 0.5 : 0.0;
  const double z_abs = std::max(0.0, std::abs(shift) - cc) / sd;
  r.p_two_sided = std::min(1.0, 2.0 * normal_sf(z_abs));
  r.p_upper = normal_sf((shift - cc) / sd);
  return r;
}

double gamma_binary_p(const PairedBinary& pairs, double gamma) {
  if (!(gamma >= 1.0)) throw DomainError("Gamma must be at least 1");
  const std::size_t d = pairs.discordant();
  if (d == 0) return 1.0;
  return binomial_upper_tail(d, gamma / (1.0 + gamma), std::max(pairs.n10, pairs.n01));
}

double gamma_rank_p(std::span<const double> differences, double gamma) {
  if (!(gamma >= 1.0)) throw DomainError("Gamma must be at least 1");
  const auto d = nonzero_of(differences);
  const auto ranks = signed_rank_ranks(d);
  double t_plus = 0.0;
  double sum_r = 0.0;
  double sum_r2 = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] > 0.0) t_plus += ranks[i];
    sum_r += ranks[i];
    sum_r2 += ranks[i] * ranks[i];
  }
  const double t = t_plus >= sum_r / 2.0 ? t_plus : sum_r - t_plus;
  const double p_plus = gamma / (1.0 + gamma);
  return normal_sf((t - p_plus * sum_r) / std::sqrt(p_plus * (1.0 - p_plus) * sum_r2));
}

GammaResult rosenbaum_gamma_binary(const PairedBinary& pairs, double alpha,
                                   double tolerance) {
  check_search(alpha, tolerance);
  GammaResult r;
  r.alpha = alpha;
  r.search_tolerance = tolerance;
  r.direction = pairs.n10 >= pairs.n01 ? 1 : -1;
  if (pairs.discordant() == 0) {
    r.degenerate = true;
    return r;
  }
  search_gamma(r, [&](double g) { return gamma_binary_p(pairs, g); });
  return r;
}

GammaResult rosenbaum_gamma_rank(std::span<const double> differences, double alpha,
                                 double tolerance) {
  check_search(alpha, tolerance);
  const auto d = nonzero_of(differences);
  const auto ranks = signed_rank_ranks(d);
  double t_plus = 0.0;
  double sum_r = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] > 0.0) t_plus += ranks[i];
    sum_r += ranks[i];
  }
  GammaResult r;
  r.alpha = alpha;
  r.search_tolerance = tolerance;
  r.direction = t_plus >= sum_r / 2.0 ? 1 : -1;
  search_gamma(r, [&](double g) { return gamma_rank_p(d, g); });
  return r;
}

}  // namespace profmatch
