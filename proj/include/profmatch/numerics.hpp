#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace profmatch {

/// Deterministic pseudo-random stream: xoshiro256** seeded through splitmix64.
///
/// A stream is keyed by (master_seed, stream_id). The key is folded into a
/// single 64-bit word by two rounds of the splitmix64 finalizer, and the four
/// state words are the next four outputs of splitmix64 from that word. The
/// same key always yields the same sequence within one build; different keys
/// share no state. Streams are single-owner: move them between threads, never
/// share one concurrently.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform01();
  /// Standard normal via the Marsaglia polar method. Each accepted pair
  /// yields two variates; the second is cached for the following call.
  double standard_normal();

  std::uint64_t stream_id() const { return stream_id_; }

 private:
  std::array<std::uint64_t, 4> state_{};
  std::uint64_t stream_id_;
  std::optional<double> spare_normal_;
};

RngStream derive_substream(std::uint64_t master_seed, std::uint64_t stream_id);

// Reserved stream ids. Replicate r draws covariates from stream 2r and
// outcomes from stream 2r + 1; bootstrap resample b of replicate r uses the
// offset below, so a parallel schedule never changes which numbers a work
// item sees.
inline constexpr std::uint64_t kBootstrapStreamBase = 1'000'000;
inline constexpr std::uint64_t kBootstrapStreamStride = 1'000;

inline std::uint64_t bootstrap_stream_id(std::uint64_t replicate,
                                         std::uint64_t bootstrap_index) {
  return kBootstrapStreamBase + replicate * kBootstrapStreamStride +
         bootstrap_index;
}

namespace dist {
struct StandardNormal {};
struct Normal {
  double mu = 0.0;
  double sigma = 1.0;
};
struct Uniform {
  double a = 0.0;
  double b = 1.0;
};
struct ChiSquare1 {};
struct Bernoulli {
  double p = 0.5;
};
/// Multivariate normal. The covariance must be symmetric positive
/// semidefinite.
struct Mvn {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};
}  // namespace dist

using ScalarDist = std::variant<dist::StandardNormal, dist::Normal,
                                dist::Uniform, dist::ChiSquare1,
                                dist::Bernoulli>;

/// Throws DomainError when parameters are out of range.
void validate(const ScalarDist& d);
double draw(RngStream& stream, const ScalarDist& d);
std::vector<double> sample(RngStream& stream, const ScalarDist& d,
                           std::size_t n);

/// Precomputed factor for repeated MVN draws. Uses Cholesky when the
/// covariance is positive definite and a clipped eigendecomposition when it is
/// only semidefinite; throws FactorizationError for indefinite input.
class MvnSampler {
 public:
  explicit MvnSampler(dist::Mvn spec);
  Eigen::VectorXd draw(RngStream& stream) const;
  const Eigen::MatrixXd& factor() const { return factor_; }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd factor_;
};

/// n draws, one per row.
Eigen::MatrixXd sample(RngStream& stream, const dist::Mvn& d, std::size_t n);

double normal_pdf(double x);
double normal_cdf(double x);
/// Upper tail 1 - Phi(x), accurate for large x.
double normal_sf(double x);
/// Inverse of the standard normal CDF (Wichura AS241 with one Newton
/// polish). Throws DomainError unless 0 < p < 1.
double normal_quantile(double p);
double expit(double x);

struct Summary {
  double mean = 0.0;
  /// Sample standard deviation (n - 1 denominator); absent when n < 2 or the
  /// input was weighted.
  std::optional<double> sd;
  std::size_t n = 0;
};

/// Unweighted mean and sd of `values`; throws EmptyInputError on empty input.
Summary summary(std::span<const double> values);
/// Weighted mean; weights must be nonnegative and not all zero.
Summary summary(std::span<const double> values,
                std::span<const double> weights);

double mean(std::span<const double> values);
/// Sample sd with n - 1 denominator; throws EmptyInputError when n < 2.
double sample_sd(std::span<const double> values);

/// printf %.*g with `digits` significant digits; 17 round-trips a double.
std::string format_significant(double value, int digits);

}  // namespace profmatch
