#include "profmatch/numerics.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

#include "profmatch/error.hpp"

namespace profmatch {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t splitmix_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_id)
    : stream_id_(stream_id) {
  std::uint64_t key = splitmix_finalize(master_seed + kGolden);
  key = splitmix_finalize(key ^ (stream_id * 0xD1B54A32D192ED03ULL + kGolden));
  for (auto& word : state_) {
    key += kGolden;
    word = splitmix_finalize(key);
  }
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double RngStream::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::standard_normal() {
  if (spare_normal_) {
    const double z = *spare_normal_;
    spare_normal_.reset();
    return z;
  }
  double u = 0.0;
  double v = 0.0;
  double s = 0.0;
  do {
    u = 2.0 * uniform01() - 1.0;
    v = 2.0 * uniform01() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(s) / s);
  spare_normal_ = v * factor;
  return u * factor;
}

RngStream derive_substream(std::uint64_t master_seed, std::uint64_t stream_id) {
  return RngStream(master_seed, stream_id);
}

void validate(const ScalarDist& d) {
  struct Visitor {
    void operator()(const dist::StandardNormal&) const {}
    void operator()(const dist::ChiSquare1&) const {}
    void operator()(const dist::Normal& n) const {
      if (!(n.sigma > 0.0) || !std::isfinite(n.mu) || !std::isfinite(n.sigma))
        throw DomainError("normal: sigma must be positive and finite");
    }
    void operator()(const dist::Uniform& u) const {
      if (!(u.a < u.b) || !std::isfinite(u.a) || !std::isfinite(u.b))
        throw DomainError("uniform: requires finite a < b");
    }
    void operator()(const dist::Bernoulli& b) const {
      if (!(b.p >= 0.0 && b.p <= 1.0))
        throw DomainError("bernoulli: p must lie in [0, 1]");
    }
  };
  std::visit(Visitor{}, d);
}

double draw(RngStream& stream, const ScalarDist& d) {
  struct Visitor {
    RngStream& s;
    double operator()(const dist::StandardNormal&) const {
      return s.standard_normal();
    }
    double operator()(const dist::Normal& n) const {
      return n.mu + n.sigma * s.standard_normal();
    }
    double operator()(const dist::Uniform& u) const {
      return u.a + (u.b - u.a) * s.uniform01();
    }
    double operator()(const dist::ChiSquare1&) const {
      const double z = s.standard_normal();
      return z * z;
    }
    double operator()(const dist::Bernoulli& b) const {
      return s.uniform01() < b.p ? 1.0 : 0.0;
    }
  };
  return std::visit(Visitor{stream}, d);
}

std::vector<double> sample(RngStream& stream, const ScalarDist& d,
                           std::size_t n) {
  validate(d);
  std::vector<double> out(n);
  for (auto& x : out) x = draw(stream, d);
  return out;
}

MvnSampler::MvnSampler(dist::Mvn spec) : mean_(std::move(spec.mean)) {
  const Eigen::MatrixXd& cov = spec.covariance;
  if (cov.rows() != cov.cols() || cov.rows() != mean_.size())
    throw DomainError("mvn: covariance must be square and match the mean");
  if (!cov.isApprox(cov.transpose(), 1e-12))
    throw FactorizationError("mvn: covariance is not symmetric");

  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) {
    factor_ = llt.matrixL();
    return;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success)
    throw FactorizationError("mvn: eigendecomposition failed");
  const Eigen::VectorXd& values = eig.eigenvalues();
  const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
  if (values.minCoeff() < -1e-10 * scale)
    throw FactorizationError("mvn: covariance is not positive semidefinite");
  factor_ = eig.eigenvectors() *
            values.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

Eigen::VectorXd MvnSampler::draw(RngStream& stream) const {
  Eigen::VectorXd z(mean_.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = stream.standard_normal();
  return mean_ + factor_ * z;
}

Eigen::MatrixXd sample(RngStream& stream, const dist::Mvn& d, std::size_t n) {
  const MvnSampler sampler(d);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), d.mean.size());
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    out.row(i) = sampler.draw(stream).transpose();
  return out;
}

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double normal_sf(double x) {
  return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw DomainError("normal_quantile: p must lie strictly inside (0, 1), got " +
                      std::to_string(p));
  const double q = p - 0.5;
  double x = 0.0;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    x = q *
        (((((((2509.0809287301226727 * r + 33430.575583588128105) * r +
              67265.770927008700853) * r + 45921.953931549871457) * r +
            13731.693765509461125) * r + 1971.5909503065514427) * r +
          133.14166789178437745) * r + 3.387132872796366608) /
        (((((((5226.495278852545925 * r + 28729.085735721942674) * r +
              39307.89580009271061) * r + 21213.794301586595867) * r +
            5394.1960214247511077) * r + 687.1870074920579083) * r +
          42.313330701600911252) * r + 1.0);
  } else {
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    if (r <= 5.0) {
      r -= 1.6;
      x = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r +
                0.24178072517745061177) * r + 1.27045825245236838258) * r +
              3.64784832476320460504) * r + 5.7694972214606914055) * r +
            4.6303378461565452959) * r + 1.42343711074968357734) /
          (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r +
                0.0151986665636164571966) * r + 0.14810397642748007459) * r +
              0.68976733498510000455) * r + 1.6763848301838038494) * r +
            2.05319162663775882187) * r + 1.0);
    } else {
      r -= 5.0;
      x = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                0.0012426609473880784386) * r + 0.026532189526576123093) * r +
              0.29656057182850489123) * r + 1.7848265399172913358) * r +
            5.4637849111641143699) * r + 6.6579046435011037772) /
          (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r +
                1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r +
              0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
    }
    if (q < 0.0) x = -x;
  }
  // One Newton step on Phi(x) - p; AS241 is already ~1e-16 relative, this
  // absorbs the erfc rounding of the forward map.
  // For p >= 0.5 the residual is taken on the upper tail, where 1 - p is exact.
  const double density = normal_pdf(x);
  if (density > 0.0) {
    const double residual =
        p < 0.5 ? normal_cdf(x) - p : (1.0 - p) - normal_sf(x);
    x -= residual / density;
  }
  return x;
}

double expit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double mean(std::span<const double> values) {
  if (values.empty()) throw EmptyInputError("mean of empty input");
  double total = 0.0;
  for (double v : values) total += v;
  return total / static_cast<double>(values.size());
}

double sample_sd(std::span<const double> values) {
  if (values.size() < 2)
    throw EmptyInputError("standard deviation needs at least two values");
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

Summary summary(std::span<const double> values) {
  if (values.empty()) throw EmptyInputError("summary of empty input");
  Summary s;
  s.n = values.size();
  s.mean = mean(values);
  if (s.n >= 2) s.sd = sample_sd(values);
  return s;
}

Summary summary(std::span<const double> values,
                std::span<const double> weights) {
  if (values.empty()) throw EmptyInputError("summary of empty input");
  if (weights.size() != values.size())
    throw DomainError("summary: weights and values differ in length");
  double wsum = 0.0;
  double wy = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(weights[i] >= 0.0)) throw DomainError("summary: negative weight");
    wsum += weights[i];
    wy += weights[i] * values[i];
  }
  if (!(wsum > 0.0)) throw DomainError("summary: weights are all zero");
  Summary s;
  s.n = values.size();
  s.mean = wy / wsum;
  return s;
}

std::string format_significant(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, value);
  return buf;
}

}  // namespace profmatch
