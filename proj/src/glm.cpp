#include "profmatch/glm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "profmatch/error.hpp"
#include "profmatch/numerics.hpp"

namespace profmatch {

namespace {

constexpr int kMaxIterations = 100;
constexpr double kSeparationBound = 1e3;
constexpr double kScoreTolerance = 1e-6;
constexpr double kTiny = 1e-300;

// Mean, its derivative in eta, and both tail probabilities for one linear
// predictor. The lower and upper tails are computed separately so that
// 1 - mu never cancels.
struct LinkEval {
  double mu;
  double one_minus_mu;
  double dmu;
};

LinkEval eval_link(Link link, double eta) {
  LinkEval e{};
  if (link == Link::probit) {
    e.mu = normal_cdf(eta);
    e.one_minus_mu = normal_sf(eta);
    e.dmu = normal_pdf(eta);
  } else {
    e.mu = expit(eta);
    e.one_minus_mu = expit(-eta);
    e.dmu = e.mu * e.one_minus_mu;
  }
  e.mu = std::max(e.mu, kTiny);
  e.one_minus_mu = std::max(e.one_minus_mu, kTiny);
  e.dmu = std::max(e.dmu, kTiny);
  return e;
}

double log_likelihood(Link link, const Eigen::VectorXd& eta,
                      const Eigen::VectorXd& y) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const LinkEval e = eval_link(link, eta[i]);
    ll += y[i] > 0.5 ? std::log(e.mu) : std::log(e.one_minus_mu);
  }
  return ll;
}

Eigen::VectorXd score(Link link, const Eigen::MatrixXd& x,
                      const Eigen::VectorXd& eta, const Eigen::VectorXd& y) {
  Eigen::VectorXd u(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const LinkEval e = eval_link(link, eta[i]);
    // d loglik / d eta = (y - mu) * dmu / (mu (1 - mu)), written per class
    // to stay finite in the tails.
    u[i] = y[i] > 0.5 ? e.dmu / e.mu : -e.dmu / e.one_minus_mu;
  }
  return x.transpose() * u;
}

void check_rank(const Eigen::MatrixXd& design) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < design.cols())
    throw RankError("design matrix has rank " + std::to_string(qr.rank()) +
                    " < " + std::to_string(design.cols()) + " columns");
}

}  // namespace

const char* to_string(Link link) {
  switch (link) {
    case Link::probit:
      return "probit";
    case Link::logit:
      return "logit";
    case Link::identity:
      return "identity";
  }
  return "unknown";
}

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& design) {
  Eigen::MatrixXd out(design.rows(), design.cols() + 1);
  out.col(0).setOnes();
  out.rightCols(design.cols()) = design;
  return out;
}

GlmFit fit_binary_glm(const Eigen::MatrixXd& design,
                      const Eigen::VectorXd& response, Link link) {
  if (link == Link::identity)
    throw DomainError("fit_binary_glm: identity link; use fit_ols");
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  if (response.size() != n)
    throw ShapeError("fit_binary_glm: response length differs from rows");
  if (n <= p)
    throw UnderdeterminedError("fit_binary_glm: need more rows than columns");
  Eigen::Index ones = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (response[i] != 0.0 && response[i] != 1.0)
      throw DataError("fit_binary_glm: response must be 0/1");
    if (response[i] == 1.0) ++ones;
  }
  if (ones == 0 || ones == n)
    throw DegenerateResponseError("fit_binary_glm: response has one class");
  if (!design.allFinite()) throw DataError("fit_binary_glm: non-finite design");
  check_rank(design);

  GlmFit fit;
  fit.link = link;
  fit.coefficients = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
  double ll = log_likelihood(link, eta, response);

  Eigen::VectorXd sqrt_w(n);
  Eigen::VectorXd work_response(n);
  for (int iter = 1; iter <= kMaxIterations; ++iter) {
    fit.iterations = iter;
    for (Eigen::Index i = 0; i < n; ++i) {
      const LinkEval e = eval_link(link, eta[i]);
      const double variance = e.mu * e.one_minus_mu;
      const double w = e.dmu * e.dmu / variance;
      sqrt_w[i] = std::sqrt(w);
      const double resid = response[i] > 0.5 ? e.one_minus_mu : -e.mu;
      work_response[i] = eta[i] + resid / e.dmu;
    }
    const Eigen::MatrixXd weighted = sqrt_w.asDiagonal() * design;
    const Eigen::VectorXd target = sqrt_w.cwiseProduct(work_response);
    const Eigen::VectorXd proposal =
        weighted.colPivHouseholderQr().solve(target);
    if (!proposal.allFinite())
      throw SeparationError("fit_binary_glm: non-finite IRLS update");

    Eigen::VectorXd step = proposal - fit.coefficients;
    Eigen::VectorXd candidate = fit.coefficients + step;
    Eigen::VectorXd candidate_eta = design * candidate;
    double candidate_ll = log_likelihood(link, candidate_eta, response);
    for (int halving = 0; halving < 30 && candidate_ll < ll - 1e-12 * std::abs(ll);
         ++halving) {
      step *= 0.5;
      candidate = fit.coefficients + step;
      candidate_eta = design * candidate;
      candidate_ll = log_likelihood(link, candidate_eta, response);
    }

    fit.coefficients = candidate;
    eta = candidate_eta;
    if (fit.coefficients.lpNorm<Eigen::Infinity>() > kSeparationBound)
      throw SeparationError(
          "fit_binary_glm: coefficients exceed 1e3 (separated data)");

    const double ll_change = std::abs(candidate_ll - ll);
    ll = candidate_ll;
    const bool small_change = ll_change < 1e-10 * (std::abs(ll) + 1e-10) ||
                              step.lpNorm<Eigen::Infinity>() < 1e-8;
    if (small_change) {
      // Both classes are present, so a log-likelihood of zero means the
      // coefficients are running off along a separating direction.
      if (ll > -1e-8)
        throw SeparationError("fit_binary_glm: perfect fit (separated data)");
      const double norm =
          score(link, design, eta, response).lpNorm<Eigen::Infinity>();
      if (norm < kScoreTolerance) {
        fit.converged = true;
        fit.score_norm = norm;
        fit.log_likelihood = ll;
        return fit;
      }
    }
  }
  throw SeparationError("fit_binary_glm: no convergence in 100 iterations");
}

GlmFit fit_ols(const Eigen::MatrixXd& design, const Eigen::VectorXd& response) {
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  if (response.size() != n)
    throw ShapeError("fit_ols: response length differs from rows");
  if (n < p)
    throw UnderdeterminedError("fit_ols: " + std::to_string(n) + " rows for " +
                               std::to_string(p) + " columns");
  if (!design.allFinite() || !response.allFinite())
    throw DataError("fit_ols: non-finite input");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < p)
    throw RankError("fit_ols: design has rank " + std::to_string(qr.rank()) +
                    " < " + std::to_string(p) + " columns");
  GlmFit fit;
  fit.link = Link::identity;
  fit.coefficients = qr.solve(response);
  fit.converged = true;
  fit.iterations = 1;
  fit.score_norm =
      (design.transpose() * (response - design * fit.coefficients))
          .lpNorm<Eigen::Infinity>();
  return fit;
}

Eigen::VectorXd predict(const GlmFit& fit, const Eigen::MatrixXd& design) {
  if (design.cols() != fit.coefficients.size())
    throw ShapeError("predict: design has " + std::to_string(design.cols()) +
                     " columns, fit has " +
                     std::to_string(fit.coefficients.size()));
  Eigen::VectorXd eta = design * fit.coefficients;
  switch (fit.link) {
    case Link::identity:
      return eta;
    case Link::probit:
      return eta.unaryExpr([](double v) { return normal_cdf(v); });
    case Link::logit:
      return eta.unaryExpr([](double v) { return expit(v); });
  }
  return eta;
}

}  // namespace profmatch
