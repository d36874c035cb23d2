#pragma once

#include <Eigen/Dense>

namespace profmatch {

enum class Link { probit, logit, identity };

const char* to_string(Link link);

struct GlmFit {
  Eigen::VectorXd coefficients;
  Link link = Link::identity;
  bool converged = false;
  int iterations = 0;
  /// Binary links only; zero for identity.
  double log_likelihood = 0.0;
  /// Max-norm of the score vector at the returned coefficients.
  double score_norm = 0.0;
};

/// Maximum-likelihood probit or logit regression by Fisher scoring (IRLS),
/// starting from zero coefficients. No intercept is added: pass a column of
/// ones when one is wanted.
///
/// Stops when the relative log-likelihood change drops below 1e-10 or the
/// step's max-norm below 1e-8, then requires the score max-norm below 1e-6.
/// Throws RankError (rank-deficient design), DegenerateResponseError (one
/// class only), SeparationError (|beta| > 1e3 or no convergence in 100
/// iterations) and ShapeError.
GlmFit fit_binary_glm(const Eigen::MatrixXd& design,
                      const Eigen::VectorXd& response, Link link);

/// Least squares through a column-pivoted QR. The design is used as given;
/// outcome-model callers prepend the intercept column themselves (see
/// with_intercept). Throws UnderdeterminedError when n < p and RankError on
/// rank deficiency.
GlmFit fit_ols(const Eigen::MatrixXd& design, const Eigen::VectorXd& response);

/// Mean response under the fitted link. Throws ShapeError on a column
/// mismatch.
Eigen::VectorXd predict(const GlmFit& fit, const Eigen::MatrixXd& design);

/// Prepends a column of ones.
Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& design);

}  // namespace profmatch
