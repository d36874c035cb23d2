#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "profmatch/error.hpp"
#include "profmatch/glm.hpp"

using namespace profmatch;

namespace {

struct Binary {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

Binary simulate(std::uint64_t seed, int n, const Eigen::VectorXd& beta, bool probit) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> u;
  Binary b{Eigen::MatrixXd(n, beta.size()), Eigen::VectorXd(n)};
  for (int i = 0; i < n; ++i) {
    b.x(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < beta.size(); ++j) b.x(i, j) = normal(rng);
    const double eta = b.x.row(i).dot(beta);
    const double p = probit ? oracle::Phi(eta) : 1.0 / (1.0 + std::exp(-eta));
    b.y[i] = u(rng) < p ? 1.0 : 0.0;
  }
  return b;
}

}  // namespace

TEST_SUITE("glm") {
  TEST_CASE("probit and logit fits zero the score") {
    const Eigen::Vector3d beta(0.2, -0.7, 0.4);
    for (bool probit : {true, false}) {
      const auto d = simulate(probit ? 1 : 2, 800, beta, probit);
      const auto fit = fit_binary_glm(d.x, d.y, probit ? Link::probit : Link::logit);
      CHECK(fit.converged);
      CHECK(fit.score_norm < 1e-6);
      CHECK(oracle::glm_score(d.x, d.y, fit.coefficients, probit).cwiseAbs().maxCoeff() < 1e-6);
      CHECK((fit.coefficients - beta).cwiseAbs().maxCoeff() < 0.3);
    }
  }

  TEST_CASE("intercept-only fits have closed forms") {
    const int n = 37, k = 11;
    Eigen::MatrixXd x = Eigen::MatrixXd::Ones(n, 1);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
    y.head(k).setOnes();
    const double p = double(k) / n;
    CHECK(fit_binary_glm(x, y, Link::probit).coefficients[0] ==
          doctest::Approx(oracle::Phi_inv(p)).epsilon(1e-9));
    CHECK(fit_binary_glm(x, y, Link::logit).coefficients[0] ==
          doctest::Approx(std::log(p / (1 - p))).epsilon(1e-9));
  }

  TEST_CASE("logit log-likelihood matches a direct sum") {
    const auto d = simulate(3, 300, Eigen::Vector2d(0.1, 1.0), false);
    const auto fit = fit_binary_glm(d.x, d.y, Link::logit);
    double ll = 0;
    for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-d.x.row(i).dot(fit.coefficients)));
      ll += d.y[i] ? std::log(p) : std::log1p(-p);
    }
    CHECK(fit.log_likelihood == doctest::Approx(ll).epsilon(1e-10));
  }

  TEST_CASE("failures are typed") {
    Eigen::MatrixXd x(6, 2);
    x << 1, 1, 1, 2, 1, 3, 1, 4, 1, 5, 1, 6;
    Eigen::VectorXd all_one = Eigen::VectorXd::Ones(6);
    CHECK_THROWS_AS(fit_binary_glm(x, all_one, Link::logit), DegenerateResponseError);
    Eigen::VectorXd separated(6);
    separated << 0, 0, 0, 1, 1, 1;
    CHECK_THROWS_AS(fit_binary_glm(x, separated, Link::logit), SeparationError);
    Eigen::MatrixXd collinear(6, 2);
    collinear << 1, 2, 1, 2, 1, 2, 1, 2, 1, 2, 1, 2;
    Eigen::VectorXd mixed(6);
    mixed << 0, 1, 0, 1, 1, 0;
    CHECK_THROWS_AS(fit_binary_glm(collinear, mixed, Link::probit), RankError);
    CHECK_THROWS_AS(fit_binary_glm(x, Eigen::VectorXd::Zero(5), Link::probit), ShapeError);
    CHECK_THROWS_AS(fit_ols(Eigen::MatrixXd::Ones(2, 3), Eigen::VectorXd::Ones(2)),
                    UnderdeterminedError);
  }

  TEST_CASE("least squares recovers an exact linear fit") {
    Eigen::MatrixXd x(5, 1);
    x << 0, 1, 2, 3, 4;
    Eigen::VectorXd y = 2.0 + 3.0 * x.col(0).array();
    const auto fit = fit_ols(with_intercept(x), y);
    CHECK(fit.coefficients[0] == doctest::Approx(2.0));
    CHECK(fit.coefficients[1] == doctest::Approx(3.0));
    CHECK((predict(fit, with_intercept(x)) - y).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(predict(fit, x), ShapeError);
  }
}
