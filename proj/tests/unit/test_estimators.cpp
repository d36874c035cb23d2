#include <doctest.h>

#include <random>

#include "profmatch/error.hpp"
#include "profmatch/estimators.hpp"
#include "profmatch/numerics.hpp"
#include "profmatch/simulation.hpp"

using namespace profmatch;

TEST_SUITE("estimators") {
  TEST_CASE("difference in matched means") {
    const auto r = estimate_pm(std::vector<double>{3, 5}, std::vector<double>{1, 2, 3});
    CHECK(r.estimate == 2.0);
    CHECK(r.ess == 5.0);
    CHECK_THROWS_AS(estimate_pm(std::vector<double>{}, std::vector<double>{1}), EmptyArmError);
  }

  TEST_CASE("regression adjustment recovers a constant shift") {
    Eigen::MatrixXd xt(4, 1), xc(5, 1);
    xt << 0, 1, 2, 3;
    xc << -1, 0, 1, 4, 5;
    const Eigen::VectorXd yt = 1.5 + 2.0 * xt.col(0).array();
    const Eigen::VectorXd yc = 2.0 * xc.col(0).array();
    CHECK(estimate_apm(xt, yt, xc, yc).estimate == doctest::Approx(1.5));
  }

  TEST_CASE("inverse-odds weights follow their formula") {
    ScenarioSpec spec;
    spec.n_cohort = 800;
    const auto cohort = generate_cohort(spec, 0);
    std::vector<FeatureSpec> f = build_ps_features(1);
    const auto w = fit_iow_weights(cohort, f, Link::probit);
    const auto z = cohort.column("Z");
    const double e = normal_cdf(w.treatment.coefficients[0]);
    const Eigen::MatrixXd x = eval_features(cohort, f);
    for (std::size_t i = 0; i < w.trial_rows.size(); i += 37) {
      const auto row = w.trial_rows[i];
      const double p = normal_cdf(x.row(Eigen::Index(row)).dot(w.selection.coefficients));
      const double ez = z[row] == 1.0 ? e : 1.0 - e;
      CHECK(w.weights[i] == doctest::Approx((1.0 - p) / p / ez).epsilon(1e-9));
    }
  }

  TEST_CASE("Hajek weighting and its effective sample size") {
    const std::vector<double> y = {1, 3, 10, 20};
    const std::vector<double> z = {0, 0, 1, 1};
    const std::vector<double> w = {1, 3, 1, 1};
    const auto r = estimate_iow(y, z, w);
    CHECK(r.estimate == doctest::Approx(15.0 - 2.5));
    CHECK(r.ess == doctest::Approx(36.0 / 12.0));
    CHECK_THROWS_AS(estimate_iow(y, z, std::vector<double>{1, 1, 0, 0}), DegenerateWeightsError);
  }

  TEST_CASE("augmented weighting is exact when the outcome model is right") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> normal;
    const int n = 60;
    Eigen::MatrixXd x(n, 1), target(40, 1);
    std::vector<double> y(n), z(n), w(n);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = normal(rng);
      z[i] = i % 2;
      y[i] = 1.0 + x(i, 0) + 2.0 * z[i];
      w[i] = 0.5 + (i % 5);
    }
    for (int i = 0; i < 40; ++i) target(i, 0) = normal(rng) + 1.0;
    CHECK(estimate_aiow(x, y, z, w, target).estimate == doctest::Approx(2.0));
  }

  TEST_CASE("bootstrap draws are reproducible and independent of workers") {
    CHECK(bootstrap_rows(50, 3, 1, 2) == bootstrap_rows(50, 3, 1, 2));
    CHECK(bootstrap_rows(50, 3, 1, 2) != bootstrap_rows(50, 3, 1, 3));
    for (auto r : bootstrap_rows(50, 3, 1, 2)) CHECK(r < 50);

    const Dataset data({"Y"}, {{1, 4, 2, 8, 5, 7, 3, 9, 6, 0}});
    auto mean_y = [](const Dataset& d) { return mean(d.column("Y")); };
    EstimateReport point;
    point.estimate = 4.5;
    const auto a = bootstrap_ci(point, data, mean_y, {100, 9, 0, 1});
    const auto b = bootstrap_ci(point, data, mean_y, {100, 9, 0, 4});
    CHECK(*a.se == *b.se);
    CHECK(*a.ci_low == doctest::Approx(4.5 - 1.96 * *a.se));
    CHECK(*a.ci_high == doctest::Approx(4.5 + 1.96 * *a.se));
    CHECK(a.n_boot_used == 100);
  }

  TEST_CASE("bootstrap failures are counted and too many are fatal") {
    const Dataset data({"Y"}, {{1, 2, 3, 4}});
    EstimateReport point;
    int calls = 0;
    auto flaky = [&](const Dataset&) -> double {
      if (calls++ % 4 == 0) throw EmptyArmError("empty");
      return 1.0;
    };
    const auto r = bootstrap_ci(point, data, flaky, {40, 1, 0, 1});
    CHECK(r.n_boot_failed == 10);
    CHECK(r.n_boot_used == 30);
    CHECK(*r.se == 0.0);
    auto broken = [](const Dataset&) -> double { throw EmptyArmError("empty"); };
    CHECK_THROWS_AS(bootstrap_ci(point, data, broken, {10, 1, 0, 1}), BootstrapDegenerateError);
  }

  TEST_CASE("method names") {
    CHECK(parse_method("aiow") == Method::aiow);
    CHECK(std::string(to_string(Method::apm)) == "apm");
    CHECK_THROWS_AS(parse_method("ipw"), DomainError);
    CHECK(estimate_csv_header() == "method,estimate,se,ci_low,ci_high,ess,n_boot_used,n_boot_failed");
  }
}
