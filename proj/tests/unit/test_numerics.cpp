#include <doctest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "profmatch/error.hpp"
#include "profmatch/numerics.hpp"
#include "profmatch/parallel.hpp"

using namespace profmatch;

TEST_SUITE("numerics") {
  TEST_CASE("streams with the same key repeat and different keys diverge") {
    RngStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
    std::set<std::uint64_t> firsts;
    for (int i = 0; i < 100; ++i) {
      const auto x = a.next_u64();
      CHECK(x == b.next_u64());
      firsts.insert(x);
    }
    CHECK(firsts.size() == 100);
    CHECK(RngStream(42, 7).next_u64() != c.next_u64());
    CHECK(RngStream(42, 7).next_u64() != d.next_u64());
  }

  TEST_CASE("bootstrap stream ids are disjoint across replicates") {
    std::set<std::uint64_t> ids;
    for (std::uint64_t r = 0; r < 50; ++r)
      for (std::uint64_t b = 0; b < 200; ++b) ids.insert(bootstrap_stream_id(r, b));
    CHECK(ids.size() == 50 * 200);
    CHECK(bootstrap_stream_id(0, 0) == 1'000'000);
    CHECK(bootstrap_stream_id(3, 5) == 1'003'005);
  }

  TEST_CASE("uniform and normal draws have the right moments") {
    RngStream s(1, 0);
    const int n = 200000;
    double su = 0, sn = 0, sn2 = 0;
    for (int i = 0; i < n; ++i) {
      const double u = s.uniform01();
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
      su += u;
      const double z = s.standard_normal();
      sn += z;
      sn2 += z * z;
    }
    CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(std::abs(sn / n) < 0.01);
    CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
  }

  TEST_CASE("scalar distributions match their means and variances") {
    RngStream s(2, 0);
    auto moments = [&](const ScalarDist& d) {
      const auto v = sample(s, d, 100000);
      const double m = mean(v);
      const double sd = sample_sd(v);
      return std::pair{m, sd * sd};
    };
    auto [m1, v1] = moments(dist::Normal{5.0, 0.5});
    CHECK(m1 == doctest::Approx(5.0).epsilon(0.01));
    CHECK(v1 == doctest::Approx(0.25).epsilon(0.03));
    auto [m2, v2] = moments(dist::Uniform{-3.0, 3.0});
    CHECK(std::abs(m2) < 0.03);
    CHECK(v2 == doctest::Approx(3.0).epsilon(0.03));
    auto [m3, v3] = moments(dist::ChiSquare1{});
    CHECK(m3 == doctest::Approx(1.0).epsilon(0.03));
    CHECK(v3 == doctest::Approx(2.0).epsilon(0.05));
    auto [m4, v4] = moments(dist::Bernoulli{0.3});
    CHECK(m4 == doctest::Approx(0.3).epsilon(0.03));
    CHECK(v4 == doctest::Approx(0.21).epsilon(0.03));
  }

  TEST_CASE("invalid distribution parameters are rejected") {
    CHECK_THROWS_AS(validate(dist::Normal{0.0, -1.0}), DomainError);
    CHECK_THROWS_AS(validate(dist::Uniform{1.0, 0.0}), DomainError);
    CHECK_THROWS_AS(validate(dist::Bernoulli{1.5}), DomainError);
  }

  TEST_CASE("mvn draws reproduce the covariance") {
    Eigen::Matrix3d sigma;
    sigma << 2.0, 1.0, -1.0, 1.0, 1.0, -0.5, -1.0, -0.5, 1.0;
    RngStream s(3, 0);
    const auto x = sample(s, dist::Mvn{Eigen::Vector3d::Zero(), sigma}, 100000);
    const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered / double(x.rows() - 1);
    CHECK((cov - sigma).cwiseAbs().maxCoeff() < 0.05);
  }

  TEST_CASE("semidefinite covariance is accepted and indefinite is not") {
    Eigen::Matrix2d psd;
    psd << 1.0, 1.0, 1.0, 1.0;
    CHECK_NOTHROW(MvnSampler(dist::Mvn{Eigen::Vector2d::Zero(), psd}));
    Eigen::Matrix2d bad;
    bad << 1.0, 2.0, 2.0, 1.0;
    CHECK_THROWS_AS(MvnSampler(dist::Mvn{Eigen::Vector2d::Zero(), bad}), FactorizationError);
  }

  TEST_CASE("normal functions agree with erfc-based references") {
    for (double x : {-8.0, -3.0, -1.0, 0.0, 0.5, 2.0, 6.0}) {
      CHECK(normal_cdf(x) == doctest::Approx(oracle::Phi(x)).epsilon(1e-12));
      CHECK(normal_sf(x) == doctest::Approx(oracle::Phi(-x)).epsilon(1e-12));
    }
    for (double p : {1e-10, 0.001, 0.025, 0.3, 0.5, 0.9, 0.999999})
      CHECK(normal_quantile(p) == doctest::Approx(oracle::Phi_inv(p)).epsilon(1e-10));
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054));
    CHECK_THROWS_AS(normal_quantile(0.0), DomainError);
    CHECK_THROWS_AS(normal_quantile(1.0), DomainError);
  }

  TEST_CASE("summaries") {
    const std::vector<double> v = {1, 2, 3, 4};
    const auto s = summary(v);
    CHECK(s.mean == 2.5);
    CHECK(*s.sd == doctest::Approx(std::sqrt(5.0 / 3.0)));
    const std::vector<double> w = {0, 0, 1, 1};
    CHECK(summary(v, w).mean == 3.5);
    CHECK_FALSE(summary(v, w).sd);
    CHECK_THROWS_AS(summary(std::vector<double>{}), EmptyInputError);
    CHECK_THROWS_AS(sample_sd(std::vector<double>{1.0}), EmptyInputError);
  }

  TEST_CASE("format_significant") {
    CHECK(format_significant(0.123456789, 3) == "0.123");
    CHECK(std::stod(format_significant(0.1, 17)) == 0.1);
  }

  TEST_CASE("parallel_for covers every index and rethrows the lowest failure") {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
    CHECK(std::count(hits.begin(), hits.end(), 1) == 1000);
    try {
      parallel_for(100, 4, [](std::size_t i) {
        if (i == 17 || i == 60) throw DomainError("item " + std::to_string(i));
      });
      FAIL("expected a throw");
    } catch (const DomainError& e) {
      CHECK(std::string(e.what()) == "item 17");
    }
  }
}
