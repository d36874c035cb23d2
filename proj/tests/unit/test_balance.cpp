#include <doctest.h>

#include <random>

#include "profmatch/balance.hpp"
#include "profmatch/error.hpp"

using namespace profmatch;

namespace {

Dataset small() {
  return Dataset({"X1", "X2", "G"}, {{1, 2, 3, 4}, {2, 0, 2, 0}, {0, 0, 1, 1}});
}

}  // namespace

TEST_SUITE("balance") {
  TEST_CASE("feature parsing") {
    const auto f = FeatureSpec::parse("X1^2*X4");
    CHECK(f.name == "X1^2*X4");
    REQUIRE(f.terms.size() == 2);
    CHECK(f.terms[0].column == "X1");
    CHECK(f.terms[0].power == 2);
    CHECK(f.terms[1].column == "X4");
    CHECK(f.terms[1].power == 1);
    CHECK(FeatureSpec::raw("X3") == FeatureSpec::parse("X3"));
    CHECK_THROWS_AS(FeatureSpec::parse("X1^0"), DataError);
    CHECK_THROWS_AS(FeatureSpec::parse("X1**X2"), DataError);
  }

  TEST_CASE("feature evaluation") {
    const std::vector<FeatureSpec> f = {FeatureSpec::parse("X1^2"), FeatureSpec::parse("X1*X2")};
    const auto v = eval_features(small(), f);
    CHECK(v(2, 0) == 9.0);
    CHECK(v(0, 1) == 2.0);
    CHECK(v(1, 1) == 0.0);
    CHECK_THROWS_AS(eval_features(small(), std::vector{FeatureSpec::raw("X9")}), ColumnError);
    Dataset with_nan({"X1"}, {{1.0, std::nan("")}});
    CHECK_THROWS_AS(eval_features(with_nan, std::vector{FeatureSpec::raw("X1")}), DataError);
  }

  TEST_CASE("profile from target rows") {
    const std::vector<FeatureSpec> f = {FeatureSpec::raw("X1"), FeatureSpec::raw("X2")};
    const auto p = profile_from_target(small(), f, 0.1);
    CHECK(p.targets[0] == 2.5);
    CHECK(p.targets[1] == 1.0);
    CHECK(p.tolerances[0] == doctest::Approx(0.1 * std::sqrt(5.0 / 3.0)));
    CHECK(p.tolerances[1] == doctest::Approx(0.1 * std::sqrt(4.0 / 3.0)));
    CHECK(*p.multiplier == 0.1);
    Dataset flat({"X1"}, {{1, 1, 1}});
    CHECK_THROWS_AS(profile_from_target(flat, std::vector{FeatureSpec::raw("X1")}, 0.05),
                    ZeroVarianceError);
  }

  TEST_CASE("pooled sd across groups") {
    CHECK(pooled_sd(std::vector<double>{3.0, 4.0}) == doctest::Approx(std::sqrt(12.5)));
    CHECK(three_way_pooled_sd({1.0, 2.0, 2.0}) == doctest::Approx(std::sqrt(3.0)));
    const auto sds = pooled_feature_sds(small(), std::vector{FeatureSpec::raw("X1")}, "G",
                                        std::vector<double>{0.0, 1.0});
    CHECK(sds[0] == doctest::Approx(std::sqrt(0.5)));
  }

  TEST_CASE("tasmd and asmd") {
    CHECK(tasmd(1.2, 1.0, 0.5) == doctest::Approx(0.4));
    CHECK(tasmd(0.8, 1.0, 0.5) == doctest::Approx(0.4));
    CHECK(asmd(3.0, 1.0, 4.0) == 0.5);
    CHECK_THROWS_AS(tasmd(1.0, 0.0, 0.0), ZeroVarianceError);
  }

  TEST_CASE("kish ess properties") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> w(1 + rng() % 50);
      for (auto& x : w) x = u(rng);
      const double ess = kish_ess(w);
      CHECK(ess <= double(w.size()) + 1e-9);
      CHECK(ess >= 1.0 - 1e-9);
      std::vector<double> scaled = w;
      for (auto& x : scaled) x *= 7.5;
      CHECK(kish_ess(scaled) == doctest::Approx(ess));
    }
    CHECK(kish_ess(std::vector<double>(10, 2.0)) == doctest::Approx(10.0));
    CHECK_THROWS_AS(kish_ess(std::vector<double>{0.0, 0.0}), DegenerateWeightsError);
    CHECK_THROWS_AS(kish_ess(std::vector<double>{1.0, -1.0}), DomainError);
  }

  TEST_CASE("weighted means over a row subset") {
    const auto v = eval_features(small(), std::vector{FeatureSpec::raw("X1")});
    const std::vector<std::size_t> rows = {1, 3};
    CHECK(weighted_means(v, rows)[0] == 3.0);
    CHECK(weighted_means(v, rows, std::vector<double>{3.0, 1.0})[0] == 2.5);
  }

  TEST_CASE("profile validation") {
    Profile p;
    p.features = {FeatureSpec::raw("X1")};
    p.targets = {0.0};
    p.tolerances = {-0.1};
    CHECK_THROWS_AS(p.validate(), DomainError);
    p.tolerances = {0.1, 0.2};
    CHECK_THROWS_AS(p.validate(), DomainError);
  }
}
