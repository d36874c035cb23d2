#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "profmatch/error.hpp"
#include "profmatch/io.hpp"

using namespace profmatch;

TEST_SUITE("io") {
  TEST_CASE("quoted fields, CRLF and a byte order mark") {
    const auto t = parse_csv("\xEF\xBB\xBF" "a,b\r\n\"x, y\",\"say \"\"hi\"\"\"\r\n\r\n\"multi\nline\",2\n");
    CHECK(t.header == std::vector<std::string>{"a", "b"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][0] == "x, y");
    CHECK(t.rows[0][1] == "say \"hi\"");
    CHECK(t.rows[1][0] == "multi\nline");
  }

  TEST_CASE("CSV round trip") {
    CsvTable t{{"id", "note"}, {{"1", "plain"}, {"2", "has,comma"}, {"3", "has \"quote\""}}};
    const auto back = parse_csv(to_csv(t));
    CHECK(back.header == t.header);
    CHECK(back.rows == t.rows);
  }

  TEST_CASE("malformed CSV") {
    CHECK_THROWS_AS(parse_csv(""), DataError);
    CHECK_THROWS_AS(parse_csv("a,b\n1\n"), ParseError);
    CHECK_THROWS_AS(parse_csv("a,b\n\"open,2\n"), ParseError);
  }

  TEST_CASE("a non-numeric cell names its row and column") {
    auto t = parse_csv("X1,X4,Z\n1,2,0\n3,abc,1\n");
    ColumnRoles roles;
    roles.treatment = "Z";
    roles.covariates = {"X1", "X4"};
    try {
      dataset_from_table(t, roles);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("row 2") != std::string::npos);
      CHECK(std::string(e.what()).find("X4") != std::string::npos);
    }
  }

  TEST_CASE("covariate detection skips text columns") {
    ColumnRoles roles;
    roles.treatment = "Z";
    const auto loaded = dataset_from_table(parse_csv("id,X1,Z\nu1,1,0\nu2,2,1\n"), roles);
    CHECK(loaded.covariates == std::vector<std::string>{"X1"});
  }

  TEST_CASE("missing cells become NaN and are counted") {
    ColumnRoles roles;
    roles.treatment = "Z";
    const auto loaded = dataset_from_table(parse_csv("X1,X2,Z\n1,NA,0\n,3,1\n2,4,1\n"), roles);
    CHECK(loaded.covariates == std::vector<std::string>{"X1", "X2"});
    CHECK(std::isnan(loaded.data.at(0, "X2")));
    CHECK(std::isnan(loaded.data.at(1, "X1")));
    CHECK(loaded.missing.size() == 2);
  }

  TEST_CASE("roles must name existing columns") {
    ColumnRoles roles;
    roles.treatment = "T";
    CHECK_THROWS_AS(dataset_from_table(parse_csv("X1,Z\n1,0\n"), roles), ConfigError);
    RoleRequirements need;
    need.outcome = true;
    CHECK_THROWS_AS(dataset_from_table(parse_csv("X1,Z\n1,0\n"), ColumnRoles{}, need), ConfigError);
    roles.treatment = "Z";
    CHECK_THROWS_AS(dataset_from_table(parse_csv("X1,Z\n1,0.5\n"), roles), ParseError);
  }

  TEST_CASE("profile JSON round trip") {
    Profile p;
    p.features = {FeatureSpec::parse("X1"), FeatureSpec::parse("X1^2*X3")};
    p.targets = {0.1, 1.0 / 3.0};
    p.tolerances = {0.05, 0.0123456789012345};
    p.scale_sds = std::vector<double>{1.0, 0.246913578024690};
    p.multiplier = 0.05;
    CHECK(profile_from_json(profile_to_json(p)) == p);
    Profile bare = p;
    bare.scale_sds.reset();
    bare.multiplier.reset();
    CHECK(profile_from_json(profile_to_json(bare)) == bare);
  }

  TEST_CASE("malformed profiles name the offending value") {
    const std::string bad_tol = R"({"features":[{"name":"X1","terms":[{"col":"X1","pow":1}]}],
      "targets":[0.0],"tolerances":[-0.1]})";
    CHECK_THROWS_WITH_AS(profile_from_json(bad_tol), doctest::Contains("/tolerances/0"),
                         ProfileFormatError);
    const std::string bad_pow = R"({"features":[{"name":"X1","terms":[{"col":"X1","pow":0}]}],
      "targets":[0.0],"tolerances":[0.1]})";
    CHECK_THROWS_WITH_AS(profile_from_json(bad_pow), doctest::Contains("/features/0/terms/0/pow"),
                         ProfileFormatError);
    CHECK_THROWS_AS(profile_from_json("{not json"), ProfileFormatError);
    CHECK_THROWS_AS(profile_from_json(R"({"targets":[1]})"), ProfileFormatError);
  }

  TEST_CASE("unreadable and unwritable paths") {
    CHECK_THROWS_AS(require_readable("/nonexistent/file.csv"), ConfigError);
    CHECK_THROWS_AS(require_writable("/nonexistent/dir/out.csv"), ConfigError);
    CHECK_NOTHROW(require_writable("-"));
    CHECK_THROWS_AS(read_csv("/nonexistent/file.csv"), ConfigError);
  }
}
