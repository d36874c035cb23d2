#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "profmatch/dataset.hpp"

namespace profmatch {

/// One factor of a balance feature: column ^ power, power >= 1.
struct Term {
  std::string column;
  int power = 1;

  bool operator==(const Term&) const = default;
};

/// A balance feature is a product of integer powers of raw columns. An empty
/// term list is the constant 1.
struct FeatureSpec {
  std::string name;
  std::vector<Term> terms;

  bool operator==(const FeatureSpec&) const = default;

  /// Single column at power 1, named after the column.
  static FeatureSpec raw(const std::string& column);
  /// Parses "X1", "X2^2", "X1*X3", "X1^2*X4"; the name is the text itself.
  static FeatureSpec parse(const std::string& text);
};

/// Target feature values and imbalance tolerances.
struct Profile {
  std::vector<FeatureSpec> features;
  std::vector<double> targets;
  std::vector<double> tolerances;
  /// Standard deviations used to set the tolerances, when known.
  std::optional<std::vector<double>> scale_sds;
  std::optional<double> multiplier;

  bool operator==(const Profile&) const = default;

  /// Throws DomainError on length mismatch or a negative tolerance.
  void validate() const;
};

/// Feature values, one row per dataset row and one column per feature.
/// Throws ColumnError for a missing column and DataError for non-finite
/// values or powers below 1.
Eigen::MatrixXd eval_features(const Dataset& data,
                              std::span<const FeatureSpec> features);

/// Column means and sample sds of a feature matrix.
std::vector<double> column_means(const Eigen::MatrixXd& values);
std::vector<double> column_sds(const Eigen::MatrixXd& values);

/// Targets are feature means over `target`; tolerances are
/// multiplier * sd of each feature over `scale_population`.
/// Throws ZeroVarianceError naming the feature when an sd is zero and the
/// multiplier is not.
Profile profile_from_target(const Dataset& target,
                            std::span<const FeatureSpec> features,
                            double multiplier,
                            const Dataset& scale_population);
/// Same, with the target rows as the scale population.
Profile profile_from_target(const Dataset& target,
                            std::span<const FeatureSpec> features,
                            double multiplier);
/// Same, with caller-supplied scale sds (e.g. pooled across groups).
Profile profile_from_target(const Dataset& target,
                            std::span<const FeatureSpec> features,
                            double multiplier, std::vector<double> scale_sds);

/// sqrt(mean of squared sds).
double pooled_sd(std::span<const double> group_sds);
double three_way_pooled_sd(const std::array<double, 3>& group_sds);

/// Per-feature pooled sd across the groups of `group_column`.
std::vector<double> pooled_feature_sds(const Dataset& data,
                                       std::span<const FeatureSpec> features,
                                       const std::string& group_column,
                                       std::span<const double> group_labels);

/// |sample_mean - target_mean| / scale_sd; ZeroVarianceError when
/// scale_sd <= 0.
double tasmd(double sample_mean, double target_mean, double scale_sd);
/// |mean_a - mean_b| / scale_sd.
double asmd(double mean_a, double mean_b, double scale_sd);

/// (sum w)^2 / sum w^2. DegenerateWeightsError when all weights are zero;
/// DomainError for negative or non-finite weights.
double kish_ess(std::span<const double> weights);

/// Weighted column means of a feature matrix over a row subset. Empty
/// weights means equal weights.
std::vector<double> weighted_means(const Eigen::MatrixXd& values,
                                   std::span<const std::size_t> rows,
                                   std::span<const double> weights = {});

}  // namespace profmatch
