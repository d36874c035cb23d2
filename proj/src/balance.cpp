#include "profmatch/balance.hpp"

#include <cmath>
#include <string>

#include "profmatch/error.hpp"

namespace profmatch {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

}  // namespace

FeatureSpec FeatureSpec::raw(const std::string& column) {
  return FeatureSpec{column, {Term{column, 1}}};
}

FeatureSpec FeatureSpec::parse(const std::string& text) {
  FeatureSpec spec;
  spec.name = trim(text);
  if (spec.name.empty() || spec.name == "1") return FeatureSpec{spec.name, {}};
  std::size_t start = 0;
  while (start <= spec.name.size()) {
    const auto stop = spec.name.find('*', start);
    const std::string factor = trim(spec.name.substr(
        start, stop == std::string::npos ? std::string::npos : stop - start));
    const auto caret = factor.find('^');
    Term term;
    term.column = trim(factor.substr(0, caret));
    if (term.column.empty())
      throw DataError("feature '" + spec.name + "': empty factor");
    if (caret != std::string::npos) {
      const std::string power = trim(factor.substr(caret + 1));
      std::size_t used = 0;
      try {
        term.power = std::stoi(power, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != power.size() || power.empty() || term.power < 1)
        throw DataError("feature '" + spec.name + "': bad power '" + power +
                        "'");
    }
    spec.terms.push_back(term);
    if (stop == std::string::npos) break;
    start = stop + 1;
  }
  return spec;
}

void Profile::validate() const {
  if (targets.size() != features.size() || tolerances.size() != features.size())
    throw DomainError("profile: features, targets and tolerances differ in length");
  if (scale_sds && scale_sds->size() != features.size())
    throw DomainError("profile: scale_sds length differs from features");
  for (double t : tolerances)
    if (!(t >= 0.0) || !std::isfinite(t))
      throw DomainError("profile: tolerances must be finite and nonnegative");
  for (double t : targets)
    if (!std::isfinite(t)) throw DomainError("profile: non-finite target");
}

Eigen::MatrixXd eval_features(const Dataset& data,
                              std::span<const FeatureSpec> features) {
  const auto n = static_cast<Eigen::Index>(data.rows());
  Eigen::MatrixXd out(n, static_cast<Eigen::Index>(features.size()));
  for (std::size_t k = 0; k < features.size(); ++k) {
    const FeatureSpec& f = features[k];
    auto col = out.col(static_cast<Eigen::Index>(k));
    col.setOnes();
    for (const Term& term : f.terms) {
      if (term.power < 1)
        throw DataError("feature '" + f.name + "': power below 1");
      const auto values = data.column(term.column);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double v = values[static_cast<std::size_t>(i)];
        if (!std::isfinite(v))
          throw DataError("feature '" + f.name + "': non-finite value in '" +
                          term.column + "' at row " + std::to_string(i + 1));
        double powered = v;
        for (int e = 1; e < term.power; ++e) powered *= v;
        col[i] *= powered;
      }
    }
  }
  return out;
}

std::vector<double> column_means(const Eigen::MatrixXd& values) {
  if (values.rows() == 0) throw EmptyInputError("column means of empty matrix");
  std::vector<double> out(static_cast<std::size_t>(values.cols()));
  for (Eigen::Index k = 0; k < values.cols(); ++k)
    out[static_cast<std::size_t>(k)] = values.col(k).mean();
  return out;
}

std::vector<double> column_sds(const Eigen::MatrixXd& values) {
  if (values.rows() < 2)
    throw EmptyInputError("standard deviation needs at least two rows");
  std::vector<double> out(static_cast<std::size_t>(values.cols()));
  for (Eigen::Index k = 0; k < values.cols(); ++k) {
    const double m = values.col(k).mean();
    const double ss = (values.col(k).array() - m).square().sum();
    out[static_cast<std::size_t>(k)] =
        std::sqrt(ss / static_cast<double>(values.rows() - 1));
  }
  return out;
}

Profile profile_from_target(const Dataset& target,
                            std::span<const FeatureSpec> features,
                            double multiplier, std::vector<double> scale_sds) {
  if (target.rows() == 0) throw EmptyInputError("profile: no target rows");
  if (!(multiplier >= 0.0) || !std::isfinite(multiplier))
    throw DomainError("profile: multiplier must be finite and nonnegative");
  if (scale_sds.size() != features.size())
    throw DomainError("profile: scale sds differ in length from features");
  Profile p;
  p.features.assign(features.begin(), features.end());
  p.targets = column_means(eval_features(target, features));
  p.tolerances.resize(features.size());
  for (std::size_t k = 0; k < features.size(); ++k) {
    if (multiplier != 0.0 && !(scale_sds[k] > 0.0))
      throw ZeroVarianceError("profile: feature '" + features[k].name +
                              "' has zero standard deviation");
    p.tolerances[k] = multiplier * scale_sds[k];
  }
  p.scale_sds = std::move(scale_sds);
  p.multiplier = multiplier;
  return p;
}

Profile profile_from_target(const Dataset& target,
                            std::span<const FeatureSpec> features,
                            double multiplier,
                            const Dataset& scale_population) {
  return profile_from_target(
      target, features, multiplier,
      column_sds(eval_features(scale_population, features)));
}

Profile profile_from_target(const Dataset& target,
                            std::span<const FeatureSpec> features,
                            double multiplier) {
  return profile_from_target(target, features, multiplier, target);
}

double pooled_sd(std::span<const double> group_sds) {
  if (group_sds.empty()) throw EmptyInputError("pooled sd of no groups");
  double ss = 0.0;
  for (double s : group_sds) {
    if (!(s >= 0.0)) throw DomainError("pooled sd: negative sd");
    ss += s * s;
  }
  return std::sqrt(ss / static_cast<double>(group_sds.size()));
}

double three_way_pooled_sd(const std::array<double, 3>& group_sds) {
  return pooled_sd(group_sds);
}

std::vector<double> pooled_feature_sds(const Dataset& data,
                                       std::span<const FeatureSpec> features,
                                       const std::string& group_column,
                                       std::span<const double> group_labels) {
  std::vector<std::vector<double>> per_group;
  for (double label : group_labels) {
    const auto rows = data.rows_where(group_column, label);
    per_group.push_back(
        column_sds(eval_features(data.select_rows(rows), features)));
  }
  std::vector<double> out(features.size());
  std::vector<double> sds(group_labels.size());
  for (std::size_t k = 0; k < features.size(); ++k) {
    for (std::size_t g = 0; g < per_group.size(); ++g) sds[g] = per_group[g][k];
    out[k] = pooled_sd(sds);
  }
  return out;
}

double tasmd(double sample_mean, double target_mean, double scale_sd) {
  if (!(scale_sd > 0.0))
    throw ZeroVarianceError("tasmd: scale sd must be positive");
  return std::abs(sample_mean - target_mean) / scale_sd;
}

double asmd(double mean_a, double mean_b, double scale_sd) {
  return tasmd(mean_a, mean_b, scale_sd);
}

double kish_ess(std::span<const double> weights) {
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w))
      throw DomainError("kish_ess: weights must be finite and nonnegative");
    sum += w;
    sum_sq += w * w;
  }
  if (!(sum > 0.0)) throw DegenerateWeightsError("kish_ess: all weights zero");
  return sum * sum / sum_sq;
}

std::vector<double> weighted_means(const Eigen::MatrixXd& values,
                                   std::span<const std::size_t> rows,
                                   std::span<const double> weights) {
  if (rows.empty()) throw EmptyInputError("weighted means over no rows");
  if (!weights.empty() && weights.size() != rows.size())
    throw ShapeError("weighted means: weights differ in length from rows");
  std::vector<double> out(static_cast<std::size_t>(values.cols()), 0.0);
  double total = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double w = weights.empty() ? 1.0 : weights[r];
    total += w;
    for (Eigen::Index k = 0; k < values.cols(); ++k)
      out[static_cast<std::size_t>(k)] +=
          w * values(static_cast<Eigen::Index>(rows[r]), k);
  }
  if (!(total > 0.0))
    throw DegenerateWeightsError("weighted means: zero total weight");
  for (double& v : out) v /= total;
  return out;
}

}  // namespace profmatch
