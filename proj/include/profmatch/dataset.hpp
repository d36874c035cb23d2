#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace profmatch {

/// Column-major table of numeric columns. Missing cells are NaN.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<std::string> names,
          std::vector<std::vector<double>> columns);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  bool has(std::string_view name) const;
  /// Throws ColumnError when the column does not exist.
  std::size_t index_of(std::string_view name) const;
  std::span<const double> column(std::string_view name) const;
  std::span<const double> column(std::size_t index) const;
  double at(std::size_t row, std::string_view name) const;

  /// Appends (or replaces) a column; its length must equal rows() unless the
  /// dataset has no columns yet.
  void set_column(const std::string& name, std::vector<double> values);

  /// Rows in the given order; indices may repeat (bootstrap resamples).
  Dataset select_rows(std::span<const std::size_t> indices) const;
  /// Indices of rows whose `name` column equals `value`.
  std::vector<std::size_t> rows_where(std::string_view name,
                                      double value) const;

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<double>> columns_;
  std::size_t rows_ = 0;
};

}  // namespace profmatch
