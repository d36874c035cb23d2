#include "profmatch/dataset.hpp"

#include <algorithm>

#include "profmatch/error.hpp"

namespace profmatch {

Dataset::Dataset(std::vector<std::string> names,
                 std::vector<std::vector<double>> columns) {
  if (names.size() != columns.size())
    throw ShapeError("dataset: name count differs from column count");
  for (std::size_t j = 0; j < names.size(); ++j)
    set_column(names[j], std::move(columns[j]));
}

bool Dataset::has(std::string_view name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::size_t Dataset::index_of(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end())
    throw ColumnError("column '" + std::string(name) + "' not found");
  return static_cast<std::size_t>(it - names_.begin());
}

std::span<const double> Dataset::column(std::string_view name) const {
  return columns_[index_of(name)];
}

std::span<const double> Dataset::column(std::size_t index) const {
  return columns_.at(index);
}

double Dataset::at(std::size_t row, std::string_view name) const {
  return column(name)[row];
}

void Dataset::set_column(const std::string& name, std::vector<double> values) {
  if (!names_.empty() && values.size() != rows_)
    throw ShapeError("column '" + name + "' has " +
                     std::to_string(values.size()) + " rows, expected " +
                     std::to_string(rows_));
  rows_ = values.size();
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it != names_.end()) {
    columns_[static_cast<std::size_t>(it - names_.begin())] = std::move(values);
    return;
  }
  names_.push_back(name);
  columns_.push_back(std::move(values));
}

Dataset Dataset::select_rows(std::span<const std::size_t> indices) const {
  Dataset out;
  out.names_ = names_;
  out.rows_ = indices.size();
  out.columns_.resize(columns_.size());
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    auto& dst = out.columns_[j];
    dst.reserve(indices.size());
    for (std::size_t i : indices) dst.push_back(columns_[j].at(i));
  }
  return out;
}

std::vector<std::size_t> Dataset::rows_where(std::string_view name,
                                             double value) const {
  const auto col = column(name);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < col.size(); ++i)
    if (col[i] == value) out.push_back(i);
  return out;
}

}  // namespace profmatch
