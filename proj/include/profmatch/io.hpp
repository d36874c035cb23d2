#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "profmatch/balance.hpp"
#include "profmatch/dataset.hpp"

namespace profmatch {

/// A CSV file as text: header plus rows of fields, all rows the header's width.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// RFC 4180 parsing: quoted fields may hold commas, doubled quotes and line
/// breaks; CRLF or LF line ends; a UTF-8 byte order mark is skipped. Throws
/// DataError for an empty input and ParseError for an unterminated quote or a
/// row whose width differs from the header.
CsvTable parse_csv(std::string_view text, const std::string& source = "input");
CsvTable read_csv(const std::string& path);

/// One line (with trailing newline), quoting fields that need it.
std::string csv_line(const std::vector<std::string>& fields);
std::string to_csv(const CsvTable& table);

/// Writes `contents` to `path`, or to stdout when path is "-" or empty.
void write_output(const std::string& path, const std::string& contents);
/// Throws ConfigError unless `path` can be opened for reading.
void require_readable(const std::string& path);
/// Throws ConfigError unless `path` can be created or overwritten. "-" and ""
/// mean stdout and always pass.
void require_writable(const std::string& path);

/// Empty strings mean the role is not mapped.
struct ColumnRoles {
  std::string treatment;
  std::string outcome;
  std::string selection;
  /// Empty means every other column whose cells are all numeric or missing.
  std::vector<std::string> covariates;
};

struct RoleRequirements {
  bool treatment = false;
  bool outcome = false;
  bool selection = false;
};

struct MissingCount {
  std::string column;
  std::size_t count = 0;
};

struct LoadedData {
  Dataset data;
  /// The file as read, for writing selected rows back out unchanged.
  CsvTable table;
  /// Missing cells ("", "NA", "NaN") per loaded column, only those with any.
  std::vector<MissingCount> missing;
  std::vector<std::string> covariates;
};

/// Loads the mapped columns as numbers; missing cells become NaN. Treatment
/// and selection cells must be integers. Throws ConfigError when a required
/// role is unmapped or a mapped column is absent, and ParseError naming the
/// 1-based data row and the column for a non-numeric cell.
LoadedData dataset_from_table(CsvTable table, const ColumnRoles& roles,
                              const RoleRequirements& required = {});
LoadedData load_dataset(const std::string& path, const ColumnRoles& roles,
                        const RoleRequirements& required = {});

/// Profile JSON:
///   {"features": [{"name": "X1*X3", "terms": [{"col": "X1", "pow": 1}, ...]}],
///    "targets": [...], "tolerances": [...], "scale_sds": [...],
///    "multiplier": 0.05}
/// scale_sds and multiplier are optional. Doubles are written with enough
/// digits to read back exactly.
std::string profile_to_json(const Profile& profile);
/// Throws ProfileFormatError naming the JSON pointer of the offending value.
Profile profile_from_json(std::string_view text);
void write_profile(const std::string& path, const Profile& profile);
Profile read_profile(const std::string& path);

}  // namespace profmatch
