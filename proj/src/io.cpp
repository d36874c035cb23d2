#include "profmatch/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "profmatch/error.hpp"

namespace profmatch {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool is_missing(std::string_view cell) {
  cell = trim(cell);
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan";
}

bool parse_number(std::string_view cell, double& out) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  if (cell.empty()) return false;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return ec == std::errc() && ptr == cell.data() + cell.size() && std::isfinite(out);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t column_index(const CsvTable& table, const std::string& name,
                         const char* role) {
  const auto it = std::find(table.header.begin(), table.header.end(), name);
  if (it == table.header.end())
    throw ConfigError(std::string(role) + " column '" + name + "' not found in header");
  return static_cast<std::size_t>(it - table.header.begin());
}

// Profile JSON reading with pointer-tagged errors.
[[noreturn]] void fail(const std::string& pointer, const std::string& what) {
  throw ProfileFormatError((pointer.empty() ? std::string("/") : pointer) + ": " + what);
}

const ordered_json& member(const ordered_json& obj, const std::string& pointer,
                           const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) fail(pointer, std::string("missing required member '") + key + "'");
  return *it;
}

void only_keys(const ordered_json& obj, const std::string& pointer,
               std::initializer_list<const char*> keys) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; }))
      fail(pointer + "/" + key, "unknown member");
  }
}

std::vector<double> number_array(const ordered_json& value, const std::string& pointer) {
  if (!value.is_array()) fail(pointer, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (!value[i].is_number())
      fail(pointer + "/" + std::to_string(i), "expected a number");
    out.push_back(value[i].get<double>());
  }
  return out;
}

}  // namespace

CsvTable parse_csv(std::string_view text, const std::string& source) {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  std::size_t record_line = 1;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    const bool blank = record.size() == 1 && record[0].empty();
    if (!blank) records.push_back(std::move(record));
    record.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      continue;
    } else if (c == '\n') {
      end_record();
      record_line = ++line;
    } else {
      field += c;
      field_started = true;
    }
  }
  if (in_quotes)
    throw ParseError(source + ": unterminated quoted field starting on line " +
                     std::to_string(record_line));
  if (!field.empty() || !record.empty()) end_record();
  if (records.empty()) throw DataError(source + ": file is empty");

  CsvTable table;
  table.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size())
      throw ParseError(source + ": row " + std::to_string(r) + " has " +
                       std::to_string(records[r].size()) + " fields, header has " +
                       std::to_string(table.header.size()));
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

CsvTable read_csv(const std::string& path) { return parse_csv(read_file(path), path); }

std::string csv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    const std::string& f = fields[i];
    if (f.find_first_of(",\"\r\n") == std::string::npos) {
      out += f;
      continue;
    }
    out += '"';
    for (char c : f) {
      if (c == '"') out += '"';
      out += c;
    }
    out += '"';
  }
  out += '\n';
  return out;
}

std::string to_csv(const CsvTable& table) {
  std::string out = csv_line(table.header);
  for (const auto& row : table.rows) out += csv_line(row);
  return out;
}

void write_output(const std::string& path, const std::string& contents) {
  if (path.empty() || path == "-") {
    std::cout << contents << std::flush;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << contents;
  if (!out) throw ConfigError("failed writing '" + path + "'");
}

void require_readable(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "' for reading");
}

void require_writable(const std::string& path) {
  if (path.empty() || path == "-") return;
  {
    std::ifstream probe(path);
    if (probe) {
      std::ofstream out(path, std::ios::binary | std::ios::app);
      if (!out) throw ConfigError("cannot open '" + path + "' for writing");
      return;
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out.close();
  std::remove(path.c_str());
}

LoadedData dataset_from_table(CsvTable table, const ColumnRoles& roles,
                              const RoleRequirements& required) {
  if (required.treatment && roles.treatment.empty())
    throw ConfigError("a treatment column is required (--treatment)");
  if (required.outcome && roles.outcome.empty())
    throw ConfigError("an outcome column is required (--outcome)");
  if (required.selection && roles.selection.empty())
    throw ConfigError("a selection column is required (--selection)");
  if (table.rows.empty()) throw DataError("file has a header but no data rows");

  struct Wanted {
    std::string name;
    bool integer;
  };
  std::vector<Wanted> wanted;
  auto add = [&](const std::string& name, bool integer, const char* role) {
    if (name.empty()) return;
    column_index(table, name, role);
    for (const auto& w : wanted)
      if (w.name == name) return;
    wanted.push_back({name, integer});
  };
  add(roles.treatment, true, "treatment");
  add(roles.selection, true, "selection");
  add(roles.outcome, false, "outcome");

  LoadedData out;
  if (!roles.covariates.empty()) {
    for (const auto& c : roles.covariates) add(c, false, "covariate");
    out.covariates = roles.covariates;
  } else {
    for (std::size_t j = 0; j < table.header.size(); ++j) {
      const std::string& name = table.header[j];
      if (name == roles.treatment || name == roles.selection || name == roles.outcome)
        continue;
      bool numeric = true;
      double v = 0.0;
      for (const auto& row : table.rows)
        if (!is_missing(row[j]) && !parse_number(row[j], v)) {
          numeric = false;
          break;
        }
      if (numeric) {
        add(name, false, "covariate");
        out.covariates.push_back(name);
      }
    }
  }

  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
  for (const auto& w : wanted) {
    const std::size_t j = column_index(table, w.name, "mapped");
    std::vector<double> values(table.rows.size());
    std::size_t missing = 0;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const std::string& cell = table.rows[r][j];
      if (is_missing(cell)) {
        values[r] = std::numeric_limits<double>::quiet_NaN();
        ++missing;
        continue;
      }
      if (!parse_number(cell, values[r]))
        throw ParseError("row " + std::to_string(r + 1) + ", column " + w.name +
                         ": '" + cell + "' is not a number");
      if (w.integer && values[r] != std::floor(values[r]))
        throw ParseError("row " + std::to_string(r + 1) + ", column " + w.name +
                         ": '" + cell + "' is not an integer label");
    }
    if (missing) out.missing.push_back({w.name, missing});
    names.push_back(w.name);
    columns.push_back(std::move(values));
  }
  out.data = Dataset(std::move(names), std::move(columns));
  out.table = std::move(table);
  return out;
}

LoadedData load_dataset(const std::string& path, const ColumnRoles& roles,
                        const RoleRequirements& required) {
  try {
    return dataset_from_table(read_csv(path), roles, required);
  } catch (Error& e) {
    e.add_context(path);
    throw;
  }
}

std::string profile_to_json(const Profile& profile) {
  profile.validate();
  ordered_json doc;
  ordered_json features = ordered_json::array();
  for (const auto& f : profile.features) {
    ordered_json terms = ordered_json::array();
    for (const auto& t : f.terms) terms.push_back({{"col", t.column}, {"pow", t.power}});
    features.push_back({{"name", f.name}, {"terms", std::move(terms)}});
  }
  doc["features"] = std::move(features);
  doc["targets"] = profile.targets;
  doc["tolerances"] = profile.tolerances;
  if (profile.scale_sds) doc["scale_sds"] = *profile.scale_sds;
  if (profile.multiplier) doc["multiplier"] = *profile.multiplier;
  return doc.dump(2) + "\n";
}

Profile profile_from_json(std::string_view text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ProfileFormatError(std::string("/: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail("", "expected an object");
  only_keys(doc, "", {"features", "targets", "tolerances", "scale_sds", "multiplier"});

  Profile p;
  const auto& features = member(doc, "", "features");
  if (!features.is_array() || features.empty())
    fail("/features", "expected a nonempty array");
  for (std::size_t i = 0; i < features.size(); ++i) {
    const std::string fp = "/features/" + std::to_string(i);
    const auto& f = features[i];
    if (!f.is_object()) fail(fp, "expected an object");
    only_keys(f, fp, {"name", "terms"});
    FeatureSpec spec;
    const auto& name = member(f, fp, "name");
    if (!name.is_string()) fail(fp + "/name", "expected a string");
    spec.name = name.get<std::string>();
    const auto& terms = member(f, fp, "terms");
    if (!terms.is_array()) fail(fp + "/terms", "expected an array");
    for (std::size_t j = 0; j < terms.size(); ++j) {
      const std::string tp = fp + "/terms/" + std::to_string(j);
      const auto& t = terms[j];
      if (!t.is_object()) fail(tp, "expected an object");
      only_keys(t, tp, {"col", "pow"});
      const auto& col = member(t, tp, "col");
      if (!col.is_string() || col.get<std::string>().empty())
        fail(tp + "/col", "expected a nonempty string");
      const auto& pow = member(t, tp, "pow");
      if (!pow.is_number_integer() || pow.get<long long>() < 1 ||
          pow.get<long long>() > std::numeric_limits<int>::max())
        fail(tp + "/pow", "expected an integer power of at least 1");
      spec.terms.push_back({col.get<std::string>(), static_cast<int>(pow.get<long long>())});
    }
    p.features.push_back(std::move(spec));
  }

  p.targets = number_array(member(doc, "", "targets"), "/targets");
  p.tolerances = number_array(member(doc, "", "tolerances"), "/tolerances");
  if (p.targets.size() != p.features.size())
    fail("/targets", "expected " + std::to_string(p.features.size()) + " entries, one per feature");
  if (p.tolerances.size() != p.features.size())
    fail("/tolerances",
         "expected " + std::to_string(p.features.size()) + " entries, one per feature");
  for (std::size_t k = 0; k < p.tolerances.size(); ++k)
    if (!(p.tolerances[k] >= 0.0))
      fail("/tolerances/" + std::to_string(k), "tolerance must be nonnegative");
  if (const auto it = doc.find("scale_sds"); it != doc.end()) {
    p.scale_sds = number_array(*it, "/scale_sds");
    if (p.scale_sds->size() != p.features.size())
      fail("/scale_sds",
           "expected " + std::to_string(p.features.size()) + " entries, one per feature");
    for (std::size_t k = 0; k < p.scale_sds->size(); ++k)
      if (!((*p.scale_sds)[k] >= 0.0))
        fail("/scale_sds/" + std::to_string(k), "standard deviation must be nonnegative");
  }
  if (const auto it = doc.find("multiplier"); it != doc.end()) {
    if (!it->is_number() || !(it->get<double>() >= 0.0))
      fail("/multiplier", "expected a nonnegative number");
    p.multiplier = it->get<double>();
  }
  return p;
}

void write_profile(const std::string& path, const Profile& profile) {
  write_output(path, profile_to_json(profile));
}

Profile read_profile(const std::string& path) {
  try {
    return profile_from_json(read_file(path));
  } catch (Error& e) {
    e.add_context(path);
    throw;
  }
}

}  // namespace profmatch
