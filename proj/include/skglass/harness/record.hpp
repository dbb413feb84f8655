#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "skglass/errors.hpp"
#include "skglass/numerics.hpp"

namespace skglass::harness {

inline constexpr const char* kVersion = "0.3.0";
// Bump when any column list changes; the golden fixtures pin it.
inline constexpr int kSchemaVersion = 1;

enum class ColumnType { integer, real, text };

inline const char* to_string(ColumnType t) {
  switch (t) {
    case ColumnType::integer: return "integer";
    case ColumnType::real: return "real";
    case ColumnType::text: return "text";
  }
  return "?";
}

inline ColumnType parse_column_type(const std::string& s) {
  if (s == "integer") return ColumnType::integer;
  if (s == "real") return ColumnType::real;
  if (s == "text") return ColumnType::text;
  throw FormatError("unknown column type '" + s + "'");
}

struct Column {
  std::string name;
  ColumnType type = ColumnType::real;
  bool operator==(const Column&) const = default;
};

/// monostate is a missing value: empty in CSV, null in JSON. Non-finite
/// reals travel through JSON as the strings "nan", "inf", "-inf".
using Cell = std::variant<std::monostate, std::int64_t, double, std::string>;
using Row = std::vector<Cell>;

inline std::string csv_cell(const Cell& c) {
  if (std::holds_alternative<std::int64_t>(c)) return std::to_string(std::get<std::int64_t>(c));
  if (std::holds_alternative<double>(c)) return format_double(std::get<double>(c));
  if (std::holds_alternative<std::string>(c)) {
    const auto& s = std::get<std::string>(c);
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return out + "\"";
  }
  return "";
}

inline std::string csv_header(const std::vector<Column>& cols) {
  std::string out;
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i].name;
  return out + "\n";
}

inline std::string csv_line(const Row& row) {
  std::string out;
  for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_cell(row[i]);
  return out + "\n";
}

inline nlohmann::json cell_to_json(const Cell& c) {
  if (std::holds_alternative<std::int64_t>(c)) return std::get<std::int64_t>(c);
  if (std::holds_alternative<double>(c)) {
    const double x = std::get<double>(c);
    if (std::isfinite(x)) return x;
    return std::isnan(x) ? "nan" : x > 0 ? "inf" : "-inf";
  }
  if (std::holds_alternative<std::string>(c)) return std::get<std::string>(c);
  return nullptr;
}

inline Cell cell_from_json(const nlohmann::json& j, ColumnType type) {
  if (j.is_null()) return std::monostate{};
  switch (type) {
    case ColumnType::integer:
      if (!j.is_number_integer()) throw FormatError("expected an integer cell");
      return j.get<std::int64_t>();
    case ColumnType::real:
      if (j.is_string()) {
        const auto& s = j.get_ref<const std::string&>();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
      }
      if (!j.is_number()) throw FormatError("expected a numeric cell");
      return j.get<double>();
    case ColumnType::text:
      if (!j.is_string()) throw FormatError("expected a text cell");
      return j.get<std::string>();
  }
  return std::monostate{};
}

/// Deterministic content of a run. Wall-clock data lives in timing.json,
/// never here.
struct RunRecord {
  std::string version = kVersion;
  int schema = kSchemaVersion;
  std::string kind;
  std::string config_text;
  std::string config_hash;
  std::vector<Column> columns;
  std::vector<Row> rows;
  std::uint64_t tasks_done = 0;
  std::uint64_t tasks_total = 0;
  bool complete = false;
  nlohmann::json summary = nlohmann::json::object();

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i].name == name) return i;
    throw DimensionError("record has no column '" + name + "'");
  }

  void write_csv(std::ostream& out) const {
    out << csv_header(columns);
    for (const auto& r : rows) out << csv_line(r);
  }

  std::string csv() const {
    std::ostringstream o;
    write_csv(o);
    return o.str();
  }

  nlohmann::json to_json() const {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : columns) cols.push_back({{"name", c.name}, {"type", to_string(c.type)}});
    nlohmann::json rs = nlohmann::json::array();
    for (const auto& r : rows) {
      nlohmann::json jr = nlohmann::json::array();
      for (const auto& c : r) jr.push_back(cell_to_json(c));
      rs.push_back(std::move(jr));
    }
    return {{"version", version},     {"schema", schema},
            {"kind", kind},           {"config", config_text},
            {"config_hash", config_hash}, {"columns", cols},
            {"rows", rs},             {"tasks_done", tasks_done},
            {"tasks_total", tasks_total}, {"complete", complete},
            {"summary", summary}};
  }

  std::string dump() const { return to_json().dump(2) + "\n"; }

  static RunRecord from_json(const nlohmann::json& j) {
    try {
      RunRecord r;
      r.version = j.at("version").get<std::string>();
      r.schema = j.at("schema").get<int>();
      r.kind = j.at("kind").get<std::string>();
      r.config_text = j.at("config").get<std::string>();
      r.config_hash = j.at("config_hash").get<std::string>();
      for (const auto& c : j.at("columns"))
        r.columns.push_back({c.at("name").get<std::string>(), parse_column_type(c.at("type").get<std::string>())});
      for (const auto& jr : j.at("rows")) {
        if (jr.size() != r.columns.size()) throw FormatError("row width does not match the column list");
        Row row;
        for (std::size_t i = 0; i < jr.size(); ++i) row.push_back(cell_from_json(jr[i], r.columns[i].type));
        r.rows.push_back(std::move(row));
      }
      r.tasks_done = j.at("tasks_done").get<std::uint64_t>();
      r.tasks_total = j.at("tasks_total").get<std::uint64_t>();
      r.complete = j.at("complete").get<bool>();
      r.summary = j.at("summary");
      return r;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("malformed run record: ") + e.what());
    }
  }

  static RunRecord load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot read run record " + path.string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("run record " + path.string() + " is not JSON: " + e.what());
    }
    return from_json(j);
  }
};

/// Write-then-rename so readers never see a half-written file.
inline void write_atomic(const std::filesystem::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << bytes;
    out.flush();
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace skglass::harness
