#include "gsreg/report.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gsreg/error.hpp"

namespace gsreg {

namespace {

constexpr const char* kReportSchema = "gsreg.sim3";
constexpr const char* kKeys[8] = {"s", "qw", "qx", "qy", "qz", "tx", "ty", "tz"};

}  // namespace

void write_transform_report(const TransformReport& report, const std::filesystem::path& path) {
  nlohmann::ordered_json doc;
  doc["schema"] = kReportSchema;
  doc["version"] = 1;
  const auto p = report.transform.params();
  for (int i = 0; i < 8; ++i) doc[kKeys[i]] = p[i];
  if (!report.diagnostics.empty()) doc["diagnostics"] = report.diagnostics;
  if (!report.labels.empty()) doc["labels"] = report.labels;
  std::ofstream out(path);
  if (!out) throw FormatError("report: cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

TransformReport read_transform_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("report: cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("report: " + path.string() + ": " + e.what());
  }
  if (doc.value("schema", std::string{}) != kReportSchema) {
    throw FormatError("report: " + path.string() + ": not a gsreg.sim3 document");
  }
  std::array<double, 8> p{};
  for (int i = 0; i < 8; ++i) {
    if (!doc.contains(kKeys[i]) || !doc[kKeys[i]].is_number()) {
      throw FormatError("report: " + path.string() + ": missing scalar '" + kKeys[i] + "'");
    }
    p[i] = doc[kKeys[i]].get<double>();
  }
  TransformReport report;
  try {
    report.transform = Sim3::from_params(p);
  } catch (const InvalidArgument& e) {
    throw FormatError("report: " + path.string() + ": " + e.what());
  }
  if (doc.contains("diagnostics")) {
    report.diagnostics = doc["diagnostics"].get<std::map<std::string, double>>();
  }
  if (doc.contains("labels")) {
    report.labels = doc["labels"].get<std::map<std::string, std::string>>();
  }
  return report;
}

void Table::add_row(std::vector<std::string> row) {
  if (row.size() != columns.size()) throw InvalidArgument("table: row width mismatch");
  rows.push_back(std::move(row));
}

std::string format_table(const Table& table) {
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "\t" : "") << cells[i];
    out << '\n';
  };
  line(table.columns);
  for (const auto& r : table.rows) line(r);
  return out.str();
}

void write_table(const Table& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("table: cannot write " + path.string());
  out << format_table(table);
}

std::string format_number(double value, int precision) {
  std::ostringstream out;
  out.precision(precision);
  out << value;
  return out.str();
}

}  // namespace gsreg
