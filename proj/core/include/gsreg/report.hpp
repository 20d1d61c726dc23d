#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gsreg/sim3.hpp"

namespace gsreg {

/**
 * Header document holding one similarity transform as 8 labeled scalars
 * (s, qw, qx, qy, qz, tx, ty, tz; quaternion scalar-first with qw >= 0)
 * plus free-form numeric diagnostics and string labels.
 */
struct TransformReport {
  Sim3 transform;
  std::map<std::string, double> diagnostics;
  std::map<std::string, std::string> labels;
};

void write_transform_report(const TransformReport& report, const std::filesystem::path& path);
TransformReport read_transform_report(const std::filesystem::path& path);

/// Tab-separated table with a header row.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
};

void write_table(const Table& table, const std::filesystem::path& path);
std::string format_table(const Table& table);
std::string format_number(double value, int precision = 10);

}  // namespace gsreg
