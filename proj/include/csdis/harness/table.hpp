#pragma once

#include <string>

#include "csdis/harness/report.hpp"

namespace csdis::harness {

enum class TableFormat { Markdown, Csv, Json };

TableFormat table_format_from_string(const std::string& name);

// "0.17 ±0.00"; "n/a" for degenerate statistics.
std::string format_cell(const Stat& s);

// Metrics as rows, scenarios as columns, as in the paper's study table.
std::string render_table(const MetricReport& report, TableFormat format);

} // namespace csdis::harness
