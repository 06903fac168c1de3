#pragma once

#include <array>
#include <span>
#include <string>

#include "csdis/harness/report.hpp"

namespace csdis::harness {

// Sample Pearson coefficient. Throws DegenerateInput when either side has
// zero variance, ShapeError on length mismatch or fewer than two values.
double pearson(std::span<const double> x, std::span<const double> y);

struct CrossMetricTable {
    std::array<std::array<double, 5>, 5> r{};  // NaN off-diagonal for degenerate columns
    std::array<bool, 5> degenerate{};          // constant or non-finite column
    std::size_t rows = 0;                      // scenarios used
};

// Pearson matrix over the five metric columns (scenario means). Needs at
// least three scenarios.
CrossMetricTable cross_metric_table(const MetricReport& report);

std::string to_csv(const CrossMetricTable& table);

} // namespace csdis::harness
