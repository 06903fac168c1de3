#include "csdis/harness/pearson.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <vector>

#include "csdis/errors.hpp"

namespace csdis::harness {

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ShapeError("pearson needs equal lengths");
    if (x.size() < 2) throw ShapeError("pearson needs at least two values");
    const auto n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (!std::isfinite(sxx) || !std::isfinite(syy)) throw NumericalError("pearson input is not finite");
    if (sxx == 0.0 || syy == 0.0) throw DegenerateInput("pearson input has zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CrossMetricTable cross_metric_table(const MetricReport& report) {
    if (report.scenarios.size() < 3) throw ConfigError("cross-metric table needs at least 3 scenario rows");
    CrossMetricTable t;
    t.rows = report.scenarios.size();
    std::array<std::vector<double>, 5> cols;
    for (std::size_t m = 0; m < 5; ++m)
        for (const auto& s : report.scenarios) cols[m].push_back(s.metric(kAllMetrics[m]).mean);

    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t m = 0; m < 5; ++m) {
        const auto& c = cols[m];
        const bool finite = std::all_of(c.begin(), c.end(), [](double v) { return std::isfinite(v); });
        const bool constant = std::all_of(c.begin(), c.end(), [&](double v) { return v == c.front(); });
        t.degenerate[m] = !finite || constant;
    }
    for (std::size_t a = 0; a < 5; ++a) {
        t.r[a][a] = 1.0;
        for (std::size_t b = a + 1; b < 5; ++b) {
            double v = nan;
            if (!t.degenerate[a] && !t.degenerate[b]) v = pearson(cols[a], cols[b]);
            t.r[a][b] = t.r[b][a] = v;
        }
    }
    return t;
}

std::string to_csv(const CrossMetricTable& table) {
    std::string out = "metric";
    for (auto m : kAllMetrics) out += std::string(",") + to_string(m);
    out += ",degenerate\n";
    char buf[64];
    for (std::size_t a = 0; a < 5; ++a) {
        out += to_string(kAllMetrics[a]);
        for (std::size_t b = 0; b < 5; ++b) {
            const double v = table.r[a][b];
            if (std::isfinite(v)) {
                std::snprintf(buf, sizeof buf, ",%.17g", v);
                out += buf;
            } else {
                out += ",NaN";
            }
        }
        out += table.degenerate[a] ? ",1\n" : ",0\n";
    }
    return out;
}

} // namespace csdis::harness
