#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "csdis/synth.hpp"

namespace csdis::harness {

// The five Table 1 metrics, in row order.
enum class Metric { DcCs, DcIc, DcIs, IobIc, IobIs };

inline constexpr std::array<Metric, 5> kAllMetrics = {Metric::DcCs, Metric::DcIc, Metric::DcIs, Metric::IobIc,
                                                      Metric::IobIs};

const char* to_string(Metric m);   // "dc_cs", ...
const char* label(Metric m);       // "DC(C,s)", ...
bool lower_is_better(Metric m);    // only DC(C,s)

// Mean and population std over runs. A metric that could not be computed
// in some run (constant input) is degenerate: mean and std are NaN and the
// per-run list holds NaN in that run's slot.
struct Stat {
    double mean = 0.0;
    double std = 0.0;
    std::vector<double> per_run;

    static Stat from_runs(std::vector<double> values);
    bool degenerate() const;
};

struct ScenarioReport {
    synth::ScenarioKind kind = synth::ScenarioKind::GtGt;
    Stat dc_cs, dc_ic, dc_is, iob_ic, iob_is;
    std::size_t n = 0;        // samples used for IOB training
    std::size_t dc_n = 0;     // samples used for distance correlation
    std::size_t runs = 0;
    std::vector<std::uint64_t> seeds;  // representation seed of each run
    std::string config_hash;
    // Per-run mean reconstruction errors behind the IOB values.
    std::vector<double> iob_ic_mse_bias, iob_ic_mse_z, iob_is_mse_bias, iob_is_mse_z;
    // Wall-clock seconds spent on each metric, including the cached work it
    // depends on. Not part of the reproducibility contract.
    std::array<double, 5> seconds{};

    const Stat& metric(Metric m) const;
    Stat& metric(Metric m);
};

struct MetricReport {
    std::string tool_version;
    std::string dataset_digest;
    nlohmann::ordered_json config;
    std::string config_hash;
    std::vector<ScenarioReport> scenarios;
    double total_seconds = 0.0;

    const ScenarioReport* find(synth::ScenarioKind kind) const;
};

// Every wall-clock value sits under a "timing" key; strip_timing removes
// them so two reports can be compared byte for byte.
nlohmann::ordered_json to_json(const MetricReport& report);
MetricReport report_from_json(const nlohmann::json& j);
void strip_timing(nlohmann::ordered_json& j);

MetricReport load_report(const std::string& path);
void save_report(const MetricReport& report, const std::string& path);

} // namespace csdis::harness
