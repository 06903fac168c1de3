#include "csdis/harness/report.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <numeric>

#include "csdis/errors.hpp"

namespace csdis::harness {

const char* to_string(Metric m) {
    switch (m) {
    case Metric::DcCs: return "dc_cs";
    case Metric::DcIc: return "dc_ic";
    case Metric::DcIs: return "dc_is";
    case Metric::IobIc: return "iob_ic";
    case Metric::IobIs: return "iob_is";
    }
    return "?";
}

const char* label(Metric m) {
    switch (m) {
    case Metric::DcCs: return "DC(C,s)";
    case Metric::DcIc: return "DC(I,C)";
    case Metric::DcIs: return "DC(I,s)";
    case Metric::IobIc: return "IOB(I,C)";
    case Metric::IobIs: return "IOB(I,s)";
    }
    return "?";
}

bool lower_is_better(Metric m) { return m == Metric::DcCs; }

Stat Stat::from_runs(std::vector<double> values) {
    Stat s;
    s.per_run = std::move(values);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (s.per_run.empty()) {
        s.mean = s.std = nan;
        return s;
    }
    const auto n = static_cast<double>(s.per_run.size());
    s.mean = std::accumulate(s.per_run.begin(), s.per_run.end(), 0.0) / n;
    double sq = 0.0;
    for (double v : s.per_run) sq += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(sq / n);
    if (!std::isfinite(s.mean)) s.mean = s.std = nan;
    return s;
}

bool Stat::degenerate() const { return !std::isfinite(mean); }

const Stat& ScenarioReport::metric(Metric m) const {
    switch (m) {
    case Metric::DcCs: return dc_cs;
    case Metric::DcIc: return dc_ic;
    case Metric::DcIs: return dc_is;
    case Metric::IobIc: return iob_ic;
    case Metric::IobIs: return iob_is;
    }
    return dc_cs;
}

Stat& ScenarioReport::metric(Metric m) { return const_cast<Stat&>(std::as_const(*this).metric(m)); }

const ScenarioReport* MetricReport::find(synth::ScenarioKind kind) const {
    for (const auto& s : scenarios)
        if (s.kind == kind) return &s;
    return nullptr;
}

namespace {

using ojson = nlohmann::ordered_json;

ojson number_or_null(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

ojson values_json(const std::vector<double>& v) {
    ojson a = ojson::array();
    for (double x : v) a.push_back(number_or_null(x));
    return a;
}

std::vector<double> values_from(const nlohmann::json& a) {
    std::vector<double> v;
    for (const auto& x : a) v.push_back(x.is_null() ? std::numeric_limits<double>::quiet_NaN() : x.get<double>());
    return v;
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace

nlohmann::ordered_json to_json(const MetricReport& report) {
    ojson j;
    j["tool"] = "csdis";
    j["version"] = report.tool_version;
    j["dataset_digest"] = report.dataset_digest;
    j["config_hash"] = report.config_hash;
    j["config"] = report.config;
    j["scenarios"] = ojson::array();
    for (const auto& s : report.scenarios) {
        ojson row;
        row["scenario"] = synth::to_string(s.kind);
        row["content"] = synth::to_string(synth::content_kind(s.kind));
        row["style"] = synth::to_string(synth::style_kind(s.kind));
        row["n"] = s.n;
        row["dc_n"] = s.dc_n;
        row["runs"] = s.runs;
        row["seeds"] = s.seeds;
        row["config_hash"] = s.config_hash;
        ojson metrics;
        for (auto m : kAllMetrics) {
            const auto& st = s.metric(m);
            metrics[to_string(m)] = {{"mean", number_or_null(st.mean)},
                                     {"std", number_or_null(st.std)},
                                     {"per_run", values_json(st.per_run)}};
        }
        row["metrics"] = metrics;
        row["iob_errors"] = {
            {"ic", {{"mse_bias", values_json(s.iob_ic_mse_bias)}, {"mse_z", values_json(s.iob_ic_mse_z)}}},
            {"is", {{"mse_bias", values_json(s.iob_is_mse_bias)}, {"mse_z", values_json(s.iob_is_mse_z)}}},
        };
        ojson timing;
        for (auto m : kAllMetrics)
            timing[std::string(to_string(m)) + "_seconds"] = s.seconds[static_cast<std::size_t>(m)];
        row["timing"] = timing;
        j["scenarios"].push_back(row);
    }
    j["timing"] = {{"total_seconds", report.total_seconds}, {"written_at", utc_now()}};
    return j;
}

MetricReport report_from_json(const nlohmann::json& j) {
    try {
        MetricReport r;
        r.tool_version = j.at("version").get<std::string>();
        r.dataset_digest = j.at("dataset_digest").get<std::string>();
        r.config_hash = j.at("config_hash").get<std::string>();
        r.config = j.at("config");
        if (j.contains("timing")) r.total_seconds = j["timing"].value("total_seconds", 0.0);
        for (const auto& row : j.at("scenarios")) {
            ScenarioReport s;
            s.kind = synth::scenario_from_string(row.at("scenario").get<std::string>());
            s.n = row.at("n").get<std::size_t>();
            s.dc_n = row.at("dc_n").get<std::size_t>();
            s.runs = row.at("runs").get<std::size_t>();
            s.seeds = row.at("seeds").get<std::vector<std::uint64_t>>();
            s.config_hash = row.at("config_hash").get<std::string>();
            for (auto m : kAllMetrics) {
                const auto& mj = row.at("metrics").at(to_string(m));
                auto& st = s.metric(m);
                st.per_run = values_from(mj.at("per_run"));
                st.mean = mj.at("mean").is_null() ? std::numeric_limits<double>::quiet_NaN() : mj["mean"].get<double>();
                st.std = mj.at("std").is_null() ? std::numeric_limits<double>::quiet_NaN() : mj["std"].get<double>();
            }
            if (row.contains("iob_errors")) {
                const auto& e = row["iob_errors"];
                s.iob_ic_mse_bias = values_from(e.at("ic").at("mse_bias"));
                s.iob_ic_mse_z = values_from(e.at("ic").at("mse_z"));
                s.iob_is_mse_bias = values_from(e.at("is").at("mse_bias"));
                s.iob_is_mse_z = values_from(e.at("is").at("mse_z"));
            }
            if (row.contains("timing"))
                for (auto m : kAllMetrics)
                    s.seconds[static_cast<std::size_t>(m)] =
                        row["timing"].value(std::string(to_string(m)) + "_seconds", 0.0);
            r.scenarios.push_back(std::move(s));
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed report: ") + e.what());
    }
}

void strip_timing(nlohmann::ordered_json& j) {
    if (j.is_object()) {
        j.erase("timing");
        for (auto& [key, value] : j.items()) strip_timing(value);
    } else if (j.is_array()) {
        for (auto& v : j) strip_timing(v);
    }
}

MetricReport load_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open report " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("report " + path + ": " + e.what());
    }
    return report_from_json(j);
}

void save_report(const MetricReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write report " + path);
    out << to_json(report).dump(2) << "\n";
    if (!out) throw ConfigError("write failed for " + path);
}

} // namespace csdis::harness
