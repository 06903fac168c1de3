#include "csdis/harness/table.hpp"

#include <cmath>
#include <cstdio>

#include "csdis/errors.hpp"

namespace csdis::harness {

TableFormat table_format_from_string(const std::string& name) {
    if (name == "markdown" || name == "md") return TableFormat::Markdown;
    if (name == "csv") return TableFormat::Csv;
    if (name == "json") return TableFormat::Json;
    throw ConfigError("unknown table format '" + name + "' (markdown, csv, json)");
}

std::string format_cell(const Stat& s) {
    if (s.degenerate()) return "n/a";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f ±%.2f", s.mean, s.std);
    return buf;
}

namespace {

std::string column_header(synth::ScenarioKind k) {
    const char* c = synth::content_kind(k) == synth::ContentKind::Gt ? "GT C" : "Random C";
    const char* s = "GT s";
    switch (synth::style_kind(k)) {
    case synth::StyleKind::Gt: s = "GT s"; break;
    case synth::StyleKind::Random: s = "Random s"; break;
    case synth::StyleKind::Correlated: s = "Correlated s"; break;
    }
    return std::string(c) + " / " + s;
}

const char* arrow(Metric m) { return lower_is_better(m) ? "↓" : "↑"; }

} // namespace

std::string render_table(const MetricReport& report, TableFormat format) {
    std::string out;
    switch (format) {
    case TableFormat::Markdown: {
        out = "| Metric |";
        for (const auto& s : report.scenarios) out += " " + column_header(s.kind) + " |";
        out += "\n|---|";
        for (std::size_t i = 0; i < report.scenarios.size(); ++i) out += "---:|";
        out += "\n";
        for (auto m : kAllMetrics) {
            out += std::string("| ") + label(m) + " (" + arrow(m) + ") |";
            for (const auto& s : report.scenarios) out += " " + format_cell(s.metric(m)) + " |";
            out += "\n";
        }
        return out;
    }
    case TableFormat::Csv: {
        out = "metric,direction";
        for (const auto& s : report.scenarios) out += std::string(",") + synth::to_string(s.kind);
        out += "\n";
        for (auto m : kAllMetrics) {
            out += std::string(to_string(m)) + "," + (lower_is_better(m) ? "down" : "up");
            for (const auto& s : report.scenarios) out += "," + format_cell(s.metric(m));
            out += "\n";
        }
        return out;
    }
    case TableFormat::Json: {
        nlohmann::ordered_json j;
        j["columns"] = nlohmann::ordered_json::array();
        for (const auto& s : report.scenarios)
            j["columns"].push_back({{"scenario", synth::to_string(s.kind)}, {"header", column_header(s.kind)}});
        j["rows"] = nlohmann::ordered_json::array();
        for (auto m : kAllMetrics) {
            nlohmann::ordered_json row;
            row["metric"] = to_string(m);
            row["label"] = label(m);
            row["direction"] = lower_is_better(m) ? "down" : "up";
            row["cells"] = nlohmann::ordered_json::array();
            for (const auto& s : report.scenarios) {
                const auto& st = s.metric(m);
                nlohmann::ordered_json cell;
                cell["scenario"] = synth::to_string(s.kind);
                cell["mean"] = std::isfinite(st.mean) ? nlohmann::ordered_json(st.mean) : nlohmann::ordered_json(nullptr);
                cell["std"] = std::isfinite(st.std) ? nlohmann::ordered_json(st.std) : nlohmann::ordered_json(nullptr);
                cell["text"] = format_cell(st);
                row["cells"].push_back(cell);
            }
            j["rows"].push_back(row);
        }
        return j.dump(2) + "\n";
    }
    }
    return out;
}

} // namespace csdis::harness
