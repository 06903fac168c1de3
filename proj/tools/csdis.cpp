// csdis command line: dataset generation, metrics and the scenario study.

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "csdis/dcor.hpp"
#include "csdis/dump.hpp"
#include "csdis/errors.hpp"
#include "csdis/harness/pearson.hpp"
#include "csdis/harness/report.hpp"
#include "csdis/harness/scenarios.hpp"
#include "csdis/harness/table.hpp"
#include "csdis/iob.hpp"
#include "csdis/nn/spec.hpp"
#include "csdis/synth.hpp"

#ifndef CSDIS_SOURCE_DIR
#define CSDIS_SOURCE_DIR "."
#endif

namespace fs = std::filesystem;
using namespace csdis;

namespace {

enum Exit { kOk = 0, kConfig = 2, kNumeric = 3, kFormat = 4 };

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path);
    out << text;
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            v.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw InputError("not a number: '" + item + "'");
        }
    }
    return v;
}

nlohmann::ordered_json dcor_json(const DcorResult& r) {
    nlohmann::ordered_json j;
    j["dcor"] = r.dcor;
    j["dcov_xy"] = r.dcov_xy;
    j["dcov_xx"] = r.dcov_xx;
    j["dcov_yy"] = r.dcov_yy;
    j["n"] = r.n;
    return j;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"csdis: distance correlation and information-over-bias metrics for content-style representations"};
    app.set_version_flag("--version", CSDIS_VERSION);
    app.require_subcommand(1);
    std::string config_dir = std::string(CSDIS_SOURCE_DIR) + "/configs";
    app.add_option("--config-dir", config_dir, "Directory holding decoders/ and train.json")->envname("CSDIS_CONFIG_DIR");

    // generate
    auto* gen = app.add_subcommand("generate", "Render the synthetic analog dataset");
    std::size_t gen_n = synth::kDefaultSamples;
    std::uint64_t gen_seed = 0;
    std::string gen_out;
    gen->add_option("--n", gen_n, "Number of samples")->check(CLI::Range(std::size_t{2}, std::size_t{1} << 24));
    gen->add_option("--seed", gen_seed, "Factor seed");
    gen->add_option("--out", gen_out, "Output directory")->required();

    // dc
    auto* dc = app.add_subcommand("dc", "Distance correlation of two sample tensors");
    std::string dc_a, dc_b;
    std::size_t dc_block = 0;
    dc->add_option("--a", dc_a, "First CSTD tensor (N, ...)")->required();
    dc->add_option("--b", dc_b, "Second CSTD tensor (N, ...)")->required();
    dc->add_option("--block", dc_block, "Row block size for the streamed estimator (0 = in memory)");

    // iob
    auto* iob = app.add_subcommand("iob", "Information over bias of latents for images");
    std::string iob_images, iob_latents, iob_decoder, iob_train;
    std::size_t iob_runs = kDefaultRuns, iob_epochs = 0;
    iob->add_option("--images", iob_images, "CSTD images (N, C, H, W)")->required();
    iob->add_option("--latents", iob_latents, "CSTD latents (N, ...)")->required();
    iob->add_option("--decoder", iob_decoder, "Decoder JSON")->required();
    iob->add_option("--train", iob_train, "Training JSON (default: <config-dir>/train.json)");
    iob->add_option("--runs", iob_runs, "Independent runs")->check(CLI::PositiveNumber);
    iob->add_option("--epochs", iob_epochs, "Override the epoch count");

    // scenarios
    auto* sc = app.add_subcommand("scenarios", "Run the five-scenario validation study");
    std::string sc_data, sc_out = "report.json", sc_content, sc_style, sc_train;
    std::vector<std::string> sc_kinds;
    std::size_t sc_runs = 3, sc_dc_sub = harness::kDefaultDcSubsample, sc_iob_sub = 0, sc_epochs = 40, sc_threads = 1;
    std::uint64_t sc_seed = 0;
    bool sc_verbose = false;
    sc->add_option("--data", sc_data, "SampleSet directory from `csdis generate`")->required();
    sc->add_option("--runs", sc_runs, "Runs per scenario")->check(CLI::PositiveNumber);
    sc->add_option("--seed", sc_seed, "Base seed; run r uses seed*1000 + r");
    sc->add_option("--dc-subsample", sc_dc_sub, "Samples used for distance correlation (0 = all)");
    sc->add_option("--iob-subsample", sc_iob_sub, "Samples used for IOB training (0 = all)");
    sc->add_option("--iob-epochs", sc_epochs, "Decoder training epochs")->check(CLI::PositiveNumber);
    auto* threads_opt = sc->add_option("--threads", sc_threads, "Worker threads (env CSDIS_THREADS)")->check(CLI::PositiveNumber);
    sc->add_option("--scenarios", sc_kinds, "Subset of gt_gt,rand_gt,gt_rand,rand_rand,gt_corr")->delimiter(',');
    sc->add_option("--content-decoder", sc_content, "Content decoder JSON");
    sc->add_option("--style-decoder", sc_style, "Style decoder JSON");
    sc->add_option("--train", sc_train, "Training JSON");
    sc->add_option("--out", sc_out, "Report path");
    sc->add_flag("-v,--verbose", sc_verbose, "Progress on stderr");

    // table
    auto* tb = app.add_subcommand("table", "Render a report as the study table");
    std::string tb_report, tb_format = "markdown", tb_out;
    tb->add_option("--report", tb_report, "Report JSON")->required();
    tb->add_option("--format", tb_format, "markdown, csv or json");
    tb->add_option("--out", tb_out, "Output file (default stdout)");

    // pearson
    auto* pe = app.add_subcommand("pearson", "Cross-metric Pearson matrix of a report, or r(x, y)");
    std::string pe_report, pe_out, pe_x, pe_y;
    pe->add_option("--report", pe_report, "Report JSON");
    pe->add_option("--x", pe_x, "Comma-separated values");
    pe->add_option("--y", pe_y, "Comma-separated values");
    pe->add_option("--out", pe_out, "CSV output (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }
    // CLI11 does not run validators on environment values
    if (*sc && threads_opt->count() == 0) {
        if (const char* env = std::getenv("CSDIS_THREADS")) {
            const std::string_view v(env);
            std::size_t n = 0;
            const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
            if (ec != std::errc{} || end != v.data() + v.size() || n == 0) {
                std::cerr << "error: CSDIS_THREADS must be a positive integer, got '" << v << "'\n";
                return kConfig;
            }
            sc_threads = n;
        }
    }

    try {
        if (*gen) {
            const auto set = synth::generate_dataset(gen_n, gen_seed);
            write_dump(gen_out, set);
            write_text((fs::path(gen_out) / "factors.csv").string(), synth::factors_csv(set.require(Role::Factors)));
            std::cout << "wrote " << gen_n << " samples to " << gen_out << " (digest " << sample_set_digest(fs::path(gen_out))
                      << ")\n";
        } else if (*dc) {
            const auto a = stack_batch(read_dump(dc_a));
            const auto b = stack_batch(read_dump(dc_b));
            const auto r = dc_block == 0 ? dcor(a, b) : dcor_blocked(a, b, dc_block);
            std::cout << dcor_json(r).dump(2) << "\n";
        } else if (*iob) {
            const auto images = read_dump(iob_images);
            const auto latents = read_dump(iob_latents);
            auto train = nn::load_train_config(iob_train.empty() ? fs::path(config_dir) / "train.json" : fs::path(iob_train));
            if (iob_epochs > 0) train.epochs = iob_epochs;
            const auto cfg = make_iob_config(nn::load_decoder_spec(iob_decoder), train, iob_runs);
            const auto r = compute_iob(images, latents, cfg);
            nlohmann::ordered_json j;
            j["iob"] = r.mean;
            j["std"] = r.std;
            j["per_run"] = r.per_run;
            j["mse_bias"] = r.mse_bias_mean;
            j["mse_z"] = r.mse_z_mean;
            j["runs"] = iob_runs;
            j["epochs"] = train.epochs;
            std::cout << j.dump(2) << "\n";
        } else if (*sc) {
            auto options = harness::default_scenario_options(config_dir);
            if (!sc_content.empty()) options.content_decoder = nn::load_decoder_spec(sc_content);
            if (!sc_style.empty()) options.style_decoder = nn::load_decoder_spec(sc_style);
            if (!sc_train.empty()) options.train = nn::load_train_config(sc_train);
            options.train.epochs = sc_epochs;
            options.runs = sc_runs;
            options.seed = sc_seed;
            options.dc_subsample = sc_dc_sub;
            options.iob_subsample = sc_iob_sub;
            options.threads = sc_threads;
            options.verbose = sc_verbose;
            if (!sc_kinds.empty()) {
                options.scenarios.clear();
                for (const auto& k : sc_kinds) options.scenarios.push_back(synth::scenario_from_string(k));
            }
            const auto set = read_sample_set(sc_data);
            const auto report = harness::run_scenarios(set, options);
            harness::save_report(report, sc_out);
            std::cout << harness::render_table(report, harness::TableFormat::Markdown);
        } else if (*tb) {
            const auto report = harness::load_report(tb_report);
            write_text(tb_out, harness::render_table(report, harness::table_format_from_string(tb_format)));
        } else if (*pe) {
            if (!pe_report.empty()) {
                const auto table = harness::cross_metric_table(harness::load_report(pe_report));
                write_text(pe_out, harness::to_csv(table));
            } else if (!pe_x.empty() && !pe_y.empty()) {
                const auto x = parse_list(pe_x), y = parse_list(pe_y);
                char buf[64];
                std::snprintf(buf, sizeof buf, "%.17g\n", harness::pearson(x, y));
                write_text(pe_out, buf);
            } else {
                throw ConfigError("pearson needs --report, or both --x and --y");
            }
        }
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return kFormat;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kNumeric;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfig;
    }
    return kOk;
}
