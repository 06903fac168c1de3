#include "csdis/harness/scenarios.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <thread>

#include "csdis/dcor.hpp"
#include "csdis/dump.hpp"
#include "csdis/errors.hpp"
#include "csdis/hash.hpp"
#include "csdis/iob.hpp"
#include "csdis/nn/train.hpp"
#include "csdis/rng.hpp"

#ifndef CSDIS_VERSION
#define CSDIS_VERSION "0.0.0"
#endif

namespace csdis::harness {

using synth::ContentKind;
using synth::ScenarioKind;
using synth::StyleKind;

void ScenarioOptions::validate() const {
    if (scenarios.empty()) throw ConfigError("no scenarios selected");
    if (runs < 1) throw ConfigError("runs must be >= 1");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (dc_subsample == 1) throw ConfigError("dc subsample must be 0 (all) or >= 2");
    if (iob_subsample == 1) throw ConfigError("iob subsample must be 0 (all) or >= 2");
    train.validate();
    nn::infer_shapes(content_decoder);
    nn::infer_shapes(style_decoder);
}

nlohmann::ordered_json ScenarioOptions::to_json() const {
    nlohmann::ordered_json j;
    j["scenarios"] = nlohmann::ordered_json::array();
    for (auto k : scenarios) j["scenarios"].push_back(synth::to_string(k));
    j["runs"] = runs;
    j["seed"] = seed;
    j["dc_subsample"] = dc_subsample;
    j["iob_subsample"] = iob_subsample;
    j["iob_epochs"] = train.epochs;
    j["train"] = nn::to_json(train);
    j["content_decoder"] = nn::to_json(content_decoder);
    j["style_decoder"] = nn::to_json(style_decoder);
    return j;
}

ScenarioOptions default_scenario_options(const std::string& config_dir) {
    const std::filesystem::path dir(config_dir);
    ScenarioOptions o;
    o.content_decoder = nn::load_decoder_spec(dir / "decoders" / "teapot_content.json");
    o.style_decoder = nn::load_decoder_spec(dir / "decoders" / "teapot_style.json");
    o.train = nn::load_train_config(dir / "train.json");
    return o;
}

std::uint64_t representation_seed(std::uint64_t base_seed, std::size_t run) { return base_seed * 1000 + run; }

std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k > n) throw ConfigError("cannot draw " + std::to_string(k) + " of " + std::to_string(n) + " samples");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    CounterRng rng(seed, streams::kSubsample);
    for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

namespace {

using clock = std::chrono::steady_clock;

double seconds_since(clock::time_point t0) { return std::chrono::duration<double>(clock::now() - t0).count(); }

// Representations a run may need; the image matrix is slot kImages.
enum Rep : std::size_t { kContentGt, kContentRand, kStyleGt, kStyleRand, kStyleCorr, kImages, kRepCount };

Rep content_rep(ContentKind k) { return k == ContentKind::Gt ? kContentGt : kContentRand; }

Rep style_rep(StyleKind k) {
    switch (k) {
    case StyleKind::Gt: return kStyleGt;
    case StyleKind::Random: return kStyleRand;
    case StyleKind::Correlated: return kStyleCorr;
    }
    return kStyleGt;
}

bool is_content(Rep r) { return r == kContentGt || r == kContentRand; }

const char* rep_name(Rep r) {
    static const char* names[] = {"gt content", "random content", "gt style", "random style", "correlated style",
                                  "images"};
    return names[r];
}

struct RunState {
    std::uint64_t seed = 0;
    std::array<std::optional<Tensor>, kRepCount> reps;
    std::vector<std::size_t> dc_idx;
    std::vector<std::size_t> iob_idx;  // empty: all samples

    std::array<double, kRepCount> center_seconds{};
    std::map<std::pair<Rep, Rep>, double> dc;
    std::map<std::pair<Rep, Rep>, double> dc_seconds;

    std::array<std::vector<double>, kRepCount> z_errors;
    std::array<double, kRepCount> z_seconds{};
    std::vector<double> bias_errors[2];  // 0 content, 1 style
    double bias_seconds[2] = {0.0, 0.0};
};

// Runs tasks on `threads` workers; rethrows the first failure after all
// workers stop. Every task writes only to its own slots.
void run_tasks(const std::vector<std::function<void()>>& tasks, std::size_t threads) {
    if (threads <= 1) {
        for (const auto& t : tasks) t();
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex m;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            {
                std::lock_guard lock(m);
                if (failure) return;
            }
            try {
                tasks[i]();
            } catch (...) {
                std::lock_guard lock(m);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < std::min(threads, tasks.size()); ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

void require_roles(const SampleSet& dataset, const std::vector<ScenarioKind>& scenarios) {
    auto need = [&](Role role) {
        if (!dataset.get(role))
            throw ConfigError(std::string("dataset has no '") + to_string(role) + "' role, needed by the selected scenarios");
    };
    need(Role::Images);
    for (auto k : scenarios) {
        if (synth::content_kind(k) == ContentKind::Gt) need(Role::Contents);
        if (synth::style_kind(k) == StyleKind::Gt) need(Role::Styles);
        if (synth::style_kind(k) == StyleKind::Correlated) need(Role::Factors);
        if (synth::content_kind(k) == ContentKind::Random) need(Role::Contents);  // gives the content shape
    }
}

Tensor representation(const SampleSet& dataset, Rep r, std::uint64_t seed) {
    switch (r) {
    case kContentGt: return synth::scenario_content(dataset, ContentKind::Gt, seed);
    case kContentRand: return synth::scenario_content(dataset, ContentKind::Random, seed);
    case kStyleGt: return synth::scenario_style(dataset, StyleKind::Gt, seed);
    case kStyleRand: return synth::scenario_style(dataset, StyleKind::Random, seed);
    case kStyleCorr: return synth::scenario_style(dataset, StyleKind::Correlated, seed);
    default: return dataset.require(Role::Images);
    }
}

double safe_dcor(const CenteredDistanceMatrix& a, const CenteredDistanceMatrix& b) {
    try {
        return dcor(a, b).dcor;
    } catch (const DegenerateInput&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

} // namespace

MetricReport run_scenarios(const SampleSet& dataset, const ScenarioOptions& options) {
    options.validate();
    require_roles(dataset, options.scenarios);
    const auto total_start = clock::now();
    const std::size_t n = dataset.n();
    const std::size_t dc_n = options.dc_subsample == 0 ? n : std::min(options.dc_subsample, n);
    const std::size_t iob_n = options.iob_subsample == 0 ? n : std::min(options.iob_subsample, n);

    // Which representations and pairs the selected scenarios touch.
    std::array<bool, kRepCount> used{};
    used[kImages] = true;
    std::vector<std::pair<Rep, Rep>> pairs;
    auto add_pair = [&](Rep a, Rep b) {
        if (std::find(pairs.begin(), pairs.end(), std::pair{a, b}) == pairs.end()) pairs.emplace_back(a, b);
    };
    for (auto k : options.scenarios) {
        const Rep c = content_rep(synth::content_kind(k)), s = style_rep(synth::style_kind(k));
        used[c] = used[s] = true;
        add_pair(c, s);
        add_pair(kImages, c);
        add_pair(kImages, s);
    }
    const bool need_bias[2] = {used[kContentGt] || used[kContentRand],
                               used[kStyleGt] || used[kStyleRand] || used[kStyleCorr]};

    std::mutex log_mutex;
    auto log = [&](const std::string& msg) {
        if (!options.verbose) return;
        std::lock_guard lock(log_mutex);
        std::cerr << "[csdis] " << msg << std::endl;
    };

    std::vector<RunState> runs(options.runs);
    for (std::size_t r = 0; r < options.runs; ++r) {
        auto& st = runs[r];
        st.seed = representation_seed(options.seed, r);
        for (std::size_t k = 0; k < kRepCount; ++k)
            if (used[k]) st.reps[k] = representation(dataset, static_cast<Rep>(k), st.seed);
        st.dc_idx = dc_n == n ? std::vector<std::size_t>{} : subsample_indices(n, dc_n, st.seed);
        if (iob_n != n) st.iob_idx = subsample_indices(n, iob_n, hash_words(st.seed, streams::kSubsample));
    }

    // Decoder inputs must fit the representations.
    const Shape image_shape = dataset.require(Role::Images).sample_shape();
    for (std::size_t k = 0; k < kImages; ++k) {
        if (!used[k]) continue;
        const auto& spec = is_content(static_cast<Rep>(k)) ? options.content_decoder : options.style_decoder;
        make_iob_config(spec, options.train, 1).validate(runs[0].reps[k]->sample_shape(), image_shape);
    }

    std::vector<std::function<void()>> tasks;
    for (std::size_t r = 0; r < options.runs; ++r) {
        auto* st = &runs[r];
        // Distance correlations of run r; centred matrices live only inside the task.
        tasks.emplace_back([st, r, &used, &pairs, &log] {
            std::array<std::optional<CenteredDistanceMatrix>, kRepCount> centered;
            for (std::size_t k = 0; k < kRepCount; ++k) {
                if (!used[k]) continue;
                const auto t0 = clock::now();
                const Tensor& full = *st->reps[k];
                centered[k] = centered_distances(stack_batch(st->dc_idx.empty() ? full : gather(full, st->dc_idx)));
                st->center_seconds[k] = seconds_since(t0);
            }
            for (const auto& [a, b] : pairs) {
                const auto t0 = clock::now();
                st->dc[{a, b}] = safe_dcor(*centered[a], *centered[b]);
                st->dc_seconds[{a, b}] = seconds_since(t0);
            }
            log("run " + std::to_string(r) + ": distance correlations done");
        });
    }

    const auto image_buffer = nn::SampleBuffer::from_batch(dataset.require(Role::Images));
    std::vector<nn::SampleBuffer> iob_images(options.runs);
    for (std::size_t r = 0; r < options.runs; ++r)
        if (!runs[r].iob_idx.empty())
            iob_images[r] = nn::SampleBuffer::from_batch(gather(dataset.require(Role::Images), runs[r].iob_idx));
    auto images_for = [&](std::size_t r) -> const nn::SampleBuffer& {
        return runs[r].iob_idx.empty() ? image_buffer : iob_images[r];
    };

    for (std::size_t r = 0; r < options.runs; ++r) {
        auto* st = &runs[r];
        auto train = options.train;
        train.seed = st->seed;
        for (std::size_t k = 0; k < kImages; ++k) {
            if (!used[k]) continue;
            const auto rep = static_cast<Rep>(k);
            const auto* spec = is_content(rep) ? &options.content_decoder : &options.style_decoder;
            tasks.emplace_back([st, r, rep, spec, train, &images_for, &log] {
                const auto t0 = clock::now();
                const Tensor& full = *st->reps[rep];
                const auto latents = nn::SampleBuffer::from_batch(st->iob_idx.empty() ? full : gather(full, st->iob_idx));
                st->z_errors[rep] = latent_reconstruction_errors(images_for(r), latents, *spec, train);
                st->z_seconds[rep] = seconds_since(t0);
                log("run " + std::to_string(r) + ": decoder for " + rep_name(rep) + " trained (" +
                    std::to_string(st->z_seconds[rep]) + " s)");
            });
        }
        for (int role = 0; role < 2; ++role) {
            if (!need_bias[role]) continue;
            const auto* spec = role == 0 ? &options.content_decoder : &options.style_decoder;
            auto bias_train = train;
            bias_train.seed = bias_seed(train.seed);
            tasks.emplace_back([st, r, role, spec, bias_train, &images_for, &log] {
                const auto t0 = clock::now();
                st->bias_errors[role] = bias_reconstruction_errors(images_for(r), spec->input_shape, *spec, bias_train);
                st->bias_seconds[role] = seconds_since(t0);
                log("run " + std::to_string(r) + ": bias decoder (" + (role == 0 ? "content" : "style") + ") trained");
            });
        }
    }
    run_tasks(tasks, options.threads);

    MetricReport report;
    report.tool_version = CSDIS_VERSION;
    report.dataset_digest = sample_set_digest(dataset);
    report.config = options.to_json();
    {
        Fnv1a64 h;
        h.update(report.config.dump());
        report.config_hash = h.hex();
    }

    auto mean_of = [](const std::vector<double>& v) {
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };

    for (auto kind : options.scenarios) {
        const Rep c = content_rep(synth::content_kind(kind)), s = style_rep(synth::style_kind(kind));
        ScenarioReport row;
        row.kind = kind;
        row.n = iob_n;
        row.dc_n = dc_n;
        row.runs = options.runs;
        row.config_hash = report.config_hash;
        std::vector<double> cs, ic, is, iob_c, iob_s;
        auto& sec = row.seconds;
        for (const auto& st : runs) {
            row.seeds.push_back(st.seed);
            cs.push_back(st.dc.at({c, s}));
            ic.push_back(st.dc.at({kImages, c}));
            is.push_back(st.dc.at({kImages, s}));
            iob_c.push_back(iob_ratio(st.bias_errors[0], st.z_errors[c], kIobEpsilon));
            iob_s.push_back(iob_ratio(st.bias_errors[1], st.z_errors[s], kIobEpsilon));
            row.iob_ic_mse_bias.push_back(mean_of(st.bias_errors[0]));
            row.iob_ic_mse_z.push_back(mean_of(st.z_errors[c]));
            row.iob_is_mse_bias.push_back(mean_of(st.bias_errors[1]));
            row.iob_is_mse_z.push_back(mean_of(st.z_errors[s]));
            sec[0] += st.center_seconds[c] + st.center_seconds[s] + st.dc_seconds.at({c, s});
            sec[1] += st.center_seconds[kImages] + st.center_seconds[c] + st.dc_seconds.at({kImages, c});
            sec[2] += st.center_seconds[kImages] + st.center_seconds[s] + st.dc_seconds.at({kImages, s});
            sec[3] += st.z_seconds[c] + st.bias_seconds[0];
            sec[4] += st.z_seconds[s] + st.bias_seconds[1];
        }
        row.dc_cs = Stat::from_runs(cs);
        row.dc_ic = Stat::from_runs(ic);
        row.dc_is = Stat::from_runs(is);
        row.iob_ic = Stat::from_runs(iob_c);
        row.iob_is = Stat::from_runs(iob_s);
        report.scenarios.push_back(std::move(row));
    }
    report.total_seconds = seconds_since(total_start);
    return report;
}

} // namespace csdis::harness
