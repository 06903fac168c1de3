#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csdis/harness/report.hpp"
#include "csdis/nn/spec.hpp"
#include "csdis/synth.hpp"
#include "csdis/tensor.hpp"

namespace csdis::harness {

inline constexpr std::size_t kDefaultDcSubsample = 2048;

struct ScenarioOptions {
    std::vector<synth::ScenarioKind> scenarios{synth::kAllScenarios.begin(), synth::kAllScenarios.end()};
    std::size_t runs = 3;
    std::uint64_t seed = 0;
    std::size_t dc_subsample = kDefaultDcSubsample;  // 0 = all samples
    std::size_t iob_subsample = 0;                   // 0 = all samples
    nn::DecoderSpec content_decoder;
    nn::DecoderSpec style_decoder;
    nn::TrainConfig train;  // epochs here is the IOB epoch count
    std::size_t threads = 1;
    bool verbose = false;

    void validate() const;
    nlohmann::ordered_json to_json() const;
};

// Decoders and training setup shipped under configs/.
ScenarioOptions default_scenario_options(const std::string& config_dir);

// Representation seed of a run.
std::uint64_t representation_seed(std::uint64_t base_seed, std::size_t run);

// Sorted subset of k distinct indices out of n, a pure function of seed.
std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t k, std::uint64_t seed);

// For each run: draw the random representations, compute dcor(C,s),
// dcor(I,C), dcor(I,s) on the DC subsample and IOB(I,C), IOB(I,s) with
// freshly trained decoders; aggregate per scenario. Work shared between
// scenarios (distance matrices, decoders of one representation) is computed
// once per run. Results do not depend on the thread count.
MetricReport run_scenarios(const SampleSet& dataset, const ScenarioOptions& options);

} // namespace csdis::harness
