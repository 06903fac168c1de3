#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "csdis/nn/spec.hpp"
#include "csdis/nn/train.hpp"
#include "csdis/tensor.hpp"

namespace csdis {

inline constexpr double kIobEpsilon = 1e-8;
inline constexpr std::size_t kDefaultRuns = 3;
// Below this IOB a representation is treated as uninformative.
inline constexpr double kUninformativeIob = 1.2;
// Below this distance correlation a content/style pair is treated as uncorrelated.
inline constexpr double kUncorrelatedDcor = 0.1;

struct IobConfig {
    nn::DecoderSpec decoder_z;
    nn::DecoderSpec decoder_bias;  // same architecture, fed the constant tensor
    nn::TrainConfig train;
    std::size_t runs = kDefaultRuns;
    double epsilon = kIobEpsilon;

    // Checks both decoders map the latent shape onto the image shape.
    void validate(const Shape& latent_shape, const Shape& image_shape) const;
};

IobConfig make_iob_config(const nn::DecoderSpec& decoder, const nn::TrainConfig& train,
                          std::size_t runs = kDefaultRuns);

struct IobResult {
    double mean = 0.0;
    double std = 0.0;  // population std over runs
    std::vector<double> per_run;
    double mse_bias_mean = 0.0;
    double mse_z_mean = 0.0;
};

// The uninformative input: a tensor of ones shaped like one latent.
Tensor make_bias_input(const Shape& latent_shape);

// Per-image MSE of a bias decoder trained on (𝟙 → I).
std::vector<double> bias_reconstruction_errors(const nn::SampleBuffer& images, const Shape& latent_shape,
                                               const nn::DecoderSpec& spec, const nn::TrainConfig& train);

// Per-image MSE of a decoder trained on (z_i → I_i).
std::vector<double> latent_reconstruction_errors(const nn::SampleBuffer& images, const nn::SampleBuffer& latents,
                                                 const nn::DecoderSpec& spec, const nn::TrainConfig& train);

// mean_i bias_i / (z_i + ε)
double iob_ratio(const std::vector<double>& bias_mse, const std::vector<double>& z_mse, double epsilon);

// Seeds for run r: decoder z uses train.seed + r; the bias decoder uses a
// stream derived from the same value so the two initialisations differ.
std::uint64_t run_seed(const nn::TrainConfig& train, std::size_t run);
std::uint64_t bias_seed(std::uint64_t run_seed);

// images: (N, C, H, W); latents: (N, ...) matching cfg.decoder_z input.
IobResult compute_iob(const Tensor& images, const Tensor& latents, const IobConfig& cfg);

IobResult summarize_runs(std::vector<double> per_run, const std::vector<double>& mse_bias,
                         const std::vector<double>& mse_z);

struct IobPairReport {
    IobResult content;
    IobResult style;
    std::optional<double> dcor_cs;  // empty when one side is constant
    bool posterior_collapse = false;
};

// IOB(I,C) and IOB(I,s), flagged as collapse when either is at most 1.2 while
// the pair looks disentangled (dcor(C,s) ≤ 0.1, or one side constant).
IobPairReport iob_pair_report(const SampleSet& set, const IobConfig& cfg_content, const IobConfig& cfg_style);

} // namespace csdis
