#include "csdis/iob.hpp"

#include <cmath>
#include <numeric>

#include "csdis/dcor.hpp"
#include "csdis/errors.hpp"
#include "csdis/rng.hpp"

namespace csdis {

void IobConfig::validate(const Shape& latent_shape, const Shape& image_shape) const {
    if (runs < 1) throw ConfigError("IOB runs must be >= 1");
    if (!(epsilon > 0.0)) throw ConfigError("IOB epsilon must be > 0");
    train.validate();
    for (const auto* spec : {&decoder_z, &decoder_bias}) {
        const auto shapes = nn::infer_shapes(*spec);
        if (spec->input_shape != latent_shape)
            throw ShapeError("decoder '" + spec->name + "' takes " + to_string(spec->input_shape) + " but latents are " +
                             to_string(latent_shape));
        if (shapes.back() != image_shape)
            throw ShapeError("decoder '" + spec->name + "' produces " + to_string(shapes.back()) + " but images are " +
                             to_string(image_shape));
    }
}

IobConfig make_iob_config(const nn::DecoderSpec& decoder, const nn::TrainConfig& train, std::size_t runs) {
    IobConfig cfg;
    cfg.decoder_z = decoder;
    cfg.decoder_bias = decoder;
    cfg.train = train;
    cfg.runs = runs;
    return cfg;
}

Tensor make_bias_input(const Shape& latent_shape) { return Tensor::filled(latent_shape, 1.0, DType::Float32); }

std::vector<double> bias_reconstruction_errors(const nn::SampleBuffer& images, const Shape& latent_shape,
                                               const nn::DecoderSpec& spec, const nn::TrainConfig& train) {
    const auto ones = nn::SampleBuffer::repeated(make_bias_input(latent_shape), images.n);
    auto trained = nn::train_decoder(spec, ones, images, train, false);
    return nn::per_sample_mse(trained.model, ones, images);
}

std::vector<double> latent_reconstruction_errors(const nn::SampleBuffer& images, const nn::SampleBuffer& latents,
                                                 const nn::DecoderSpec& spec, const nn::TrainConfig& train) {
    auto trained = nn::train_decoder(spec, latents, images, train, false);
    return nn::per_sample_mse(trained.model, latents, images);
}

double iob_ratio(const std::vector<double>& bias_mse, const std::vector<double>& z_mse, double epsilon) {
    if (bias_mse.size() != z_mse.size() || bias_mse.empty()) throw ShapeError("per-image error lists differ in length");
    double sum = 0.0;
    for (std::size_t i = 0; i < bias_mse.size(); ++i) sum += bias_mse[i] / (z_mse[i] + epsilon);
    const double iob = sum / static_cast<double>(bias_mse.size());
    if (!std::isfinite(iob) || !(iob > 0.0)) throw NumericalError("IOB ratio is not a positive finite number");
    return iob;
}

std::uint64_t run_seed(const nn::TrainConfig& train, std::size_t run) { return train.seed + run; }

std::uint64_t bias_seed(std::uint64_t seed) { return hash_words(seed, streams::kBiasDecoder); }

namespace {

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace

IobResult summarize_runs(std::vector<double> per_run, const std::vector<double>& mse_bias,
                         const std::vector<double>& mse_z) {
    IobResult r;
    r.mean = mean_of(per_run);
    double sq = 0.0;
    for (double v : per_run) sq += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(sq / static_cast<double>(per_run.size()));
    r.per_run = std::move(per_run);
    r.mse_bias_mean = mean_of(mse_bias);
    r.mse_z_mean = mean_of(mse_z);
    return r;
}

IobResult compute_iob(const Tensor& images, const Tensor& latents, const IobConfig& cfg) {
    if (images.shape()[0] != latents.shape()[0])
        throw ShapeError("images hold " + std::to_string(images.shape()[0]) + " samples, latents " +
                         std::to_string(latents.shape()[0]));
    const auto image_buf = nn::SampleBuffer::from_batch(images);
    const auto latent_buf = nn::SampleBuffer::from_batch(latents);
    cfg.validate(latent_buf.sample_shape, image_buf.sample_shape);

    std::vector<double> per_run, mse_bias, mse_z;
    for (std::size_t r = 0; r < cfg.runs; ++r) {
        auto train = cfg.train;
        train.seed = run_seed(cfg.train, r);
        const auto z_err = latent_reconstruction_errors(image_buf, latent_buf, cfg.decoder_z, train);
        train.seed = bias_seed(train.seed);
        const auto bias_err = bias_reconstruction_errors(image_buf, latent_buf.sample_shape, cfg.decoder_bias, train);
        per_run.push_back(iob_ratio(bias_err, z_err, cfg.epsilon));
        mse_bias.push_back(mean_of(bias_err));
        mse_z.push_back(mean_of(z_err));
    }
    return summarize_runs(std::move(per_run), mse_bias, mse_z);
}

IobPairReport iob_pair_report(const SampleSet& set, const IobConfig& cfg_content, const IobConfig& cfg_style) {
    const auto& images = set.require(Role::Images);
    const auto& contents = set.require(Role::Contents);
    const auto& styles = set.require(Role::Styles);

    IobPairReport report;
    try {
        report.dcor_cs = dcor(stack_batch(contents), stack_batch(styles)).dcor;
    } catch (const DegenerateInput&) {
        report.dcor_cs.reset();
    }
    report.content = compute_iob(images, contents, cfg_content);
    report.style = compute_iob(images, styles, cfg_style);
    const bool uncorrelated = !report.dcor_cs || *report.dcor_cs <= kUncorrelatedDcor;
    const bool uninformative = report.content.mean <= kUninformativeIob || report.style.mean <= kUninformativeIob;
    report.posterior_collapse = uncorrelated && uninformative;
    return report;
}

} // namespace csdis
