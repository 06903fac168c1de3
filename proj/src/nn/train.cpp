#include "csdis/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "csdis/errors.hpp"
#include "csdis/rng.hpp"

namespace csdis::nn {

SampleBuffer SampleBuffer::from_batch(const Tensor& batch) {
    SampleBuffer b;
    b.n = batch.shape()[0];
    b.sample_shape = batch.rank() == 1 ? Shape{1} : batch.sample_shape();
    b.values.assign(batch.data().begin(), batch.data().end());
    return b;
}

SampleBuffer SampleBuffer::repeated(const Tensor& sample, std::size_t n) {
    SampleBuffer b;
    b.n = n;
    b.sample_shape = sample.shape();
    b.values.reserve(n * sample.size());
    for (std::size_t i = 0; i < n; ++i) b.values.insert(b.values.end(), sample.data().begin(), sample.data().end());
    return b;
}

bool SampleBuffer::all_samples_identical() const {
    const auto first = sample(0);
    for (std::size_t i = 1; i < n; ++i) {
        auto s = sample(i);
        if (std::memcmp(s.data(), first.data(), first.size_bytes()) != 0) return false;
    }
    return true;
}

double mse_loss(std::span<const float> output, std::span<const float> target) {
    double sum = 0.0;
    for (std::size_t i = 0; i < output.size(); ++i) {
        const double d = static_cast<double>(output[i]) - target[i];
        sum += d * d;
    }
    return sum / static_cast<double>(output.size());
}

void mse_gradient(std::span<const float> output, std::span<const float> target, std::span<float> grad) {
    if (output.size() != target.size() || grad.size() != output.size())
        throw ShapeError("mse_gradient: output, target and gradient sizes differ");
    const double scale = 2.0 / static_cast<double>(output.size());
    for (std::size_t k = 0; k < output.size(); ++k)
        grad[k] = static_cast<float>(scale * (static_cast<double>(output[k]) - target[k]));
}

namespace {

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    CounterRng rng(hash_words(seed, epoch), streams::kShuffle);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    return perm;
}

void gather_into(const SampleBuffer& src, std::span<const std::size_t> idx, std::vector<float>& dst) {
    const auto n = src.sample_size();
    dst.resize(idx.size() * n);
    for (std::size_t k = 0; k < idx.size(); ++k) std::copy_n(src.sample(idx[k]).data(), n, dst.data() + k * n);
}

double full_set_mse(Decoder<float>& model, const SampleBuffer& inputs, const SampleBuffer& targets) {
    const auto errors = per_sample_mse(model, inputs, targets);
    // per_sample_mse sums channels; divide them back out for the loss scale
    const double channels = static_cast<double>(targets.sample_shape[0]);
    double sum = 0.0;
    for (double e : errors) sum += e;
    return targets.sample_shape.size() == 3 ? sum / (static_cast<double>(errors.size()) * channels)
                                            : sum / static_cast<double>(errors.size());
}

} // namespace

TrainResult train_decoder(const DecoderSpec& spec, const SampleBuffer& inputs, const SampleBuffer& targets,
                          const TrainConfig& config, bool evaluate) {
    config.validate();
    if (inputs.n != targets.n)
        throw ShapeError("inputs hold " + std::to_string(inputs.n) + " samples, targets " + std::to_string(targets.n));
    if (inputs.n == 0) throw ShapeError("empty training set");
    if (inputs.sample_shape != spec.input_shape)
        throw ShapeError("input samples " + to_string(inputs.sample_shape) + " do not match decoder input " +
                         to_string(spec.input_shape));

    TrainResult result{Decoder<float>(spec, config.seed), 0.0, 0.0, {}, {}};
    auto& model = result.model;
    if (targets.sample_shape != model.shapes().back())
        throw ShapeError("target samples " + to_string(targets.sample_shape) + " do not match decoder output " +
                         to_string(model.shapes().back()));

    const bool shared_input = inputs.all_samples_identical();
    const auto out_size = targets.sample_size();
    if (evaluate) result.initial_mse = full_set_mse(model, inputs, targets);

    std::vector<float> batch_in, batch_target, grad(out_size * config.batch_size);
    std::vector<double> mean_target(out_size);
    std::uint64_t step = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto perm = shuffled(inputs.n, config.seed, epoch);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < inputs.n; start += config.batch_size) {
            const auto count = std::min(config.batch_size, inputs.n - start);
            const std::span<const std::size_t> idx(perm.data() + start, count);
            ++step;
            try {
                gather_into(targets, idx, batch_target);
                double loss = 0.0;
                if (shared_input) {
                    // loss = mean_b ‖y − t_b‖²/M has gradient 2(y − t̄)/M
                    std::fill(mean_target.begin(), mean_target.end(), 0.0);
                    for (std::size_t b = 0; b < count; ++b)
                        for (std::size_t k = 0; k < out_size; ++k) mean_target[k] += batch_target[b * out_size + k];
                    const auto out = model.forward(inputs.sample(0), 1);
                    grad.resize(out_size);
                    for (std::size_t k = 0; k < out_size; ++k) {
                        const double t = mean_target[k] / static_cast<double>(count);
                        grad[k] = static_cast<float>(2.0 * (out[k] - t) / static_cast<double>(out_size));
                    }
                    for (std::size_t b = 0; b < count; ++b)
                        loss += mse_loss(out, std::span<const float>(batch_target).subspan(b * out_size, out_size));
                    loss /= static_cast<double>(count);
                } else {
                    gather_into(inputs, idx, batch_in);
                    const auto out = model.forward(batch_in, count);
                    loss = mse_loss(out, batch_target);
                    grad.resize(out.size());
                    mse_gradient(out, batch_target, grad);
                }
                if (!std::isfinite(loss)) throw NumericalError("non-finite loss");
                model.backward(grad);
                model.adam_step(config, step);
                loss_sum += loss;
                ++batches;
            } catch (const NumericalError& e) {
                throw NumericalError("training step " + std::to_string(step) + ": " + e.what());
            }
        }
        result.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
        result.epoch_hashes.push_back(model.parameter_hash());
    }
    if (evaluate) result.final_mse = full_set_mse(model, inputs, targets);
    return result;
}

std::vector<double> per_sample_mse(Decoder<float>& model, const SampleBuffer& inputs, const SampleBuffer& targets,
                                   std::size_t batch_size) {
    if (inputs.n != targets.n) throw ShapeError("inputs and targets differ in sample count");
    const auto& shape = targets.sample_shape;
    const std::size_t pixels = shape.size() == 3 ? shape[1] * shape[2] : numel(shape);
    const auto out_size = targets.sample_size();
    std::vector<double> errors(inputs.n);

    auto score = [&](std::span<const float> out, std::size_t sample) {
        const auto target = targets.sample(sample);
        double sum = 0.0;
        for (std::size_t k = 0; k < out_size; ++k) {
            const double d = static_cast<double>(out[k]) - target[k];
            sum += d * d;
        }
        errors[sample] = sum / static_cast<double>(pixels);
    };

    if (inputs.all_samples_identical()) {
        const auto out = model.forward(inputs.sample(0), 1);
        for (std::size_t i = 0; i < inputs.n; ++i) score(out, i);
        return errors;
    }
    std::vector<float> batch_in;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < inputs.n; start += batch_size) {
        const auto count = std::min(batch_size, inputs.n - start);
        idx.resize(count);
        std::iota(idx.begin(), idx.end(), start);
        gather_into(inputs, idx, batch_in);
        const auto out = model.forward(batch_in, count);
        for (std::size_t b = 0; b < count; ++b)
            score(std::span<const float>(out).subspan(b * out_size, out_size), start + b);
    }
    return errors;
}

} // namespace csdis::nn
