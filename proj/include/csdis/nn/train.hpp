#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "csdis/nn/decoder.hpp"
#include "csdis/tensor.hpp"

namespace csdis::nn {

// Samples stored back to back in float32, the training precision.
struct SampleBuffer {
    Shape sample_shape;
    std::size_t n = 0;
    std::vector<float> values;

    static SampleBuffer from_batch(const Tensor& batch);
    // n copies of one sample.
    static SampleBuffer repeated(const Tensor& sample, std::size_t n);

    std::size_t sample_size() const { return numel(sample_shape); }
    std::span<const float> sample(std::size_t i) const {
        return std::span<const float>(values).subspan(i * sample_size(), sample_size());
    }
    bool all_samples_identical() const;
};

struct TrainResult {
    Decoder<float> model;
    double initial_mse = 0.0;
    double final_mse = 0.0;
    std::vector<double> epoch_loss;           // mean minibatch loss per epoch
    std::vector<std::uint64_t> epoch_hashes;  // parameter hash after each epoch
};

// Mean over samples, channels and pixels of the squared error.
double mse_loss(std::span<const float> output, std::span<const float> target);
// d(mse_loss)/d(output): 2(y − t)/M over all M values.
void mse_gradient(std::span<const float> output, std::span<const float> target, std::span<float> grad);

// Trains with Adam on shuffled minibatches, epochs × ceil(N / batch) steps.
// The shuffle and the weight initialisation are both seeded by config.seed.
// When every input sample is identical (the bias decoder) each step runs one
// forward/backward against the minibatch mean target, which yields the same
// gradient as the full minibatch. With evaluate false, initial_mse and
// final_mse are left at zero and the two full-set passes are skipped.
TrainResult train_decoder(const DecoderSpec& spec, const SampleBuffer& inputs, const SampleBuffer& targets,
                          const TrainConfig& config, bool evaluate = true);

// Per-sample reconstruction error (1/K)·Σ_k ‖I^k − Ĩ^k‖² where k runs over the
// K pixels and ‖·‖ is the norm of the channel vector at that pixel.
std::vector<double> per_sample_mse(Decoder<float>& model, const SampleBuffer& inputs, const SampleBuffer& targets,
                                   std::size_t batch_size = 32);

} // namespace csdis::nn
