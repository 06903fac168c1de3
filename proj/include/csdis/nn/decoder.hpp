#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "csdis/nn/spec.hpp"

namespace csdis::nn {

// Stride-1 convolutions with at most this many (in, out) channel pairs use
// direct loops instead of im2col + GEMM.
inline constexpr std::size_t kDirectConvMaxChannelPairs = 64;

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// A trainable buffer with its gradient and Adam moments.
template <typename T>
struct Parameter {
    std::string name;
    Mat<T> value, grad, adam_m, adam_v;

    void resize(Eigen::Index rows, Eigen::Index cols);
};

// Activations travel between layers in channel-major batch layout: a
// (C × B·S) matrix where S is the per-channel spatial size (H·W, or 1 for
// flat feature vectors). Convolutions over a whole minibatch then become a
// single GEMM.
template <typename T>
class Layer {
public:
    virtual ~Layer() = default;

    virtual void forward(const Mat<T>& in, Mat<T>& out, std::size_t batch) = 0;
    // Accumulates parameter gradients; writes the input gradient when
    // grad_in is non-null.
    virtual void backward(const Mat<T>& in, const Mat<T>& out, const Mat<T>& grad_out, Mat<T>* grad_in,
                          std::size_t batch) = 0;
    virtual std::vector<Parameter<T>*> parameters() { return {}; }
};

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, const Shape& in, const Shape& out);

// Sample-major (B × numel) <-> channel-major batch layout for a sample shape.
template <typename T>
Mat<T> to_channel_major(std::span<const T> samples, const Shape& sample_shape, std::size_t batch);
template <typename T>
void from_channel_major(const Mat<T>& m, const Shape& sample_shape, std::size_t batch, std::span<T> out);

// A decoder G_θ built from a DecoderSpec. Owns parameters, Adam state and
// the activations of the last forward pass.
template <typename T>
class Decoder {
public:
    Decoder(DecoderSpec spec, std::uint64_t init_seed);

    const DecoderSpec& spec() const noexcept { return spec_; }
    const std::vector<Shape>& shapes() const noexcept { return shapes_; }
    std::size_t input_size() const { return numel(spec_.input_shape); }
    std::size_t output_size() const { return numel(shapes_.back()); }

    // input holds `batch` samples back to back; returns outputs the same way.
    // Throws NumericalError naming the layer if a non-finite value appears.
    std::vector<T> forward(std::span<const T> input, std::size_t batch);

    // Backpropagates d(loss)/d(output) through the last forward pass and
    // overwrites every parameter gradient. Returns d(loss)/d(input) when
    // want_input_grad is set, otherwise an empty vector.
    std::vector<T> backward(std::span<const T> grad_output, bool want_input_grad = false);

    std::vector<Parameter<T>*> parameters();
    std::size_t parameter_count();

    // Adam with bias correction; step is 1-based.
    void adam_step(const TrainConfig& config, std::uint64_t step);

    // FNV-1a over the raw bytes of every parameter value.
    std::uint64_t parameter_hash();

private:
    DecoderSpec spec_;
    std::vector<Shape> shapes_;
    std::vector<std::unique_ptr<Layer<T>>> layers_;
    std::vector<Mat<T>> activations_;
    std::vector<Mat<T>> grads_;
    std::size_t batch_ = 0;
};

extern template class Decoder<float>;
extern template class Decoder<double>;

} // namespace csdis::nn
