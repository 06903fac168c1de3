#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "csdis/tensor.hpp"

namespace csdis::nn {

using csdis::to_string;

enum class LayerKind { Conv2d, Deconv2d, FullyConnected, InstanceNorm, LeakyRelu, Tanh, Flatten, Reshape };

const char* to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

inline constexpr double kDefaultLeakySlope = 0.2;
inline constexpr double kInstanceNormEps = 1e-5;

struct LayerSpec {
    LayerKind kind = LayerKind::Tanh;
    std::size_t out_channels = 0;  // conv2d, deconv2d
    std::size_t kernel_h = 0, kernel_w = 0;
    std::size_t stride = 1;
    std::size_t padding = 0;
    std::size_t out_features = 0;  // fully_connected
    double negative_slope = kDefaultLeakySlope;
    Shape target_shape;            // reshape

    static LayerSpec conv2d(std::size_t out, std::size_t k, std::size_t s, std::size_t p);
    static LayerSpec deconv2d(std::size_t out, std::size_t k, std::size_t s, std::size_t p);
    static LayerSpec fully_connected(std::size_t out);
    static LayerSpec instance_norm();
    static LayerSpec leaky_relu(double slope = kDefaultLeakySlope);
    static LayerSpec tanh();
    static LayerSpec flatten();
    static LayerSpec reshape(Shape target);
};

struct DecoderSpec {
    std::string name;
    Shape input_shape;
    std::vector<LayerSpec> layers;
    Shape expected_output_shape;
};

// Output shape of every layer, in order. Throws SpecError naming the first
// layer whose parameters or input shape do not fit, or ConfigError when the
// chain does not end at expected_output_shape.
std::vector<Shape> infer_shapes(const DecoderSpec& spec);

Shape layer_output_shape(const LayerSpec& layer, const Shape& in, std::size_t index);

struct TrainConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    std::size_t epochs = 40;
    std::size_t batch_size = 10;
    std::uint64_t seed = 0;
    double adam_epsilon = 1e-8;

    void validate() const;
};

nlohmann::json to_json(const LayerSpec& layer);
nlohmann::json to_json(const DecoderSpec& spec);
nlohmann::json to_json(const TrainConfig& config);

LayerSpec layer_spec_from_json(const nlohmann::json& j);
DecoderSpec decoder_spec_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);

DecoderSpec load_decoder_spec(const std::filesystem::path& path);
TrainConfig load_train_config(const std::filesystem::path& path);

} // namespace csdis::nn
