#include "csdis/nn/spec.hpp"

#include <cmath>
#include <fstream>

#include "csdis/errors.hpp"

namespace csdis::nn {

namespace {

struct KindName {
    LayerKind kind;
    const char* name;
};

constexpr KindName kKindNames[] = {
    {LayerKind::Conv2d, "conv2d"},
    {LayerKind::Deconv2d, "deconv2d"},
    {LayerKind::FullyConnected, "fully_connected"},
    {LayerKind::InstanceNorm, "instance_norm"},
    {LayerKind::LeakyRelu, "leaky_relu"},
    {LayerKind::Tanh, "tanh"},
    {LayerKind::Flatten, "flatten"},
    {LayerKind::Reshape, "reshape"},
};

bool is_spatial_conv(LayerKind k) { return k == LayerKind::Conv2d || k == LayerKind::Deconv2d; }

} // namespace

const char* to_string(LayerKind kind) {
    for (const auto& kn : kKindNames)
        if (kn.kind == kind) return kn.name;
    return "unknown";
}

LayerKind layer_kind_from_string(const std::string& name) {
    for (const auto& kn : kKindNames)
        if (name == kn.name) return kn.kind;
    throw ConfigError("unknown layer kind '" + name + "'");
}

LayerSpec LayerSpec::conv2d(std::size_t out, std::size_t k, std::size_t s, std::size_t p) {
    LayerSpec l;
    l.kind = LayerKind::Conv2d;
    l.out_channels = out;
    l.kernel_h = l.kernel_w = k;
    l.stride = s;
    l.padding = p;
    return l;
}

LayerSpec LayerSpec::deconv2d(std::size_t out, std::size_t k, std::size_t s, std::size_t p) {
    auto l = conv2d(out, k, s, p);
    l.kind = LayerKind::Deconv2d;
    return l;
}

LayerSpec LayerSpec::fully_connected(std::size_t out) {
    LayerSpec l;
    l.kind = LayerKind::FullyConnected;
    l.out_features = out;
    return l;
}

LayerSpec LayerSpec::instance_norm() {
    LayerSpec l;
    l.kind = LayerKind::InstanceNorm;
    return l;
}

LayerSpec LayerSpec::leaky_relu(double slope) {
    LayerSpec l;
    l.kind = LayerKind::LeakyRelu;
    l.negative_slope = slope;
    return l;
}

LayerSpec LayerSpec::tanh() { return LayerSpec{}; }

LayerSpec LayerSpec::flatten() {
    LayerSpec l;
    l.kind = LayerKind::Flatten;
    return l;
}

LayerSpec LayerSpec::reshape(Shape target) {
    LayerSpec l;
    l.kind = LayerKind::Reshape;
    l.target_shape = std::move(target);
    return l;
}

namespace {

[[noreturn]] void fail_layer(const LayerSpec& layer, const Shape& in, std::size_t index, const std::string& what) {
    throw SpecError(index, std::string(to_string(layer.kind)) + " on input " + to_string(in) + ": " + what);
}

} // namespace

Shape layer_output_shape(const LayerSpec& layer, const Shape& in, std::size_t index) {
    if (is_spatial_conv(layer.kind)) {
        if (in.size() != 3) fail_layer(layer, in, index, "needs a (C,H,W) input");
        if (layer.out_channels == 0 || layer.kernel_h == 0 || layer.kernel_w == 0)
            fail_layer(layer, in, index, "out_channels and kernel must be positive");
        if (layer.stride == 0) fail_layer(layer, in, index, "stride must be >= 1");
        const auto s = static_cast<long long>(layer.stride);
        const auto p = static_cast<long long>(layer.padding);
        const auto h = static_cast<long long>(in[1]);
        const auto w = static_cast<long long>(in[2]);
        const auto kh = static_cast<long long>(layer.kernel_h);
        const auto kw = static_cast<long long>(layer.kernel_w);
        long long oh, ow;
        if (layer.kind == LayerKind::Conv2d) {
            if (h + 2 * p < kh || w + 2 * p < kw) fail_layer(layer, in, index, "kernel larger than padded input");
            oh = (h + 2 * p - kh) / s + 1;
            ow = (w + 2 * p - kw) / s + 1;
        } else {
            oh = (h - 1) * s - 2 * p + kh;
            ow = (w - 1) * s - 2 * p + kw;
        }
        if (oh < 1 || ow < 1) fail_layer(layer, in, index, "output would be empty");
        return {layer.out_channels, static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)};
    }
    switch (layer.kind) {
    case LayerKind::FullyConnected:
        if (in.size() != 1) fail_layer(layer, in, index, "needs a flat (F) input; insert flatten first");
        if (layer.out_features == 0) fail_layer(layer, in, index, "out_features must be positive");
        return {layer.out_features};
    case LayerKind::InstanceNorm:
        if (in.size() != 3) fail_layer(layer, in, index, "needs a (C,H,W) input");
        return in;
    case LayerKind::LeakyRelu:
        if (!(layer.negative_slope >= 0.0) || !std::isfinite(layer.negative_slope))
            fail_layer(layer, in, index, "negative_slope must be finite and >= 0");
        return in;
    case LayerKind::Tanh: return in;
    case LayerKind::Flatten: return {numel(in)};
    case LayerKind::Reshape:
        if (layer.target_shape.empty()) fail_layer(layer, in, index, "target_shape is empty");
        for (auto d : layer.target_shape)
            if (d == 0) fail_layer(layer, in, index, "target_shape has a zero dimension");
        if (numel(layer.target_shape) != numel(in))
            fail_layer(layer, in, index, "target " + to_string(layer.target_shape) + " has a different element count");
        return layer.target_shape;
    default: break;
    }
    fail_layer(layer, in, index, "unsupported layer");
}

std::vector<Shape> infer_shapes(const DecoderSpec& spec) {
    if (spec.input_shape.empty()) throw ConfigError("decoder '" + spec.name + "' has no input_shape");
    for (auto d : spec.input_shape)
        if (d == 0) throw ConfigError("decoder '" + spec.name + "' input_shape has a zero dimension");
    if (spec.layers.empty()) throw ConfigError("decoder '" + spec.name + "' has no layers");
    std::vector<Shape> shapes;
    shapes.reserve(spec.layers.size());
    Shape current = spec.input_shape;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        current = layer_output_shape(spec.layers[i], current, i);
        shapes.push_back(current);
    }
    if (!spec.expected_output_shape.empty() && current != spec.expected_output_shape)
        throw SpecError(spec.layers.size() - 1, "chain ends at " + to_string(current) + ", expected " +
                                                    to_string(spec.expected_output_shape));
    return shapes;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must be in [0,1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in [0,1)");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(adam_epsilon > 0.0)) throw ConfigError("adam_epsilon must be > 0");
}

nlohmann::json to_json(const LayerSpec& l) {
    nlohmann::json j;
    j["kind"] = to_string(l.kind);
    switch (l.kind) {
    case LayerKind::Conv2d:
    case LayerKind::Deconv2d:
        j["out_channels"] = l.out_channels;
        j["kernel"] = {l.kernel_h, l.kernel_w};
        j["stride"] = l.stride;
        j["padding"] = l.padding;
        break;
    case LayerKind::FullyConnected: j["out_features"] = l.out_features; break;
    case LayerKind::LeakyRelu: j["negative_slope"] = l.negative_slope; break;
    case LayerKind::Reshape: j["target_shape"] = l.target_shape; break;
    default: break;
    }
    return j;
}

nlohmann::json to_json(const DecoderSpec& spec) {
    nlohmann::json j;
    j["name"] = spec.name;
    j["input_shape"] = spec.input_shape;
    j["layers"] = nlohmann::json::array();
    for (const auto& l : spec.layers) j["layers"].push_back(to_json(l));
    j["expected_output_shape"] = spec.expected_output_shape;
    return j;
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"learning_rate", c.learning_rate}, {"beta1", c.beta1},     {"beta2", c.beta2},
            {"epochs", c.epochs},               {"batch_size", c.batch_size}, {"seed", c.seed},
            {"adam_epsilon", c.adam_epsilon}};
}

namespace {

std::size_t positive(const nlohmann::json& j, const char* key) {
    const auto v = j.at(key).get<long long>();
    if (v < 0) throw ConfigError(std::string(key) + " must be >= 0");
    return static_cast<std::size_t>(v);
}

template <typename F>
auto wrap_json(const char* what, F&& f) {
    try {
        return f();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string(what) + ": " + e.what());
    }
}

} // namespace

LayerSpec layer_spec_from_json(const nlohmann::json& j) {
    return wrap_json("layer spec", [&] {
        LayerSpec l;
        l.kind = layer_kind_from_string(j.at("kind").get<std::string>());
        switch (l.kind) {
        case LayerKind::Conv2d:
        case LayerKind::Deconv2d: {
            l.out_channels = positive(j, "out_channels");
            const auto& k = j.at("kernel");
            if (k.is_array()) {
                if (k.size() != 2) throw ConfigError("kernel must be [kh, kw]");
                l.kernel_h = k[0].get<std::size_t>();
                l.kernel_w = k[1].get<std::size_t>();
            } else {
                l.kernel_h = l.kernel_w = k.get<std::size_t>();
            }
            l.stride = j.contains("stride") ? positive(j, "stride") : 1;
            l.padding = j.contains("padding") ? positive(j, "padding") : 0;
            break;
        }
        case LayerKind::FullyConnected: l.out_features = positive(j, "out_features"); break;
        case LayerKind::LeakyRelu:
            l.negative_slope = j.value("negative_slope", kDefaultLeakySlope);
            break;
        case LayerKind::Reshape: l.target_shape = j.at("target_shape").get<Shape>(); break;
        default: break;
        }
        return l;
    });
}

DecoderSpec decoder_spec_from_json(const nlohmann::json& j) {
    auto spec = wrap_json("decoder spec", [&] {
        DecoderSpec s;
        s.name = j.value("name", std::string{});
        s.input_shape = j.at("input_shape").get<Shape>();
        for (const auto& l : j.at("layers")) s.layers.push_back(layer_spec_from_json(l));
        if (j.contains("expected_output_shape")) s.expected_output_shape = j["expected_output_shape"].get<Shape>();
        return s;
    });
    infer_shapes(spec);
    return spec;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    auto c = wrap_json("train config", [&] {
        TrainConfig c;
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.beta1 = j.value("beta1", c.beta1);
        c.beta2 = j.value("beta2", c.beta2);
        if (j.contains("epochs")) c.epochs = positive(j, "epochs");
        if (j.contains("batch_size")) c.batch_size = positive(j, "batch_size");
        c.seed = j.value("seed", c.seed);
        c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
        return c;
    });
    c.validate();
    return c;
}

namespace {

nlohmann::json parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

} // namespace

DecoderSpec load_decoder_spec(const std::filesystem::path& path) { return decoder_spec_from_json(parse_file(path)); }

TrainConfig load_train_config(const std::filesystem::path& path) { return train_config_from_json(parse_file(path)); }

} // namespace csdis::nn
