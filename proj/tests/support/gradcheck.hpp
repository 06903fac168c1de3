#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "csdis/nn/decoder.hpp"
#include "csdis/rng.hpp"

namespace csdis::testing {

struct GradCase {
    nn::LayerSpec layer;
    Shape input;
    std::size_t batch = 2;
};

struct GradReport {
    double input_error = 0.0;  // relative, norm-wise
    double param_error = 0.0;
    std::size_t checked = 0;
};

inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double scale = std::max(std::sqrt(std::max(na, nb)), 1e-12);
    return std::sqrt(diff) / scale;
}

// Central differences of L = Σ r ∘ layer(x) against the analytic backward
// pass, for the input and for every parameter entry.
inline GradReport check_layer_gradients(const GradCase& c, std::uint64_t seed, double h = 1e-5) {
    using M = nn::Mat<double>;
    const Shape out_shape = nn::layer_output_shape(c.layer, c.input, 0);
    auto layer = nn::make_layer<double>(c.layer, c.input, out_shape);
    CounterRng rng(seed, 0x67726164);
    for (auto* p : layer->parameters())
        for (Eigen::Index k = 0; k < p->value.size(); ++k) p->value.data()[k] = rng.uniform(-0.5, 0.5);

    std::vector<double> samples(numel(c.input) * c.batch);
    for (auto& v : samples) v = rng.uniform(-1.0, 1.0);
    M x = nn::to_channel_major<double>(samples, c.input, c.batch);
    M y;
    layer->forward(x, y, c.batch);
    M r(y.rows(), y.cols());
    for (Eigen::Index k = 0; k < r.size(); ++k) r.data()[k] = rng.uniform(-1.0, 1.0);

    M gx;
    layer->backward(x, y, r, &gx, c.batch);
    std::vector<std::vector<double>> analytic_params;
    for (auto* p : layer->parameters()) analytic_params.emplace_back(p->grad.data(), p->grad.data() + p->grad.size());

    auto loss = [&](const M& input) {
        M out;
        layer->forward(input, out, c.batch);
        return (out.array() * r.array()).sum();
    };

    GradReport report;
    std::vector<double> num(static_cast<std::size_t>(x.size())), ana(gx.data(), gx.data() + gx.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double keep = x.data()[k];
        x.data()[k] = keep + h;
        const double up = loss(x);
        x.data()[k] = keep - h;
        const double down = loss(x);
        x.data()[k] = keep;
        num[static_cast<std::size_t>(k)] = (up - down) / (2 * h);
    }
    report.input_error = relative_error(ana, num);
    report.checked += num.size();

    auto params = layer->parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& value = params[i]->value;
        std::vector<double> pnum(static_cast<std::size_t>(value.size()));
        for (Eigen::Index k = 0; k < value.size(); ++k) {
            const double keep = value.data()[k];
            value.data()[k] = keep + h;
            const double up = loss(x);
            value.data()[k] = keep - h;
            const double down = loss(x);
            value.data()[k] = keep;
            pnum[static_cast<std::size_t>(k)] = (up - down) / (2 * h);
        }
        report.param_error = std::max(report.param_error, relative_error(analytic_params[i], pnum));
        report.checked += pnum.size();
    }
    return report;
}

// At least five shapes per layer kind; the convolution cases cover both the
// direct and the GEMM path, strides 1-3, tile tails and kernels wider than
// the image.
inline std::vector<GradCase> gradient_cases(nn::LayerKind kind) {
    using nn::LayerSpec;
    switch (kind) {
    case nn::LayerKind::Conv2d:
        return {
            {LayerSpec::conv2d(2, 3, 1, 1), {1, 5, 7}},
            {LayerSpec::conv2d(4, 5, 1, 2), {3, 19, 21}},
            {LayerSpec::conv2d(3, 7, 1, 3), {2, 7, 6}},
            {LayerSpec::conv2d(3, 4, 2, 1), {2, 8, 8}},
            {LayerSpec::conv2d(8, 3, 1, 1), {9, 6, 5}},
            {LayerSpec::conv2d(2, 3, 3, 0), {2, 9, 10}},
            {LayerSpec::conv2d(5, 2, 1, 0), {3, 17, 18}},
        };
    case nn::LayerKind::Deconv2d:
        return {
            {LayerSpec::deconv2d(3, 4, 2, 1), {2, 4, 4}},
            {LayerSpec::deconv2d(2, 3, 1, 1), {3, 5, 5}},
            {LayerSpec::deconv2d(2, 3, 2, 0), {2, 3, 4}},
            {LayerSpec::deconv2d(8, 4, 2, 1), {4, 4, 4}},
            {LayerSpec::deconv2d(2, 5, 3, 1), {1, 3, 3}},
        };
    case nn::LayerKind::FullyConnected:
        return {
            {LayerSpec::fully_connected(3), {5}},
            {LayerSpec::fully_connected(7), {12}},
            {LayerSpec::fully_connected(4), {1}},
            {LayerSpec::fully_connected(2), {30}},
            {LayerSpec::fully_connected(8), {8}, 3},
        };
    case nn::LayerKind::InstanceNorm:
        return {
            {LayerSpec::instance_norm(), {2, 4, 4}},
            {LayerSpec::instance_norm(), {1, 3, 5}},
            {LayerSpec::instance_norm(), {3, 6, 2}},
            {LayerSpec::instance_norm(), {4, 1, 7}},
            {LayerSpec::instance_norm(), {2, 8, 8}, 3},
        };
    case nn::LayerKind::LeakyRelu:
        return {
            {LayerSpec::leaky_relu(), {2, 4, 4}},
            {LayerSpec::leaky_relu(), {7}},
            {LayerSpec::leaky_relu(0.01), {3, 5, 2}},
            {LayerSpec::leaky_relu(0.5), {1, 6, 6}},
            {LayerSpec::leaky_relu(), {4, 3, 3}, 3},
        };
    case nn::LayerKind::Tanh:
        return {
            {LayerSpec::tanh(), {2, 4, 4}},
            {LayerSpec::tanh(), {9}},
            {LayerSpec::tanh(), {3, 2, 5}},
            {LayerSpec::tanh(), {1, 7, 3}},
            {LayerSpec::tanh(), {5, 2, 2}, 3},
        };
    case nn::LayerKind::Flatten:
        return {
            {LayerSpec::flatten(), {2, 3, 4}},
            {LayerSpec::flatten(), {1, 5, 5}},
            {LayerSpec::flatten(), {3, 2, 2}},
            {LayerSpec::flatten(), {4, 1, 3}},
            {LayerSpec::flatten(), {2, 2, 6}, 3},
        };
    case nn::LayerKind::Reshape:
        return {
            {LayerSpec::reshape({2, 3, 4}), {24}},
            {LayerSpec::reshape({1, 4, 4}), {16}},
            {LayerSpec::reshape({12}), {3, 2, 2}},
            {LayerSpec::reshape({2, 6, 1}), {3, 2, 2}},
            {LayerSpec::reshape({4, 2, 2}), {16}, 3},
        };
    }
    return {};
}

inline const std::vector<nn::LayerKind>& all_layer_kinds() {
    static const std::vector<nn::LayerKind> kinds = {
        nn::LayerKind::Conv2d,    nn::LayerKind::Deconv2d, nn::LayerKind::FullyConnected, nn::LayerKind::InstanceNorm,
        nn::LayerKind::LeakyRelu, nn::LayerKind::Tanh,     nn::LayerKind::Flatten,        nn::LayerKind::Reshape,
    };
    return kinds;
}

} // namespace csdis::testing
