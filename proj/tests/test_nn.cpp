#include <doctest.h>

#include <cmath>
#include <numbers>

#include "csdis/errors.hpp"
#include "csdis/nn/decoder.hpp"
#include "csdis/nn/train.hpp"
#include "support/decoder_tables.hpp"
#include "support/gradcheck.hpp"

using namespace csdis;
using namespace csdis::nn;

namespace {

DecoderSpec config(const std::string& name) { return testing::decoder_config(name); }

} // namespace

TEST_CASE("output size arithmetic") {
    CHECK(layer_output_shape(LayerSpec::conv2d(8, 7, 1, 3), {1, 64, 64}, 0) == Shape{8, 64, 64});
    CHECK(layer_output_shape(LayerSpec::deconv2d(32, 4, 2, 1), {64, 8, 8}, 0) == Shape{32, 16, 16});
    CHECK(layer_output_shape(LayerSpec::conv2d(4, 3, 3, 0), {1, 10, 10}, 0) == Shape{4, 3, 3});

    DecoderSpec s;
    s.input_shape = {3};
    s.layers = {LayerSpec::fully_connected(4096), LayerSpec::reshape({64, 8, 8})};
    s.expected_output_shape = {64, 8, 8};
    CHECK(infer_shapes(s).back() == Shape{64, 8, 8});

    s.layers[1] = LayerSpec::reshape({64, 8, 4});
    CHECK_THROWS_AS(infer_shapes(s), SpecError);
    s.layers = {LayerSpec::fully_connected(10), LayerSpec::conv2d(3, 3, 1, 1)};
    try {
        infer_shapes(s);
        FAIL("expected SpecError");
    } catch (const SpecError& e) {
        CHECK(e.layer() == 1);
    }
}

TEST_CASE("decoder tables produce the printed shape chains") {
    for (const auto& [name, rows] : testing::printed_tables()) {
        INFO(name);
        const auto spec = config(name);
        const auto got = testing::table_rows(spec);
        REQUIRE(got.size() == rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            CHECK(got[i].in == rows[i].in);
            CHECK(got[i].out == rows[i].out);
        }
        CHECK(infer_shapes(spec).back() == spec.expected_output_shape);
    }
}

TEST_CASE("forward output matches inferred shapes and stays inside tanh range") {
    for (const char* name : {"teapot_content", "teapot_style", "panet_content", "panet_style"}) {
        INFO(name);
        Decoder<float> model(config(name), 1);
        std::vector<float> in(model.input_size() * 2);
        CounterRng rng(4);
        for (auto& v : in) v = static_cast<float>(rng.uniform(-1.0, 1.0));
        const auto out = model.forward(in, 2);
        CHECK(out.size() == 2 * numel(model.shapes().back()));
        for (float v : out) REQUIRE((v > -1.0f && v < 1.0f));
    }
}

TEST_CASE("simple layer semantics") {
    using M = Mat<double>;
    SUBCASE("zero conv gives zero through tanh") {
        DecoderSpec s;
        s.input_shape = {2, 5, 5};
        s.layers = {LayerSpec::conv2d(3, 3, 1, 1), LayerSpec::tanh()};
        s.expected_output_shape = {3, 5, 5};
        Decoder<double> d(s, 0);
        for (auto* p : d.parameters()) p->value.setZero();
        std::vector<double> in(50, 0.7);
        for (double v : d.forward(in, 1)) CHECK(v == 0.0);
    }
    SUBCASE("instance norm of a constant map is zero") {
        auto layer = make_layer<double>(LayerSpec::instance_norm(), {2, 4, 4}, {2, 4, 4});
        M in(2, 32);
        in.row(0).setConstant(3.0);
        in.row(1).setConstant(-1.5);
        M out;
        layer->forward(in, out, 2);
        CHECK(out.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("leaky relu") {
        auto layer = make_layer<double>(LayerSpec::leaky_relu(0.2), {2}, {2});
        M in(2, 1);
        in << -1.0, 2.0;
        M out;
        layer->forward(in, out, 1);
        CHECK(out(0, 0) == doctest::Approx(-0.2).epsilon(1e-15));
        CHECK(out(1, 0) == 2.0);
    }
}

TEST_CASE("gradient check through a small decoder") {
    DecoderSpec s;
    s.input_shape = {2, 6, 6};
    s.layers = {LayerSpec::conv2d(3, 3, 2, 1), LayerSpec::instance_norm(), LayerSpec::leaky_relu(),
                LayerSpec::deconv2d(2, 4, 2, 1), LayerSpec::tanh()};
    s.expected_output_shape = {2, 6, 6};
    Decoder<double> d(s, 3);
    CounterRng rng(8);
    const std::size_t batch = 2;
    std::vector<double> in(d.input_size() * batch), r(d.output_size() * batch);
    for (auto& v : in) v = rng.uniform(-1.0, 1.0);
    for (auto& v : r) v = rng.uniform(-1.0, 1.0);

    auto loss = [&] {
        const auto y = d.forward(in, batch);
        double l = 0.0;
        for (std::size_t k = 0; k < y.size(); ++k) l += r[k] * y[k];
        return l;
    };
    loss();
    const auto gin = d.backward(r, true);
    std::vector<double> analytic(gin), numeric;
    for (auto* p : d.parameters()) analytic.insert(analytic.end(), p->grad.data(), p->grad.data() + p->grad.size());

    const double h = 1e-5;
    for (auto& v : in) {
        const double keep = v;
        v = keep + h;
        const double up = loss();
        v = keep - h;
        const double down = loss();
        v = keep;
        numeric.push_back((up - down) / (2 * h));
    }
    for (auto* p : d.parameters())
        for (Eigen::Index k = 0; k < p->value.size(); ++k) {
            const double keep = p->value.data()[k];
            p->value.data()[k] = keep + h;
            const double up = loss();
            p->value.data()[k] = keep - h;
            const double down = loss();
            p->value.data()[k] = keep;
            numeric.push_back((up - down) / (2 * h));
        }
    CHECK(testing::relative_error(analytic, numeric) < 1e-4);
}

TEST_CASE("mse gradient") {
    std::vector<float> zero(6, 0.0f), g(6);
    mse_gradient(zero, zero, g);
    for (float v : g) CHECK(v == 0.0f);

    std::vector<float> y{0.5f, -0.25f, 1.0f}, t{0.0f, 0.0f, 0.0f}, y2{1.0f, -0.5f, 2.0f}, g1(3), g2(3);
    mse_gradient(y, t, g1);
    mse_gradient(y2, t, g2);
    for (int k = 0; k < 3; ++k) CHECK(g2[k] == 2.0f * g1[k]);
    CHECK(g1[0] == doctest::Approx(2.0 * 0.5 / 3.0));
}

TEST_CASE("mse is affine in the gaussian log-likelihood") {
    CounterRng rng(31);
    const double sigma2 = 0.37;
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t n = 50 + 37 * trial;
        std::vector<float> y(n), t(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
            t[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
        }
        double log_l = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = double(y[i]) - double(t[i]);
            log_l += -0.5 * std::log(2 * std::numbers::pi * sigma2) - e * e / (2 * sigma2);
        }
        const double predicted = -(2 * sigma2 / double(n)) * log_l - sigma2 * std::log(2 * std::numbers::pi * sigma2);
        CHECK(std::abs(mse_loss(y, t) - predicted) < 1e-9);
    }
}

TEST_CASE("adam first step") {
    DecoderSpec s;
    s.input_shape = {2};
    s.layers = {LayerSpec::fully_connected(3)};
    s.expected_output_shape = {3};
    Decoder<double> d(s, 0);
    TrainConfig cfg;
    CounterRng rng(12);
    auto* w = d.parameters()[0];
    w->value(0, 1) = w->value(0, 0);
    std::vector<Mat<double>> before;
    for (auto* p : d.parameters()) {
        before.push_back(p->value);
        for (Eigen::Index k = 0; k < p->grad.size(); ++k) p->grad.data()[k] = rng.uniform(-2.0, 2.0);
    }
    // equal gradients in two slots of the weight
    w->grad(0, 1) = w->grad(0, 0);
    w->grad.row(1).setZero();
    const auto grads = [&] {
        std::vector<Mat<double>> g;
        for (auto* p : d.parameters()) g.push_back(p->grad);
        return g;
    }();
    d.adam_step(cfg, 1);
    auto params = d.parameters();
    for (std::size_t i = 0; i < params.size(); ++i)
        for (Eigen::Index k = 0; k < params[i]->value.size(); ++k) {
            const double g = grads[i].data()[k];
            const double expect = -cfg.learning_rate * g / (std::abs(g) + cfg.adam_epsilon);
            const double delta = params[i]->value.data()[k] - before[i].data()[k];
            CHECK(std::abs(delta - expect) <= 1e-12 * cfg.learning_rate);
            if (g == 0.0) CHECK(delta == 0.0);
        }
    CHECK(w->value(0, 0) == w->value(0, 1));
    CHECK_THROWS_AS(d.adam_step(cfg, 0), ConfigError);
}

TEST_CASE("train config validation") {
    TrainConfig cfg;
    cfg.epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

namespace {

SampleBuffer random_images(std::size_t n, std::uint64_t seed) {
    SampleBuffer b;
    b.n = n;
    b.sample_shape = {3, 8, 8};
    CounterRng rng(seed);
    b.values.resize(n * 192);
    for (auto& v : b.values) v = static_cast<float>(rng.uniform(-0.8, 0.8));
    return b;
}

DecoderSpec identity_spec() {
    DecoderSpec s;
    s.name = "identity";
    s.input_shape = {3, 8, 8};
    s.layers = {LayerSpec::conv2d(3, 1, 1, 0), LayerSpec::tanh()};
    s.expected_output_shape = {3, 8, 8};
    return s;
}

} // namespace

TEST_CASE("identity task trains below a tenth of the initial error") {
    const auto data = random_images(64, 2);
    TrainConfig cfg;
    cfg.learning_rate = 1e-2;
    cfg.epochs = 40;
    const auto r = train_decoder(identity_spec(), data, data, cfg);
    CHECK(r.epoch_loss.size() == 40);
    CHECK(r.final_mse < 0.1 * r.initial_mse);
}

TEST_CASE("training is deterministic for a fixed seed") {
    const auto data = random_images(32, 5);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.seed = 77;
    const auto a = train_decoder(identity_spec(), data, data, cfg);
    const auto b = train_decoder(identity_spec(), data, data, cfg);
    CHECK(a.epoch_hashes == b.epoch_hashes);
    cfg.seed = 78;
    const auto c = train_decoder(identity_spec(), data, data, cfg);
    CHECK(a.epoch_hashes != c.epoch_hashes);
}

TEST_CASE("training rejects mismatched data") {
    const auto data = random_images(8, 1);
    auto fewer = random_images(7, 1);
    CHECK_THROWS_AS(train_decoder(identity_spec(), data, fewer, TrainConfig{}), ShapeError);
}

TEST_CASE("shared-input step matches the full minibatch gradient") {
    // bias decoders feed one tensor to every sample; the single-pass gradient
    // against the mean target must equal the averaged per-sample gradient
    DecoderSpec s;
    s.input_shape = {3};
    s.layers = {LayerSpec::fully_connected(12), LayerSpec::tanh()};
    s.expected_output_shape = {12};
    Decoder<double> full(s, 2), shared(s, 2);
    CounterRng rng(40);
    const std::size_t b = 5;
    std::vector<double> ones(3 * b, 1.0), t(12 * b);
    for (auto& v : t) v = rng.uniform(-1.0, 1.0);

    const auto y = full.forward(ones, b);
    std::vector<double> g(y.size());
    for (std::size_t k = 0; k < y.size(); ++k) g[k] = 2.0 * (y[k] - t[k]) / double(y.size());
    full.backward(g);

    const auto y1 = shared.forward(std::span<const double>(ones).first(3), 1);
    std::vector<double> g1(12);
    for (std::size_t k = 0; k < 12; ++k) {
        double mean = 0.0;
        for (std::size_t i = 0; i < b; ++i) mean += t[i * 12 + k] / double(b);
        g1[k] = 2.0 * (y1[k] - mean) / 12.0;
    }
    shared.backward(g1);
    auto pf = full.parameters(), ps = shared.parameters();
    for (std::size_t i = 0; i < pf.size(); ++i) CHECK((pf[i]->grad - ps[i]->grad).cwiseAbs().maxCoeff() < 1e-14);
}
