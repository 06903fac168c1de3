#include <doctest.h>

#include "csdis/errors.hpp"
#include "csdis/iob.hpp"
#include "csdis/synth.hpp"

#ifndef CSDIS_SOURCE_DIR
#define CSDIS_SOURCE_DIR "."
#endif

using namespace csdis;

namespace {

nn::DecoderSpec config(const std::string& name) {
    return nn::load_decoder_spec(std::string(CSDIS_SOURCE_DIR) + "/configs/decoders/" + name + ".json");
}

} // namespace

TEST_CASE("bias input") {
    const auto a = make_bias_input({3});
    CHECK(a.shape() == Shape{3});
    for (double v : a.data()) CHECK(v == 1.0);
    const auto b = make_bias_input({1, 64, 64});
    CHECK(b.size() == 4096);
    for (double v : b.data()) REQUIRE(v == 1.0);
    CHECK(nn::SampleBuffer::repeated(b, 5).all_samples_identical());
}

TEST_CASE("iob ratio") {
    CHECK(iob_ratio({2.0, 4.0}, {1.0, 1.0}, 0.0 + 1e-300) == doctest::Approx(3.0));
    CHECK(iob_ratio({1.0}, {0.0}, 1e-8) == doctest::Approx(1e8));
    CHECK_THROWS_AS(iob_ratio({1.0}, {1.0, 2.0}, 1e-8), ShapeError);
    CHECK_THROWS_AS(iob_ratio({0.0}, {1.0}, 1e-8), NumericalError);
}

TEST_CASE("run seeds") {
    nn::TrainConfig t;
    t.seed = 10;
    CHECK(run_seed(t, 0) == 10);
    CHECK(run_seed(t, 2) == 12);
    CHECK(bias_seed(10) != 10);
    CHECK(bias_seed(10) != bias_seed(11));
}

TEST_CASE("summaries use the population std") {
    const auto r = summarize_runs({1.0, 3.0}, {2.0, 2.0}, {1.0, 3.0});
    CHECK(r.mean == 2.0);
    CHECK(r.std == 1.0);
    CHECK(summarize_runs({1.5}, {1.0}, {1.0}).std == 0.0);
}

TEST_CASE("config validation catches shape mismatches") {
    auto cfg = make_iob_config(config("teapot_style"), nn::TrainConfig{}, 1);
    CHECK_NOTHROW(cfg.validate({3}, {3, 64, 64}));
    CHECK_THROWS_AS(cfg.validate({4}, {3, 64, 64}), ShapeError);
    CHECK_THROWS_AS(cfg.validate({3}, {1, 64, 64}), ShapeError);
    cfg.runs = 0;
    CHECK_THROWS_AS(cfg.validate({3}, {3, 64, 64}), ConfigError);
}

TEST_CASE("collapse flag for a constant style with informative content") {
    const auto set = synth::generate_dataset(32, 4);
    const SampleSet collapsed(set.images(), set.contents(), Tensor::filled({32, 3}, 0.5, DType::Float32));
    nn::TrainConfig train;
    train.epochs = 2;
    const auto cfg_c = make_iob_config(config("teapot_content"), train, 1);
    const auto cfg_s = make_iob_config(config("teapot_style"), train, 1);
    const auto report = iob_pair_report(collapsed, cfg_c, cfg_s);
    CHECK_FALSE(report.dcor_cs.has_value());
    CHECK(report.style.mean <= kUninformativeIob);
    CHECK(report.posterior_collapse);
}

TEST_CASE("missing styles") {
    const auto set = synth::generate_dataset(4, 4);
    const SampleSet partial(set.images(), set.contents(), std::nullopt);
    const auto cfg = make_iob_config(config("teapot_style"), nn::TrainConfig{}, 1);
    CHECK_THROWS_AS(iob_pair_report(partial, cfg, cfg), ShapeError);
}
