#pragma once

#include <string>
#include <utility>
#include <vector>

#include "csdis/nn/spec.hpp"

#ifndef CSDIS_SOURCE_DIR
#define CSDIS_SOURCE_DIR "."
#endif

namespace csdis::testing {

inline nn::DecoderSpec decoder_config(const std::string& name) {
    return nn::load_decoder_spec(std::string(CSDIS_SOURCE_DIR) + "/configs/decoders/" + name + ".json");
}

struct Row {
    Shape in, out;
};

// (input, output) of each conv / deconv / fc / standalone reshape row;
// activation and normalisation layers keep the shape and are skipped.
inline std::vector<Row> table_rows(const nn::DecoderSpec& spec) {
    const auto shapes = nn::infer_shapes(spec);
    std::vector<Row> rows;
    Shape in = spec.input_shape;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        using K = nn::LayerKind;
        const auto k = spec.layers[i].kind;
        const bool after_fc = i > 0 && spec.layers[i - 1].kind == K::FullyConnected;
        const bool main = k == K::Conv2d || k == K::Deconv2d || k == K::FullyConnected ||
                          ((k == K::Reshape || k == K::Flatten) && !after_fc);
        if (main) rows.push_back({in, shapes[i]});
        in = shapes[i];
    }
    return rows;
}

// The decoder tables as printed, one (input → output) pair per row.
inline const std::vector<std::pair<std::string, std::vector<Row>>>& printed_tables() {
    static const std::vector<std::pair<std::string, std::vector<Row>>> t = {
        {"teapot_content",
         {{{1, 64, 64}, {8, 64, 64}},
          {{8, 64, 64}, {16, 32, 32}},
          {{16, 32, 32}, {32, 16, 16}},
          {{32, 16, 16}, {64, 8, 8}},
          {{64, 8, 8}, {32, 16, 16}},
          {{32, 16, 16}, {16, 32, 32}},
          {{16, 32, 32}, {8, 64, 64}},
          {{8, 64, 64}, {3, 64, 64}}}},
        {"teapot_style",
         {{{3}, {256}},
          {{256}, {4096}},
          {{64, 8, 8}, {32, 16, 16}},
          {{32, 16, 16}, {16, 32, 32}},
          {{16, 32, 32}, {8, 64, 64}},
          {{8, 64, 64}, {3, 64, 64}}}},
        {"munit_content",
         {{{128, 64, 64}, {128, 64, 64}},
          {{128, 64, 64}, {128, 32, 32}},
          {{128, 32, 32}, {128, 16, 16}},
          {{128, 16, 16}, {64, 32, 32}},
          {{64, 32, 32}, {32, 64, 64}},
          {{32, 64, 64}, {16, 128, 128}},
          {{16, 128, 128}, {3, 128, 128}}}},
        {"munit_style",
         {{{8}, {256}},
          {{256}, {4096}},
          {{4096}, {8192}},
          {{128, 8, 8}, {64, 16, 16}},
          {{64, 16, 16}, {32, 32, 32}},
          {{32, 32, 32}, {16, 64, 64}},
          {{16, 64, 64}, {8, 128, 128}},
          {{8, 128, 128}, {3, 128, 128}}}},
        {"sdnet_content",
         {{{8, 224, 224}, {8, 224, 224}},
          {{8, 224, 224}, {16, 112, 112}},
          {{16, 112, 112}, {32, 56, 56}},
          {{32, 56, 56}, {64, 28, 28}},
          {{64, 28, 28}, {128, 14, 14}},
          {{128, 14, 14}, {64, 28, 28}},
          {{64, 28, 28}, {32, 56, 56}},
          {{32, 56, 56}, {16, 112, 112}},
          {{16, 112, 112}, {8, 224, 224}},
          {{8, 224, 224}, {1, 224, 224}}}},
        {"sdnet_style",
         {{{3}, {256}},
          {{256}, {4096}},
          {{4096}, {25088}},
          {{128, 14, 14}, {64, 28, 28}},
          {{64, 28, 28}, {32, 56, 56}},
          {{32, 56, 56}, {16, 112, 112}},
          {{16, 112, 112}, {8, 224, 224}},
          {{8, 224, 224}, {1, 224, 224}}}},
        {"panet_content",
         {{{3, 64, 64}, {16, 64, 64}},
          {{16, 64, 64}, {32, 32, 32}},
          {{32, 32, 32}, {16, 64, 64}},
          {{16, 64, 64}, {8, 128, 128}},
          {{8, 128, 128}, {3, 128, 128}}}},
        {"panet_style",
         {{{1024}, {1, 32, 32}},
          {{1, 32, 32}, {16, 64, 64}},
          {{16, 64, 64}, {8, 128, 128}},
          {{8, 128, 128}, {3, 128, 128}}}},
    };
    return t;
}

} // namespace csdis::testing
