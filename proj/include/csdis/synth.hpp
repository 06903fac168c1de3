#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "csdis/tensor.hpp"

namespace csdis::synth {

inline constexpr std::size_t kImageSize = 64;
inline constexpr std::size_t kDefaultSamples = 5000;

// Five generating factors, each in [0, 1].
struct FactorSample {
    double azimuth = 0.0;    // rotation 2π·azimuth
    double elevation = 0.0;  // vertical scale 0.5 + 0.5·elevation
    double red = 0.0, green = 0.0, blue = 0.0;

    std::array<double, 5> as_array() const { return {azimuth, elevation, red, green, blue}; }
};

struct RenderedSample {
    Tensor image;  // [3,64,64] in [−1,1], background −1
    Tensor mask;   // [1,64,64] in {0,1}
    FactorSample factors;
};

using Point = std::array<double, 2>;

// Shape outline before pose is applied: an elongated pentagon with one
// extended "spout" vertex, counter-clockwise, centred on the origin.
std::array<Point, 5> base_polygon();

// Posed outline in pixel units relative to the image centre (32, 32).
std::array<Point, 5> posed_polygon(const FactorSample& f);

// factor k of sample i is a pure function of (seed, i, k).
std::vector<FactorSample> sample_factors(std::size_t n, std::uint64_t seed);

// Crisp rasterisation: pixel (x, y) is painted when its centre
// (x + 0.5, y + 0.5) lies inside or on the posed outline.
RenderedSample render(const FactorSample& f);

// images, contents (masks), styles (r, g, b) and factors for n samples.
SampleSet generate_dataset(std::size_t n, std::uint64_t seed);

enum class ScenarioKind { GtGt, RandGt, GtRand, RandRand, GtCorr };

inline constexpr std::array<ScenarioKind, 5> kAllScenarios = {
    ScenarioKind::GtGt, ScenarioKind::RandGt, ScenarioKind::GtRand, ScenarioKind::RandRand, ScenarioKind::GtCorr};

const char* to_string(ScenarioKind kind);
ScenarioKind scenario_from_string(const std::string& name);

enum class ContentKind { Gt, Random };
enum class StyleKind { Gt, Random, Correlated };

ContentKind content_kind(ScenarioKind kind);
StyleKind style_kind(ScenarioKind kind);
const char* to_string(ContentKind kind);
const char* to_string(StyleKind kind);

// i.i.d. U[0,1] tensors shaped like one content sample / a 3-unit style.
Tensor random_content(std::size_t n, const Shape& sample_shape, std::uint64_t seed);
Tensor random_style(std::size_t n, std::size_t units, std::uint64_t seed);
// (azimuth, elevation, red) per sample, from the factors role.
Tensor correlated_style(const SampleSet& dataset);

Tensor scenario_content(const SampleSet& dataset, ContentKind kind, std::uint64_t seed);
Tensor scenario_style(const SampleSet& dataset, StyleKind kind, std::uint64_t seed);

// Images plus the content/style pair of the scenario; random parts are drawn
// from `seed`.
SampleSet make_scenario(const SampleSet& dataset, ScenarioKind kind, std::uint64_t seed);

// CSV with header azimuth,elevation,red,green,blue.
std::string factors_csv(const Tensor& factors);

} // namespace csdis::synth
