#include "csdis/synth.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "csdis/errors.hpp"
#include "csdis/rng.hpp"

namespace csdis::synth {

namespace {

constexpr double kBodyRadius = 21.0;
constexpr double kSpoutRadius = 31.0;
constexpr double kStretchX = 1.3;
constexpr double kStretchY = 0.65;
constexpr double kCentre = kImageSize / 2.0;
constexpr std::size_t kStyleUnits = 3;

bool inside(const std::array<Point, 5>& poly, double px, double py) {
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const auto& a = poly[i];
        const auto& b = poly[(i + 1) % poly.size()];
        if ((b[0] - a[0]) * (py - a[1]) - (b[1] - a[1]) * (px - a[0]) < 0.0) return false;
    }
    return true;
}

} // namespace

std::array<Point, 5> base_polygon() {
    constexpr double degrees[5] = {18.0, 90.0, 162.0, 234.0, 306.0};
    std::array<Point, 5> poly{};
    for (std::size_t i = 0; i < 5; ++i) {
        const double radius = i == 0 ? kSpoutRadius : kBodyRadius;
        const double a = degrees[i] * std::numbers::pi / 180.0;
        poly[i] = {kStretchX * radius * std::cos(a), kStretchY * radius * std::sin(a)};
    }
    return poly;
}

std::array<Point, 5> posed_polygon(const FactorSample& f) {
    const double theta = 2.0 * std::numbers::pi * f.azimuth;
    const double c = std::cos(theta), s = std::sin(theta);
    const double vscale = 0.5 + 0.5 * f.elevation;
    auto poly = base_polygon();
    for (auto& p : poly) p = {c * p[0] - s * p[1], vscale * (s * p[0] + c * p[1])};
    return poly;
}

std::vector<FactorSample> sample_factors(std::size_t n, std::uint64_t seed) {
    std::vector<FactorSample> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto u = [&](std::uint64_t k) { return to_unit(hash_words(seed, streams::kFactors, i, k)); };
        out[i] = {u(0), u(1), u(2), u(3), u(4)};
    }
    return out;
}

RenderedSample render(const FactorSample& f) {
    for (double v : f.as_array())
        if (!(v >= 0.0 && v <= 1.0)) throw InputError("factor outside [0,1]");
    constexpr std::size_t n = kImageSize;
    const auto poly = posed_polygon(f);
    const double colour[3] = {2.0 * f.red - 1.0, 2.0 * f.green - 1.0, 2.0 * f.blue - 1.0};
    std::vector<double> image(3 * n * n, -1.0), mask(n * n, 0.0);
    for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
            if (!inside(poly, static_cast<double>(x) + 0.5 - kCentre, static_cast<double>(y) + 0.5 - kCentre))
                continue;
            mask[y * n + x] = 1.0;
            for (std::size_t c = 0; c < 3; ++c) image[(c * n + y) * n + x] = colour[c];
        }
    }
    return {Tensor({3, n, n}, std::move(image), DType::Float32), Tensor({1, n, n}, std::move(mask), DType::Float32),
            f};
}

SampleSet generate_dataset(std::size_t n, std::uint64_t seed) {
    const auto factors = sample_factors(n, seed);
    constexpr std::size_t pixels = kImageSize * kImageSize;
    std::vector<double> images, masks, styles, fac;
    images.reserve(n * 3 * pixels);
    masks.reserve(n * pixels);
    styles.reserve(n * kStyleUnits);
    fac.reserve(n * 5);
    for (const auto& f : factors) {
        const auto r = render(f);
        images.insert(images.end(), r.image.data().begin(), r.image.data().end());
        masks.insert(masks.end(), r.mask.data().begin(), r.mask.data().end());
        styles.insert(styles.end(), {f.red, f.green, f.blue});
        for (double v : f.as_array()) fac.push_back(v);
    }
    return SampleSet(Tensor({n, 3, kImageSize, kImageSize}, std::move(images), DType::Float32),
                     Tensor({n, 1, kImageSize, kImageSize}, std::move(masks), DType::Float32),
                     Tensor({n, kStyleUnits}, std::move(styles), DType::Float32),
                     Tensor({n, 5}, std::move(fac), DType::Float32));
}

const char* to_string(ScenarioKind kind) {
    switch (kind) {
    case ScenarioKind::GtGt: return "gt_gt";
    case ScenarioKind::RandGt: return "rand_gt";
    case ScenarioKind::GtRand: return "gt_rand";
    case ScenarioKind::RandRand: return "rand_rand";
    case ScenarioKind::GtCorr: return "gt_corr";
    }
    return "unknown";
}

ScenarioKind scenario_from_string(const std::string& name) {
    for (auto k : kAllScenarios)
        if (name == to_string(k)) return k;
    throw ConfigError("unknown scenario kind '" + name + "' (expected gt_gt, rand_gt, gt_rand, rand_rand, gt_corr)");
}

ContentKind content_kind(ScenarioKind kind) {
    return (kind == ScenarioKind::RandGt || kind == ScenarioKind::RandRand) ? ContentKind::Random : ContentKind::Gt;
}

StyleKind style_kind(ScenarioKind kind) {
    switch (kind) {
    case ScenarioKind::GtRand:
    case ScenarioKind::RandRand: return StyleKind::Random;
    case ScenarioKind::GtCorr: return StyleKind::Correlated;
    default: return StyleKind::Gt;
    }
}

const char* to_string(ContentKind kind) { return kind == ContentKind::Gt ? "gt" : "random"; }

const char* to_string(StyleKind kind) {
    switch (kind) {
    case StyleKind::Gt: return "gt";
    case StyleKind::Random: return "random";
    case StyleKind::Correlated: return "correlated";
    }
    return "unknown";
}

Tensor random_content(std::size_t n, const Shape& sample_shape, std::uint64_t seed) {
    const auto per = numel(sample_shape);
    std::vector<double> data(n * per);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < per; ++k) data[i * per + k] = to_unit(hash_words(seed, streams::kRandomContent, i, k));
    Shape shape{n};
    shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
    return Tensor(std::move(shape), std::move(data), DType::Float32);
}

Tensor random_style(std::size_t n, std::size_t units, std::uint64_t seed) {
    std::vector<double> data(n * units);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < units; ++k) data[i * units + k] = to_unit(hash_words(seed, streams::kRandomStyle, i, k));
    return Tensor({n, units}, std::move(data), DType::Float32);
}

Tensor correlated_style(const SampleSet& dataset) {
    const auto& factors = dataset.require(Role::Factors);
    if (factors.rank() != 2 || factors.shape()[1] != 5) throw ShapeError("factors must be an N×5 matrix");
    const auto n = dataset.n();
    std::vector<double> data(n * kStyleUnits);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = factors.sample_span(i);
        data[i * 3 + 0] = row[0];  // azimuth
        data[i * 3 + 1] = row[1];  // elevation
        data[i * 3 + 2] = row[2];  // red
    }
    return Tensor({n, kStyleUnits}, std::move(data), factors.dtype());
}

Tensor scenario_content(const SampleSet& dataset, ContentKind kind, std::uint64_t seed) {
    const auto& gt = dataset.require(Role::Contents);
    if (kind == ContentKind::Gt) return gt;
    return random_content(dataset.n(), gt.sample_shape(), seed);
}

Tensor scenario_style(const SampleSet& dataset, StyleKind kind, std::uint64_t seed) {
    switch (kind) {
    case StyleKind::Gt: return dataset.require(Role::Styles);
    case StyleKind::Random: return random_style(dataset.n(), kStyleUnits, seed);
    case StyleKind::Correlated: return correlated_style(dataset);
    }
    throw ConfigError("unknown style kind");
}

SampleSet make_scenario(const SampleSet& dataset, ScenarioKind kind, std::uint64_t seed) {
    return SampleSet(dataset.require(Role::Images), scenario_content(dataset, content_kind(kind), seed),
                     scenario_style(dataset, style_kind(kind), seed), dataset.factors());
}

std::string factors_csv(const Tensor& factors) {
    if (factors.rank() != 2 || factors.shape()[1] != 5) throw ShapeError("factors must be an N×5 matrix");
    std::ostringstream out;
    out.precision(9);
    out << "azimuth,elevation,red,green,blue\n";
    for (std::size_t i = 0; i < factors.shape()[0]; ++i) {
        const auto row = factors.sample_span(i);
        for (std::size_t k = 0; k < 5; ++k) out << (k ? "," : "") << row[k];
        out << "\n";
    }
    return out.str();
}

} // namespace csdis::synth
