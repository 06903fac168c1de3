#include "csdis/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "csdis/errors.hpp"

namespace csdis {

const char* to_string(DType dtype) {
    switch (dtype) {
    case DType::Float32: return "float32";
    case DType::Float64: return "float64";
    }
    return "unknown";
}

std::size_t numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

std::string to_string(const Shape& shape) {
    std::string out = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) out += ",";
        out += std::to_string(shape[i]);
    }
    return out + ")";
}

Tensor::Tensor(Shape shape, std::vector<double> data, DType dtype)
    : shape_(std::move(shape)), dtype_(dtype), data_(std::move(data)) {
    if (shape_.empty()) throw ShapeError("tensor must have rank >= 1");
    for (auto d : shape_)
        if (d == 0) throw ShapeError("zero-sized dimension in shape " + to_string(shape_));
    if (numel(shape_) != data_.size())
        throw ShapeError("shape " + to_string(shape_) + " holds " + std::to_string(numel(shape_)) +
                         " elements but data has " + std::to_string(data_.size()));
    if (dtype_ != DType::Float32 && dtype_ != DType::Float64) throw InputError("unknown dtype");
    for (std::size_t i = 0; i < data_.size(); ++i) {
        if (dtype_ == DType::Float32) data_[i] = static_cast<float>(data_[i]);
        if (!std::isfinite(data_[i]))
            throw InputError("non-finite value at flat index " + std::to_string(i));
    }
}

Tensor Tensor::filled(Shape shape, double value, DType dtype) {
    const auto n = numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value), dtype);
}

Shape Tensor::sample_shape() const {
    if (shape_.size() == 1) return {1};
    return Shape(shape_.begin() + 1, shape_.end());
}

std::span<const double> Tensor::sample_span(std::size_t i) const {
    if (i >= shape_[0]) throw ShapeError("sample index out of range");
    const auto stride = data_.size() / shape_[0];
    return std::span<const double>(data_).subspan(i * stride, stride);
}

Tensor Tensor::sample(std::size_t i) const {
    auto s = sample_span(i);
    return Tensor(sample_shape(), std::vector<double>(s.begin(), s.end()), dtype_);
}

Tensor Tensor::reshaped(Shape shape) const {
    if (numel(shape) != data_.size())
        throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
    return Tensor(std::move(shape), data_, dtype_);
}

Tensor Tensor::as(DType dtype) const { return Tensor(shape_, data_, dtype); }

Tensor flatten_sample(const Tensor& t) {
    if (t.rank() == 1) return t;
    if (t.rank() != 3)
        throw ShapeError("only rank-1 and rank-3 sample layouts are defined, got " +
                         to_string(t.shape()));
    // Row-major storage of [C,H,W] already is the channel-concatenated row scan.
    return t.reshaped({t.size()});
}

Matrix stack_samples(std::span<const Tensor> items) {
    if (items.size() < 2) throw ShapeError("stack_samples needs at least 2 items");
    const Shape& shape = items.front().shape();
    const auto d = flatten_sample(items.front()).size();
    Matrix out(static_cast<Eigen::Index>(items.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i].shape() != shape)
            throw ShapeError("item " + std::to_string(i) + " has shape " +
                             to_string(items[i].shape()) + ", expected " + to_string(shape));
        auto flat = flatten_sample(items[i]);
        for (std::size_t j = 0; j < d; ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = flat[j];
    }
    return out;
}

Matrix stack_batch(const Tensor& batch) {
    const auto n = batch.shape()[0];
    if (n < 2) throw ShapeError("stack_batch needs at least 2 samples");
    if (batch.rank() != 1 && batch.rank() != 2 && batch.rank() != 4)
        throw ShapeError("only rank-1 and rank-3 sample layouts are defined, batch shape " +
                         to_string(batch.shape()));
    const auto d = batch.size() / n;
    Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    std::copy(batch.data().begin(), batch.data().end(), out.data());
    return out;
}

const char* to_string(Role role) {
    switch (role) {
    case Role::Images: return "images";
    case Role::Contents: return "contents";
    case Role::Styles: return "styles";
    case Role::Factors: return "factors";
    }
    return "unknown";
}

Role role_from_string(const std::string& name) {
    if (name == "images") return Role::Images;
    if (name == "contents") return Role::Contents;
    if (name == "styles") return Role::Styles;
    if (name == "factors") return Role::Factors;
    throw ConfigError("unknown sample set role '" + name + "'");
}

SampleSet::SampleSet(std::optional<Tensor> images, std::optional<Tensor> contents,
                     std::optional<Tensor> styles, std::optional<Tensor> factors)
    : images_(std::move(images)), contents_(std::move(contents)), styles_(std::move(styles)),
      factors_(std::move(factors)) {
    bool any = false;
    for (auto role : {Role::Images, Role::Contents, Role::Styles, Role::Factors}) {
        const auto& t = get(role);
        if (!t) continue;
        const auto rows = t->shape()[0];
        if (!any) {
            n_ = rows;
            any = true;
        } else if (rows != n_) {
            throw ShapeError(std::string("role ") + to_string(role) + " has " +
                             std::to_string(rows) + " samples, expected " + std::to_string(n_));
        }
    }
    if (!any) throw ShapeError("sample set has no members");
    if (n_ < 2) throw ShapeError("sample set needs at least 2 samples");
}

const std::optional<Tensor>& SampleSet::get(Role role) const {
    switch (role) {
    case Role::Images: return images_;
    case Role::Contents: return contents_;
    case Role::Styles: return styles_;
    case Role::Factors: return factors_;
    }
    return images_;
}

const Tensor& SampleSet::require(Role role) const {
    const auto& t = get(role);
    if (!t) throw ShapeError(std::string("sample set has no ") + to_string(role));
    return *t;
}

Tensor gather(const Tensor& batch, std::span<const std::size_t> indices) {
    if (indices.empty()) throw ShapeError("gather needs at least one index");
    const auto stride = batch.size() / batch.shape()[0];
    std::vector<double> data;
    data.reserve(indices.size() * stride);
    for (auto i : indices) {
        auto s = batch.sample_span(i);
        data.insert(data.end(), s.begin(), s.end());
    }
    Shape shape = batch.shape();
    shape[0] = indices.size();
    return Tensor(std::move(shape), std::move(data), batch.dtype());
}

SampleSet SampleSet::subset(std::span<const std::size_t> indices) const {
    auto pick = [&](const std::optional<Tensor>& t) -> std::optional<Tensor> {
        if (!t) return std::nullopt;
        return gather(*t, indices);
    };
    return SampleSet(pick(images_), pick(contents_), pick(styles_), pick(factors_));
}

} // namespace csdis
