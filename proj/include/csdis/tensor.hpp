#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace csdis {

enum class DType : std::uint8_t { Float32 = 1, Float64 = 2 };

const char* to_string(DType dtype);

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

// N×D sample matrix, one flattened sample per row. All metric math runs in
// float64 regardless of the storage dtype of the tensors it came from.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense row-major tensor. Immutable once constructed; a float32 tensor keeps
// its values rounded to float precision so dumps round-trip bit-exactly.
class Tensor {
public:
    Tensor(Shape shape, std::vector<double> data, DType dtype = DType::Float64);

    static Tensor filled(Shape shape, double value, DType dtype = DType::Float64);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    DType dtype() const noexcept { return dtype_; }
    std::span<const double> data() const noexcept { return data_; }
    double operator[](std::size_t i) const { return data_[i]; }

    // Slice i along the leading dimension; a rank-1 tensor yields shape [1].
    Tensor sample(std::size_t i) const;
    std::span<const double> sample_span(std::size_t i) const;
    Shape sample_shape() const;

    Tensor reshaped(Shape shape) const;
    Tensor as(DType dtype) const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    DType dtype_;
    std::vector<double> data_;
};

// Channel-major, then row-major within each channel:
// index(c, h, w) = c·H·W + h·W + w. Rank-1 input is returned unchanged.
Tensor flatten_sample(const Tensor& t);

Matrix stack_samples(std::span<const Tensor> items);

// Stacks the samples of a batched tensor (leading dimension = sample index).
// Each sample must itself be a rank-1 or rank-3 layout.
Matrix stack_batch(const Tensor& batch);

enum class Role { Images, Contents, Styles, Factors };

const char* to_string(Role role);
Role role_from_string(const std::string& name);

// N aligned samples. Each present role is held as one batched tensor whose
// leading dimension is the sample index.
class SampleSet {
public:
    SampleSet(std::optional<Tensor> images, std::optional<Tensor> contents,
              std::optional<Tensor> styles, std::optional<Tensor> factors = std::nullopt);

    std::size_t n() const noexcept { return n_; }

    const std::optional<Tensor>& images() const noexcept { return images_; }
    const std::optional<Tensor>& contents() const noexcept { return contents_; }
    const std::optional<Tensor>& styles() const noexcept { return styles_; }
    const std::optional<Tensor>& factors() const noexcept { return factors_; }

    const std::optional<Tensor>& get(Role role) const;
    // Throws ShapeError naming the role when it is absent.
    const Tensor& require(Role role) const;

    SampleSet subset(std::span<const std::size_t> indices) const;

private:
    std::size_t n_ = 0;
    std::optional<Tensor> images_, contents_, styles_, factors_;
};

// Gathers rows of a batched tensor along its leading dimension.
Tensor gather(const Tensor& batch, std::span<const std::size_t> indices);

} // namespace csdis
