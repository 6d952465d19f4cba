#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "amdcn/errors.hpp"

namespace amdcn {

using scalar = double;
using Shape = std::vector<std::int64_t>;

std::string shape_str(const Shape& shape);

// Dense n-d array of doubles, row-major over `shape`.
//
// Layout conventions used throughout:
//   activations  (batch, channels, height, width)
//   kernels      (out_channels, in_channels, kh, kw)
//   grids        (height, width)
// Density maps are rank-2 grids in true-density units (integral == count).
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, scalar fill = 0.0);
    Tensor(Shape shape, std::vector<scalar> values);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor full(Shape shape, scalar v) { return Tensor(std::move(shape), v); }

    const Shape& shape() const { return shape_; }
    std::int64_t dim(std::size_t i) const { return shape_[i]; }
    std::size_t rank() const { return shape_.size(); }
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    scalar* data() { return data_.data(); }
    const scalar* data() const { return data_.data(); }
    std::vector<scalar>& values() { return data_; }
    const std::vector<scalar>& values() const { return data_; }

    scalar& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    scalar operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    // Unchecked rank-specific accessors.
    scalar& at2(std::int64_t y, std::int64_t x) {
        return data_[static_cast<std::size_t>(y * shape_[1] + x)];
    }
    scalar at2(std::int64_t y, std::int64_t x) const {
        return data_[static_cast<std::size_t>(y * shape_[1] + x)];
    }
    scalar& at4(std::int64_t b, std::int64_t c, std::int64_t y, std::int64_t x) {
        return data_[static_cast<std::size_t>(((b * shape_[1] + c) * shape_[2] + y) * shape_[3] + x)];
    }
    scalar at4(std::int64_t b, std::int64_t c, std::int64_t y, std::int64_t x) const {
        return data_[static_cast<std::size_t>(((b * shape_[1] + c) * shape_[2] + y) * shape_[3] + x)];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    void fill(scalar v);
    std::string shape_str() const { return amdcn::shape_str(shape_); }

private:
    Shape shape_;
    std::vector<scalar> data_;
};

// Validates all extents >= 1 and returns their product.
std::int64_t shape_numel(const Shape& shape);

} // namespace amdcn
