#include "amdcn/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace amdcn {

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (shape[i] < 1) {
            throw ShapeError("tensor extent " + std::to_string(i) + " must be >= 1, got " +
                             std::to_string(shape[i]) + " in " + shape_str(shape));
        }
        n *= shape[i];
    }
    return n;
}

Tensor::Tensor(Shape shape, scalar fill)
    : shape_(std::move(shape)), data_(static_cast<std::size_t>(shape_numel(shape_)), fill) {}

Tensor::Tensor(Shape shape, std::vector<scalar> values) : shape_(std::move(shape)), data_(std::move(values)) {
    const std::int64_t expect = shape_numel(shape_);
    if (expect != static_cast<std::int64_t>(data_.size())) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + amdcn::shape_str(shape_));
    }
}

void Tensor::fill(scalar v) {
    std::fill(data_.begin(), data_.end(), v);
}

} // namespace amdcn
