#pragma once

#include <cstdint>
#include <vector>

#include "amdcn/tensor.hpp"

namespace amdcn {

// Same-padded dilated 2-d convolution layer description. Output spatial dims
// always equal input spatial dims; padding per side is dilation*(k-1)/2,
// which is why only odd kernel extents are accepted.
struct ConvSpec {
    std::int64_t kh = 3;
    std::int64_t kw = 3;
    std::int64_t dilation = 1;
    std::int64_t in_channels = 1;
    std::int64_t out_channels = 1;

    static ConvSpec make(std::int64_t kh, std::int64_t kw, std::int64_t dilation,
                         std::int64_t in_channels, std::int64_t out_channels);

    std::int64_t pad_h() const { return dilation * (kh - 1) / 2; }
    std::int64_t pad_w() const { return dilation * (kw - 1) / 2; }
    std::int64_t parameter_count() const { return out_channels * in_channels * kh * kw + out_channels; }
};

namespace ops {

// Fast path: per-output-plane accumulation of weight-scaled shifted input
// rows. Bitwise deterministic for any thread count.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, const ConvSpec& spec);

// Reference path: direct per-pixel tap sum. Slow; kept as the built-in
// correctness referee for the fast path.
Tensor conv2d_naive(const Tensor& input, const Tensor& kernel, const Tensor& bias, const ConvSpec& spec);

struct ConvGrads {
    Tensor input;  // [B,Cin,H,W]
    Tensor kernel; // [Cout,Cin,kh,kw]
    Tensor bias;   // [Cout]
};

ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& saved_input, const Tensor& kernel,
                          const ConvSpec& spec);

Tensor relu(const Tensor& input);
// Subgradient at exactly 0 is 0.
Tensor relu_backward(const Tensor& grad_out, const Tensor& saved_input);

// Channel-axis concatenation of [B,Ci,H,W] tensors, in argument order.
Tensor concat_channels(const std::vector<Tensor>& inputs);
std::vector<Tensor> concat_channels_backward(const Tensor& grad_out,
                                             const std::vector<std::int64_t>& channel_counts);

// Elementwise arithmetic; shapes must match exactly (scalar variants below).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, scalar b);
Tensor mul(const Tensor& a, scalar b);
Tensor abs(const Tensor& a);

scalar reduce_sum(const Tensor& a);

// Adjoints. mul_backward returns grad wrt the first factor.
Tensor mul_backward(const Tensor& grad_out, const Tensor& other_factor);
Tensor abs_backward(const Tensor& grad_out, const Tensor& saved_input);
Tensor reduce_sum_backward(scalar grad_out, const Shape& input_shape);

} // namespace ops
} // namespace amdcn
