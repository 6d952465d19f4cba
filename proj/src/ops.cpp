#include "amdcn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "amdcn/parallel.hpp"

namespace amdcn {

ConvSpec ConvSpec::make(std::int64_t kh, std::int64_t kw, std::int64_t dilation,
                        std::int64_t in_channels, std::int64_t out_channels) {
    if (kh < 1 || kh % 2 == 0) {
        throw ShapeError("conv spec: kernel height must be odd and positive, got " + std::to_string(kh));
    }
    if (kw < 1 || kw % 2 == 0) {
        throw ShapeError("conv spec: kernel width must be odd and positive, got " + std::to_string(kw));
    }
    if (dilation < 1) {
        throw ShapeError("conv spec: dilation must be >= 1, got " + std::to_string(dilation));
    }
    if (in_channels < 1 || out_channels < 1) {
        throw ShapeError("conv spec: channel counts must be >= 1, got in=" + std::to_string(in_channels) +
                         " out=" + std::to_string(out_channels));
    }
    return ConvSpec{kh, kw, dilation, in_channels, out_channels};
}

namespace ops {
namespace {

void check_conv_args(const Tensor& input, const Tensor& kernel, const Tensor& bias, const ConvSpec& spec) {
    if (input.rank() != 4) {
        throw ShapeError("conv2d: input must be rank 4 (B,C,H,W), got " + input.shape_str());
    }
    if (kernel.rank() != 4) {
        throw ShapeError("conv2d: kernel must be rank 4 (out,in,kh,kw), got " + kernel.shape_str());
    }
    if (input.dim(1) != spec.in_channels) {
        throw ShapeError("conv2d: input channel dim is " + std::to_string(input.dim(1)) +
                         " but spec.in_channels is " + std::to_string(spec.in_channels));
    }
    if (kernel.dim(0) != spec.out_channels || kernel.dim(1) != spec.in_channels ||
        kernel.dim(2) != spec.kh || kernel.dim(3) != spec.kw) {
        throw ShapeError("conv2d: kernel shape " + kernel.shape_str() + " does not match spec [" +
                         std::to_string(spec.out_channels) + "," + std::to_string(spec.in_channels) + "," +
                         std::to_string(spec.kh) + "," + std::to_string(spec.kw) + "]");
    }
    if (bias.rank() != 1 || bias.dim(0) != spec.out_channels) {
        throw ShapeError("conv2d: bias shape " + bias.shape_str() + " does not match out_channels " +
                         std::to_string(spec.out_channels));
    }
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* who) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(who) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
}

} // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, const ConvSpec& spec) {
    check_conv_args(input, kernel, bias, spec);
    const std::int64_t B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const std::int64_t F = spec.out_channels, kh = spec.kh, kw = spec.kw, d = spec.dilation;
    const std::int64_t ch = (kh - 1) / 2, cw = (kw - 1) / 2;

    Tensor out({B, F, H, W});
    const scalar* in = input.data();
    const scalar* k = kernel.data();
    const scalar* bs = bias.data();
    scalar* o = out.data();
    const std::int64_t plane = H * W;

    parallel_for(B * F, C * kh * kw * plane, [&](std::int64_t p) {
        const std::int64_t b = p / F, f = p % F;
        scalar* op = o + p * plane;
        std::fill(op, op + plane, bs[f]);
        for (std::int64_t ci = 0; ci < C; ++ci) {
            const scalar* ip = in + (b * C + ci) * plane;
            const scalar* kp = k + (f * C + ci) * kh * kw;
            for (std::int64_t i = 0; i < kh; ++i) {
                const std::int64_t dy = d * (i - ch);
                const std::int64_t y0 = std::max<std::int64_t>(0, -dy);
                const std::int64_t y1 = std::min<std::int64_t>(H, H - dy);
                for (std::int64_t j = 0; j < kw; ++j) {
                    const scalar w = kp[i * kw + j];
                    if (w == 0.0) continue;
                    const std::int64_t dx = d * (j - cw);
                    const std::int64_t x0 = std::max<std::int64_t>(0, -dx);
                    const std::int64_t x1 = std::min<std::int64_t>(W, W - dx);
                    for (std::int64_t y = y0; y < y1; ++y) {
                        scalar* orow = op + y * W;
                        const scalar* irow = ip + (y + dy) * W + dx;
                        for (std::int64_t x = x0; x < x1; ++x) orow[x] += w * irow[x];
                    }
                }
            }
        }
    });
    return out;
}

Tensor conv2d_naive(const Tensor& input, const Tensor& kernel, const Tensor& bias, const ConvSpec& spec) {
    check_conv_args(input, kernel, bias, spec);
    const std::int64_t B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const std::int64_t F = spec.out_channels, kh = spec.kh, kw = spec.kw, d = spec.dilation;
    const std::int64_t ch = (kh - 1) / 2, cw = (kw - 1) / 2;

    Tensor out({B, F, H, W});
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t f = 0; f < F; ++f)
            for (std::int64_t y = 0; y < H; ++y)
                for (std::int64_t x = 0; x < W; ++x) {
                    scalar acc = bias[f];
                    for (std::int64_t ci = 0; ci < C; ++ci)
                        for (std::int64_t i = 0; i < kh; ++i)
                            for (std::int64_t j = 0; j < kw; ++j) {
                                const std::int64_t yy = y + d * (i - ch);
                                const std::int64_t xx = x + d * (j - cw);
                                if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
                                acc += input.at4(b, ci, yy, xx) * kernel.at4(f, ci, i, j);
                            }
                    out.at4(b, f, y, x) = acc;
                }
    return out;
}

ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& saved_input, const Tensor& kernel,
                          const ConvSpec& spec) {
    check_conv_args(saved_input, kernel, Tensor({spec.out_channels}), spec);
    const std::int64_t B = saved_input.dim(0), C = saved_input.dim(1);
    const std::int64_t H = saved_input.dim(2), W = saved_input.dim(3);
    const std::int64_t F = spec.out_channels, kh = spec.kh, kw = spec.kw, d = spec.dilation;
    const std::int64_t ch = (kh - 1) / 2, cw = (kw - 1) / 2;
    if (grad_out.rank() != 4 || grad_out.dim(0) != B || grad_out.dim(1) != F || grad_out.dim(2) != H ||
        grad_out.dim(3) != W) {
        throw ShapeError("conv2d_backward: grad_out shape " + grad_out.shape_str() +
                         " does not match forward output [" + std::to_string(B) + "," + std::to_string(F) +
                         "," + std::to_string(H) + "," + std::to_string(W) + "]");
    }

    ConvGrads g;

    // d(out)/d(input): same-padded dilated conv of grad_out with the kernel
    // flipped in both spatial axes and transposed in (out,in).
    Tensor flipped({C, F, kh, kw});
    for (std::int64_t f = 0; f < F; ++f)
        for (std::int64_t ci = 0; ci < C; ++ci)
            for (std::int64_t i = 0; i < kh; ++i)
                for (std::int64_t j = 0; j < kw; ++j)
                    flipped.at4(ci, f, i, j) = kernel.at4(f, ci, kh - 1 - i, kw - 1 - j);
    const ConvSpec tspec{kh, kw, d, F, C};
    g.input = conv2d(grad_out, flipped, Tensor({C}), tspec);

    // d(out)/d(kernel): each (f,ci) pair owns its kh*kw entries, so the
    // parallel partition writes disjoint slots.
    g.kernel = Tensor({F, C, kh, kw});
    const scalar* go = grad_out.data();
    const scalar* in = saved_input.data();
    const std::int64_t plane = H * W;
    parallel_for(F * C, kh * kw * B * plane, [&](std::int64_t p) {
        const std::int64_t f = p / C, ci = p % C;
        for (std::int64_t i = 0; i < kh; ++i) {
            const std::int64_t dy = d * (i - ch);
            const std::int64_t y0 = std::max<std::int64_t>(0, -dy);
            const std::int64_t y1 = std::min<std::int64_t>(H, H - dy);
            for (std::int64_t j = 0; j < kw; ++j) {
                const std::int64_t dx = d * (j - cw);
                const std::int64_t x0 = std::max<std::int64_t>(0, -dx);
                const std::int64_t x1 = std::min<std::int64_t>(W, W - dx);
                scalar acc = 0.0;
                for (std::int64_t b = 0; b < B; ++b) {
                    const scalar* gop = go + (b * F + f) * plane;
                    const scalar* ip = in + (b * C + ci) * plane;
                    for (std::int64_t y = y0; y < y1; ++y) {
                        const scalar* grow = gop + y * W;
                        const scalar* irow = ip + (y + dy) * W + dx;
                        for (std::int64_t x = x0; x < x1; ++x) acc += grow[x] * irow[x];
                    }
                }
                g.kernel.at4(f, ci, i, j) = acc;
            }
        }
    });

    g.bias = Tensor({F});
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t f = 0; f < F; ++f) {
            const scalar* gop = go + (b * F + f) * plane;
            scalar acc = 0.0;
            for (std::int64_t i = 0; i < plane; ++i) acc += gop[i];
            g.bias[f] += acc;
        }
    return g;
}

Tensor relu(const Tensor& input) {
    Tensor out(input.shape());
    const scalar* in = input.data();
    scalar* o = out.data();
    const std::int64_t n = input.numel();
    for (std::int64_t i = 0; i < n; ++i) o[i] = in[i] > 0.0 ? in[i] : 0.0;
    return out;
}

Tensor relu_backward(const Tensor& grad_out, const Tensor& saved_input) {
    check_same_shape(grad_out, saved_input, "relu_backward");
    Tensor out(grad_out.shape());
    const scalar* g = grad_out.data();
    const scalar* in = saved_input.data();
    scalar* o = out.data();
    const std::int64_t n = grad_out.numel();
    for (std::int64_t i = 0; i < n; ++i) o[i] = in[i] > 0.0 ? g[i] : 0.0;
    return out;
}

Tensor concat_channels(const std::vector<Tensor>& inputs) {
    if (inputs.empty()) throw ShapeError("concat_channels: no inputs");
    const Tensor& first = inputs.front();
    if (first.rank() != 4) {
        throw ShapeError("concat_channels: inputs must be rank 4, got " + first.shape_str());
    }
    const std::int64_t B = first.dim(0), H = first.dim(2), W = first.dim(3);
    std::int64_t total_c = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Tensor& t = inputs[i];
        if (t.rank() != 4 || t.dim(0) != B || t.dim(2) != H || t.dim(3) != W) {
            throw ShapeError("concat_channels: input " + std::to_string(i) + " shape " + t.shape_str() +
                             " does not agree with " + first.shape_str() + " on batch/spatial dims");
        }
        total_c += t.dim(1);
    }
    Tensor out({B, total_c, H, W});
    const std::int64_t plane = H * W;
    for (std::int64_t b = 0; b < B; ++b) {
        std::int64_t co = 0;
        for (const Tensor& t : inputs) {
            const std::int64_t c = t.dim(1);
            std::copy(t.data() + b * c * plane, t.data() + (b + 1) * c * plane,
                      out.data() + (b * total_c + co) * plane);
            co += c;
        }
    }
    return out;
}

std::vector<Tensor> concat_channels_backward(const Tensor& grad_out,
                                             const std::vector<std::int64_t>& channel_counts) {
    const std::int64_t B = grad_out.dim(0), H = grad_out.dim(2), W = grad_out.dim(3);
    std::int64_t total_c = 0;
    for (std::int64_t c : channel_counts) total_c += c;
    if (total_c != grad_out.dim(1)) {
        throw ShapeError("concat_channels_backward: channel counts sum to " + std::to_string(total_c) +
                         " but grad_out has " + std::to_string(grad_out.dim(1)) + " channels");
    }
    std::vector<Tensor> grads;
    grads.reserve(channel_counts.size());
    const std::int64_t plane = H * W;
    std::int64_t co = 0;
    for (std::int64_t c : channel_counts) {
        Tensor g({B, c, H, W});
        for (std::int64_t b = 0; b < B; ++b) {
            std::copy(grad_out.data() + (b * total_c + co) * plane,
                      grad_out.data() + (b * total_c + co + c) * plane, g.data() + b * c * plane);
        }
        grads.push_back(std::move(g));
        co += c;
    }
    return grads;
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out(a.shape());
    for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor out(a.shape());
    for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] - b[i];
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    Tensor out(a.shape());
    for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] * b[i];
    return out;
}

Tensor add(const Tensor& a, scalar b) {
    Tensor out(a.shape());
    for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b;
    return out;
}

Tensor mul(const Tensor& a, scalar b) {
    Tensor out(a.shape());
    for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] * b;
    return out;
}

Tensor abs(const Tensor& a) {
    Tensor out(a.shape());
    for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = std::fabs(a[i]);
    return out;
}

scalar reduce_sum(const Tensor& a) {
    scalar acc = 0.0;
    const scalar* p = a.data();
    for (std::int64_t i = 0; i < a.numel(); ++i) acc += p[i];
    return acc;
}

Tensor mul_backward(const Tensor& grad_out, const Tensor& other_factor) {
    return mul(grad_out, other_factor);
}

Tensor abs_backward(const Tensor& grad_out, const Tensor& saved_input) {
    check_same_shape(grad_out, saved_input, "abs_backward");
    Tensor out(grad_out.shape());
    for (std::int64_t i = 0; i < grad_out.numel(); ++i) {
        // subgradient at 0 fixed to 0
        out[i] = saved_input[i] > 0.0 ? grad_out[i] : (saved_input[i] < 0.0 ? -grad_out[i] : 0.0);
    }
    return out;
}

Tensor reduce_sum_backward(scalar grad_out, const Shape& input_shape) {
    return Tensor::full(input_shape, grad_out);
}

} // namespace ops
} // namespace amdcn
