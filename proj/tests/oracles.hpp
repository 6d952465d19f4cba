#pragma once

// Test-only reference implementations, written independently of src/ so the
// oracles cannot share a bug with the code under test.

#include <cmath>
#include <functional>
#include <vector>

#include "amdcn/random.hpp"
#include "amdcn/tensor.hpp"

namespace oracle {

using amdcn::Rng;
using amdcn::scalar;
using amdcn::Shape;
using amdcn::Tensor;

// Direct-sum same-padded dilated convolution, straight from the definition:
// out[b,f,y,x] = bias[f] + sum_{c,i,j} in[b,c, y+d(i-ch), x+d(j-cw)] * k[f,c,i,j]
inline Tensor direct_conv(const Tensor& in, const Tensor& k, const Tensor& bias, std::int64_t dilation) {
    const std::int64_t B = in.dim(0), C = in.dim(1), H = in.dim(2), W = in.dim(3);
    const std::int64_t F = k.dim(0), kh = k.dim(2), kw = k.dim(3);
    const std::int64_t ch = (kh - 1) / 2, cw = (kw - 1) / 2;
    Tensor out({B, F, H, W});
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t f = 0; f < F; ++f)
            for (std::int64_t y = 0; y < H; ++y)
                for (std::int64_t x = 0; x < W; ++x) {
                    scalar acc = bias[f];
                    for (std::int64_t c = 0; c < C; ++c)
                        for (std::int64_t i = 0; i < kh; ++i)
                            for (std::int64_t j = 0; j < kw; ++j) {
                                const std::int64_t yy = y + dilation * (i - ch);
                                const std::int64_t xx = x + dilation * (j - cw);
                                if (yy >= 0 && yy < H && xx >= 0 && xx < W) {
                                    acc += in.at4(b, c, yy, xx) * k.at4(f, c, i, j);
                                }
                            }
                    out.at4(b, f, y, x) = acc;
                }
    return out;
}

inline Tensor rand_tensor(const Shape& shape, Rng& rng, scalar lo = -1.0, scalar hi = 1.0) {
    Tensor t(shape);
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

// Central finite differences of a scalar function with respect to x.
inline Tensor numeric_grad(Tensor& x, const std::function<scalar()>& f, scalar h = 1e-5) {
    Tensor g(x.shape());
    for (std::int64_t i = 0; i < x.numel(); ++i) {
        const scalar keep = x[i];
        x[i] = keep + h;
        const scalar fp = f();
        x[i] = keep - h;
        const scalar fm = f();
        x[i] = keep;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

// |a - n| <= rtol * max(|a|, |n|), with an absolute floor for the finite
// difference noise around zero.
inline bool grads_close(const Tensor& analytic, const Tensor& numeric, scalar rtol = 1e-4,
                        scalar atol = 1e-7, scalar* worst = nullptr) {
    bool ok = true;
    for (std::int64_t i = 0; i < analytic.numel(); ++i) {
        const scalar diff = std::fabs(analytic[i] - numeric[i]);
        const scalar ref = std::max(std::fabs(analytic[i]), std::fabs(numeric[i]));
        const scalar rel = ref > 0.0 ? diff / ref : 0.0;
        if (worst && diff > atol) *worst = std::max(*worst, rel);
        if (diff > atol && rel > rtol) ok = false;
    }
    return ok;
}

inline scalar max_abs_diff(const Tensor& a, const Tensor& b) {
    scalar worst = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i) worst = std::max(worst, std::fabs(a[i] - b[i]));
    return worst;
}

} // namespace oracle
