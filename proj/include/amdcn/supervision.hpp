#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "amdcn/tensor.hpp"

namespace amdcn {

struct Point2 {
    scalar x = 0.0; // column, pixels
    scalar y = 0.0; // row, pixels
};

// Dot annotations (object centers) for one image.
struct PointAnnotations {
    std::vector<Point2> points;
    std::int64_t height = 0;
    std::int64_t width = 0;
};

void validate_annotations(const PointAnnotations& ann);

enum class PerspectiveSemantics {
    ucsd_divisor,     // combined h*v scale; sqrt gives the per-axis covariance divisor
    worldexpo_meters, // M(x) = pixels per meter at x
};

std::string perspective_semantics_name(PerspectiveSemantics s);
PerspectiveSemantics perspective_semantics_from_name(const std::string& name);

// Per-pixel positive scale field M(x).
struct PerspectiveMap {
    Tensor values; // [H,W], all > 0
    PerspectiveSemantics semantics = PerspectiveSemantics::worldexpo_meters;
};

void validate_perspective(const PerspectiveMap& map, std::int64_t height, std::int64_t width);

// Density maps are rank-2 [H,W] tensors in true-density units: nonnegative,
// integrating to the object count (minus whatever mass border clipping cuts).
//
// All three generators share the same kernel placement rule: each Gaussian is
// evaluated at integer pixel coordinates over a +-4 sigma window (per axis),
// normalized to unit mass over that un-clipped window, then the in-bounds
// part is added. Interior objects therefore contribute exactly their mass;
// border objects lose the clipped part.

// Isotropic Gaussian of the given sigma per object.
Tensor gaussian_density(const PointAnnotations& ann, scalar sigma);

// Covariance sigma_base^2 * I per object (default variance 8). When a
// perspective map is given its combined value P at the object pixel divides
// the covariance via m = sqrt(P): cov = sigma_base^2 / m.
Tensor ucsd_density(const PointAnnotations& ann, scalar sigma_base,
                    const PerspectiveMap* perspective);
inline Tensor ucsd_density(const PointAnnotations& ann, const PerspectiveMap* perspective = nullptr) {
    return ucsd_density(ann, std::sqrt(8.0), perspective);
}

// Head + body kernel: isotropic head N(x, 0.2 M(x)), body centered
// 0.875 M(x) pixels below the head with sigma_x = 0.2 M(x), sigma_y = 0.5 M(x);
// each person contributes (head + body) / 2, i.e. total mass 1.
Tensor worldexpo_density(const PointAnnotations& ann, const PerspectiveMap& perspective);

// Elementwise multiply by gamma, producing network-space targets.
Tensor scale_targets(const Tensor& density, scalar gamma);

} // namespace amdcn
