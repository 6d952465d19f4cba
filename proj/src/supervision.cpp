#include "amdcn/supervision.hpp"

#include <algorithm>
#include <cmath>

namespace amdcn {

void validate_annotations(const PointAnnotations& ann) {
    if (ann.height < 1 || ann.width < 1) {
        throw DataError("annotations: image size must be positive, got " + std::to_string(ann.height) +
                        "x" + std::to_string(ann.width));
    }
    for (std::size_t i = 0; i < ann.points.size(); ++i) {
        const Point2& p = ann.points[i];
        if (!(p.x >= 0.0 && p.x < static_cast<scalar>(ann.width)) ||
            !(p.y >= 0.0 && p.y < static_cast<scalar>(ann.height))) {
            throw DataError("annotations: point " + std::to_string(i) + " (" + std::to_string(p.x) + "," +
                            std::to_string(p.y) + ") lies outside the " + std::to_string(ann.width) + "x" +
                            std::to_string(ann.height) + " image");
        }
    }
}

std::string perspective_semantics_name(PerspectiveSemantics s) {
    return s == PerspectiveSemantics::ucsd_divisor ? "ucsd_divisor" : "worldexpo_meters";
}

PerspectiveSemantics perspective_semantics_from_name(const std::string& name) {
    if (name == "ucsd_divisor") return PerspectiveSemantics::ucsd_divisor;
    if (name == "worldexpo_meters") return PerspectiveSemantics::worldexpo_meters;
    throw DataError("perspective map: unknown semantics '" + name + "'");
}

void validate_perspective(const PerspectiveMap& map, std::int64_t height, std::int64_t width) {
    if (map.values.rank() != 2 || map.values.dim(0) != height || map.values.dim(1) != width) {
        throw DataError("perspective map: dims " + map.values.shape_str() + " do not match image " +
                        std::to_string(height) + "x" + std::to_string(width));
    }
    for (std::int64_t i = 0; i < map.values.numel(); ++i) {
        if (!(map.values[i] > 0.0) || !std::isfinite(map.values[i])) {
            throw DataError("perspective map: value " + std::to_string(map.values[i]) +
                            " at flat index " + std::to_string(i) + " must be positive and finite");
        }
    }
}

namespace {

// Axis-aligned Gaussian at real-valued center, evaluated at pixel centers
// over a +-4 sigma window, unit-normalized over the full window, then added
// clipped to the image.
void add_gaussian(Tensor& map, scalar cx, scalar cy, scalar sigma_x, scalar sigma_y, scalar mass) {
    const std::int64_t H = map.dim(0), W = map.dim(1);
    const std::int64_t x0 = static_cast<std::int64_t>(std::floor(cx - 4.0 * sigma_x));
    const std::int64_t x1 = static_cast<std::int64_t>(std::ceil(cx + 4.0 * sigma_x));
    const std::int64_t y0 = static_cast<std::int64_t>(std::floor(cy - 4.0 * sigma_y));
    const std::int64_t y1 = static_cast<std::int64_t>(std::ceil(cy + 4.0 * sigma_y));
    const scalar inv2sx = 1.0 / (2.0 * sigma_x * sigma_x);
    const scalar inv2sy = 1.0 / (2.0 * sigma_y * sigma_y);

    scalar total = 0.0;
    for (std::int64_t y = y0; y <= y1; ++y) {
        const scalar dy = static_cast<scalar>(y) - cy;
        for (std::int64_t x = x0; x <= x1; ++x) {
            const scalar dx = static_cast<scalar>(x) - cx;
            total += std::exp(-(dx * dx * inv2sx + dy * dy * inv2sy));
        }
    }
    const scalar norm = mass / total;
    for (std::int64_t y = std::max<std::int64_t>(y0, 0); y <= std::min<std::int64_t>(y1, H - 1); ++y) {
        const scalar dy = static_cast<scalar>(y) - cy;
        for (std::int64_t x = std::max<std::int64_t>(x0, 0); x <= std::min<std::int64_t>(x1, W - 1); ++x) {
            const scalar dx = static_cast<scalar>(x) - cx;
            map.at2(y, x) += norm * std::exp(-(dx * dx * inv2sx + dy * dy * inv2sy));
        }
    }
}

std::int64_t nearest_pixel(scalar v, std::int64_t extent) {
    return std::clamp<std::int64_t>(static_cast<std::int64_t>(std::llround(v)), 0, extent - 1);
}

} // namespace

Tensor gaussian_density(const PointAnnotations& ann, scalar sigma) {
    validate_annotations(ann);
    if (!(sigma > 0.0)) throw DataError("gaussian_density: sigma must be positive");
    Tensor map({ann.height, ann.width});
    for (const Point2& p : ann.points) add_gaussian(map, p.x, p.y, sigma, sigma, 1.0);
    return map;
}

Tensor ucsd_density(const PointAnnotations& ann, scalar sigma_base, const PerspectiveMap* perspective) {
    validate_annotations(ann);
    if (!(sigma_base > 0.0)) throw DataError("ucsd_density: sigma_base must be positive");
    if (perspective) {
        if (perspective->semantics != PerspectiveSemantics::ucsd_divisor) {
            throw DataError("ucsd_density: perspective map must have ucsd_divisor semantics");
        }
        validate_perspective(*perspective, ann.height, ann.width);
    }
    Tensor map({ann.height, ann.width});
    const scalar base_var = sigma_base * sigma_base;
    for (const Point2& p : ann.points) {
        scalar variance = base_var;
        if (perspective) {
            const scalar combined =
                perspective->values.at2(nearest_pixel(p.y, ann.height), nearest_pixel(p.x, ann.width));
            variance = base_var / std::sqrt(combined);
        }
        const scalar sigma = std::sqrt(variance);
        add_gaussian(map, p.x, p.y, sigma, sigma, 1.0);
    }
    return map;
}

Tensor worldexpo_density(const PointAnnotations& ann, const PerspectiveMap& perspective) {
    validate_annotations(ann);
    if (perspective.semantics != PerspectiveSemantics::worldexpo_meters) {
        throw DataError("worldexpo_density: perspective map must have worldexpo_meters semantics");
    }
    validate_perspective(perspective, ann.height, ann.width);
    Tensor map({ann.height, ann.width});
    for (const Point2& p : ann.points) {
        const scalar m =
            perspective.values.at2(nearest_pixel(p.y, ann.height), nearest_pixel(p.x, ann.width));
        const scalar sigma_h = 0.2 * m;
        // body center sits 0.875 m below the head; may fall outside and get clipped
        const scalar body_y = p.y + 0.875 * m;
        add_gaussian(map, p.x, p.y, sigma_h, sigma_h, 0.5);
        add_gaussian(map, p.x, body_y, 0.2 * m, 0.5 * m, 0.5);
    }
    return map;
}

Tensor scale_targets(const Tensor& density, scalar gamma) {
    if (!(gamma > 0.0)) throw DataError("scale_targets: gamma must be positive");
    Tensor out(density.shape());
    for (std::int64_t i = 0; i < density.numel(); ++i) out[i] = density[i] * gamma;
    return out;
}

} // namespace amdcn
