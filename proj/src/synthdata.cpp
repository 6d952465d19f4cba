#include "amdcn/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "amdcn/random.hpp"

namespace amdcn {

namespace fs = std::filesystem;

void validate_scene_spec(const SceneSpec& spec) {
    if (spec.height < 8 || spec.width < 8) {
        throw UsageError("scene spec: image size must be at least 8x8");
    }
    if (spec.count_min < 0 || spec.count_min > spec.count_max) {
        throw UsageError("scene spec: need 0 <= count_min <= count_max, got " +
                         std::to_string(spec.count_min) + ":" + std::to_string(spec.count_max));
    }
    if (!(spec.r_min > 0.0) || spec.r_min > spec.r_max) {
        throw UsageError("scene spec: need 0 < r_min <= r_max");
    }
    if (spec.noise_level < 0.0) throw UsageError("scene spec: noise level must be >= 0");
    // packing limit: reject counts that could not plausibly fit the frame
    const scalar area = static_cast<scalar>(spec.height * spec.width);
    if (static_cast<scalar>(spec.count_max) * spec.r_max * spec.r_max > area / 4.0) {
        throw UsageError("scene spec: count_max " + std::to_string(spec.count_max) +
                         " exceeds packable density for r_max " + std::to_string(spec.r_max) + " on " +
                         std::to_string(spec.height) + "x" + std::to_string(spec.width));
    }
}

namespace {

scalar quantize8(scalar v) {
    return std::lround(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
}

io::DatasetRecord render_scene(const SceneSpec& spec, std::int64_t index) {
    Rng rng(Rng::mix(spec.seed, static_cast<std::uint64_t>(index)));
    const std::int64_t H = spec.height, W = spec.width;

    io::DatasetRecord rec;
    char stem[32];
    std::snprintf(stem, sizeof(stem), "img_%04lld", static_cast<long long>(index));
    rec.stem = stem;

    const std::int64_t count =
        spec.count_min + static_cast<std::int64_t>(rng.next_below(
                             static_cast<std::uint64_t>(spec.count_max - spec.count_min + 1)));

    Tensor intensity({H, W});
    rec.annotations.height = H;
    rec.annotations.width = W;
    for (std::int64_t i = 0; i < count; ++i) {
        const scalar cx = rng.uniform(0.0, static_cast<scalar>(W - 1));
        const scalar cy = rng.uniform(0.0, static_cast<scalar>(H - 1));
        rec.annotations.points.push_back({cx, cy});
        const scalar r = spec.r_min + (spec.r_max - spec.r_min) * cy / static_cast<scalar>(H);
        const std::int64_t y0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(cy - r)));
        const std::int64_t y1 = std::min<std::int64_t>(H - 1, static_cast<std::int64_t>(std::ceil(cy + r)));
        const std::int64_t x0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(cx - r)));
        const std::int64_t x1 = std::min<std::int64_t>(W - 1, static_cast<std::int64_t>(std::ceil(cx + r)));
        for (std::int64_t y = y0; y <= y1; ++y)
            for (std::int64_t x = x0; x <= x1; ++x) {
                const scalar d = std::hypot(static_cast<scalar>(x) - cx, static_cast<scalar>(y) - cy);
                if (d <= r) intensity.at2(y, x) += 0.5 * (1.0 + std::cos(M_PI * d / r));
            }
    }
    if (spec.noise_level > 0.0) {
        for (std::int64_t i = 0; i < intensity.numel(); ++i) {
            intensity[i] += spec.noise_level * rng.next_double();
        }
    }

    rec.image = Tensor({1, H, W});
    for (std::int64_t i = 0; i < intensity.numel(); ++i) rec.image[i] = quantize8(intensity[i]);

    PerspectiveMap pmap;
    pmap.semantics = PerspectiveSemantics::worldexpo_meters;
    pmap.values = Tensor({H, W});
    for (std::int64_t y = 0; y < H; ++y) {
        const scalar r = spec.r_min + (spec.r_max - spec.r_min) * static_cast<scalar>(y) / static_cast<scalar>(H);
        for (std::int64_t x = 0; x < W; ++x) pmap.values.at2(y, x) = r / 0.2;
    }
    rec.perspective = std::move(pmap);
    return rec;
}

} // namespace

io::Dataset generate_scenes(const SceneSpec& spec, std::int64_t n_images) {
    validate_scene_spec(spec);
    if (n_images < 1) throw UsageError("generate_scenes: need at least one image");
    io::Dataset ds;
    ds.records.reserve(static_cast<std::size_t>(n_images));
    for (std::int64_t i = 0; i < n_images; ++i) ds.records.push_back(render_scene(spec, i));
    return ds;
}

void write_dataset(const io::Dataset& dataset, const std::string& dir, const SceneSpec& spec) {
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["generator"] = "amdcn synth";
    manifest["seed"] = spec.seed;
    manifest["scene"] = {{"height", spec.height},   {"width", spec.width},
                         {"count_min", spec.count_min}, {"count_max", spec.count_max},
                         {"r_min", spec.r_min},     {"r_max", spec.r_max},
                         {"noise_level", spec.noise_level}};
    nlohmann::json images = nlohmann::json::array();
    for (const io::DatasetRecord& rec : dataset.records) {
        io::write_pgm((fs::path(dir) / (rec.stem + ".pgm")).string(), rec.image);
        io::write_annotations((fs::path(dir) / (rec.stem + ".ann")).string(), rec.annotations);
        if (rec.perspective) {
            io::write_perspective((fs::path(dir) / (rec.stem + ".pmap")).string(), *rec.perspective);
        }
        images.push_back(rec.stem);
    }
    manifest["images"] = images;
    std::ofstream f(fs::path(dir) / "manifest.json");
    if (!f) throw DataError("write_dataset: cannot write manifest in '" + dir + "'");
    f << manifest.dump(2) << "\n";
}

} // namespace amdcn
