#pragma once

#include <cstdint>
#include <string>

#include "amdcn/io.hpp"
#include "amdcn/tensor.hpp"

namespace amdcn {

// Synthetic counting scene: soft disks (cosine falloff, so the rendered
// shape differs from any supervision Gaussian) whose radius grows linearly
// down the image, r(y) = r_min + (r_max - r_min) * y / H, mimicking
// perspective scaling. The emitted perspective map is M(x,y) = r(y) / 0.2 in
// worldexpo_meters semantics, so a 0.2*M supervision kernel tracks the
// rendered object size.
struct SceneSpec {
    std::int64_t height = 64;
    std::int64_t width = 64;
    std::int64_t count_min = 5;
    std::int64_t count_max = 20;
    scalar r_min = 2.0;
    scalar r_max = 5.0;
    scalar noise_level = 0.05;
    std::uint64_t seed = 0;
};

void validate_scene_spec(const SceneSpec& spec);

// Deterministic given the seed (per-image derived streams). Rendered
// intensities are clipped to [0,1] and quantized to the 8-bit grid so that
// in-memory data equals what a written PGM reads back.
io::Dataset generate_scenes(const SceneSpec& spec, std::int64_t n_images);

// Writes `img_NNNN.{pgm,ann,pmap}` plus manifest.json into dir.
void write_dataset(const io::Dataset& dataset, const std::string& dir, const SceneSpec& spec);

} // namespace amdcn
