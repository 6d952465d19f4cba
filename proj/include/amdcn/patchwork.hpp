#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "amdcn/tensor.hpp"

namespace amdcn {

enum class PatchMode { random_train, tile_exact, dense_scan };

struct PatchPolicy {
    std::int64_t ph = 0; // 0 = full image height
    std::int64_t pw = 0; // 0 = full image width
    PatchMode mode = PatchMode::random_train;
    std::int64_t stride = 1;       // dense_scan only
    std::int64_t num_samples = 1;  // random_train only, per image
    bool flip_augment = false;
};

// output[c] = input[c] - channel_means[c]; inputs are [0,1] images [C,H,W].
Tensor normalize(const Tensor& image, const std::vector<scalar>& channel_means);
// Per-channel mean over a training split, in the given record order.
std::vector<scalar> compute_channel_means(const std::vector<const Tensor*>& images);

// Mirrors the x axis of a [C,H,W] or [H,W] tensor.
Tensor flip_lr(const Tensor& t);

struct PatchPair {
    Tensor image;   // [C,ph,pw]
    Tensor density; // [ph,pw]
};

// Cuts congruent image/density patches per the policy. random_train corners
// are uniform and deterministic given the seed; tile_exact yields the
// row-major exact partition; dense_scan yields clamped stride windows.
// flip_augment additionally emits the mirrored copy of every patch.
std::vector<PatchPair> sample_patches(const Tensor& image, const Tensor& density,
                                      const PatchPolicy& policy, std::uint64_t seed);

struct TileLayout {
    std::int64_t rows = 0;
    std::int64_t cols = 0;
};

// Exact partition into ph x pw tiles, row-major. Throws when dims do not
// divide (e.g. a dataset frame that does not match its advertised quadrant
// geometry) instead of cropping.
std::vector<Tensor> cut_tiles(const Tensor& image, std::int64_t ph, std::int64_t pw,
                              TileLayout* layout = nullptr);
// Exact inverse of cut_tiles: stitch(cut(x)) == x bit-for-bit.
Tensor stitch_tiles(const std::vector<Tensor>& tiles, TileLayout layout);

// Window start offsets covering [0, extent) with `size` windows at `stride`;
// the final window is clamped to end exactly at `extent`.
std::vector<std::int64_t> scan_positions(std::int64_t extent, std::int64_t size, std::int64_t stride);

// Sliding-window inference: runs predict_window on every ph x pw window of
// the [C,H,W] image, averaging overlapping predictions per pixel. Every
// pixel is covered at least once for stride <= patch dims. Optionally
// returns the per-pixel window counts.
Tensor dense_scan_map(const Tensor& image, std::int64_t ph, std::int64_t pw, std::int64_t stride,
                      const std::function<Tensor(const Tensor&)>& predict_window,
                      Tensor* coverage = nullptr);

struct PaddedImage {
    Tensor image; // [C,H',W'], source anchored at the origin, zero fill
    Tensor mask;  // [H',W'], 1 exactly on padded pixels
};

PaddedImage pad_and_mask(const Tensor& image, std::int64_t target_h, std::int64_t target_w);
// Zeroes map pixels where mask is set; never increases any pixel.
Tensor apply_suppression(const Tensor& map, const Tensor& mask);

// ---- dataset presets (per-dataset protocols as configuration) ----

enum class EvalProtocol { full_image, pad_suppress, tile_exact, dense_scan };
enum class Regime { fixed_sigma, ucsd_perspective, worldexpo_perspective };

std::string regime_name(Regime r);
Regime regime_from_name(const std::string& name);

struct DatasetPreset {
    std::string name;
    PatchPolicy train_policy;
    std::int64_t train_patches_total = 0; // 0 = one pass over the images
    EvalProtocol eval_protocol = EvalProtocol::full_image;
    std::int64_t pad_h = 0, pad_w = 0;       // pad_suppress target
    std::int64_t eval_ph = 0, eval_pw = 0;   // tile/dense-scan window
    std::int64_t eval_stride = 0;            // dense_scan
    Regime default_regime = Regime::fixed_sigma;
    scalar default_sigma = 15.0;
    scalar default_lr = 1e-4;
};

// ucf | trancos | ucsd | worldexpo | synthetic
const DatasetPreset& get_preset(const std::string& name);
std::vector<std::string> preset_names();

} // namespace amdcn
