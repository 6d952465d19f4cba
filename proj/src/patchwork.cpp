#include "amdcn/patchwork.hpp"

#include <algorithm>
#include <cmath>

#include "amdcn/random.hpp"

namespace amdcn {

Tensor normalize(const Tensor& image, const std::vector<scalar>& channel_means) {
    if (image.rank() != 3) {
        throw ShapeError("normalize: expected [C,H,W], got " + image.shape_str());
    }
    if (static_cast<std::int64_t>(channel_means.size()) != image.dim(0)) {
        throw ShapeError("normalize: " + std::to_string(channel_means.size()) + " channel means for " +
                         std::to_string(image.dim(0)) + " channels");
    }
    Tensor out(image.shape());
    const std::int64_t plane = image.dim(1) * image.dim(2);
    for (std::int64_t c = 0; c < image.dim(0); ++c) {
        const scalar m = channel_means[static_cast<std::size_t>(c)];
        for (std::int64_t i = 0; i < plane; ++i) out[c * plane + i] = image[c * plane + i] - m;
    }
    return out;
}

std::vector<scalar> compute_channel_means(const std::vector<const Tensor*>& images) {
    if (images.empty()) throw DataError("compute_channel_means: empty image list");
    const std::int64_t C = images.front()->dim(0);
    std::vector<scalar> sums(static_cast<std::size_t>(C), 0.0);
    std::vector<std::int64_t> counts(static_cast<std::size_t>(C), 0);
    for (const Tensor* img : images) {
        if (img->rank() != 3 || img->dim(0) != C) {
            throw ShapeError("compute_channel_means: inconsistent image shape " + img->shape_str());
        }
        const std::int64_t plane = img->dim(1) * img->dim(2);
        for (std::int64_t c = 0; c < C; ++c) {
            scalar acc = 0.0;
            const scalar* p = img->data() + c * plane;
            for (std::int64_t i = 0; i < plane; ++i) acc += p[i];
            sums[static_cast<std::size_t>(c)] += acc;
            counts[static_cast<std::size_t>(c)] += plane;
        }
    }
    std::vector<scalar> means(static_cast<std::size_t>(C));
    for (std::int64_t c = 0; c < C; ++c) {
        means[static_cast<std::size_t>(c)] =
            sums[static_cast<std::size_t>(c)] / static_cast<scalar>(counts[static_cast<std::size_t>(c)]);
    }
    return means;
}

Tensor flip_lr(const Tensor& t) {
    if (t.rank() == 2) {
        const std::int64_t H = t.dim(0), W = t.dim(1);
        Tensor out({H, W});
        for (std::int64_t y = 0; y < H; ++y)
            for (std::int64_t x = 0; x < W; ++x) out.at2(y, x) = t.at2(y, W - 1 - x);
        return out;
    }
    if (t.rank() == 3) {
        const std::int64_t C = t.dim(0), H = t.dim(1), W = t.dim(2);
        Tensor out({C, H, W});
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t y = 0; y < H; ++y)
                for (std::int64_t x = 0; x < W; ++x)
                    out[(c * H + y) * W + x] = t[(c * H + y) * W + (W - 1 - x)];
        return out;
    }
    throw ShapeError("flip_lr: expected [H,W] or [C,H,W], got " + t.shape_str());
}

namespace {

Tensor crop3(const Tensor& image, std::int64_t y0, std::int64_t x0, std::int64_t ph, std::int64_t pw) {
    const std::int64_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
    (void)H;
    Tensor out({C, ph, pw});
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t y = 0; y < ph; ++y) {
            const scalar* src = image.data() + (c * image.dim(1) + y0 + y) * W + x0;
            std::copy(src, src + pw, out.data() + (c * ph + y) * pw);
        }
    return out;
}

Tensor crop2(const Tensor& grid, std::int64_t y0, std::int64_t x0, std::int64_t ph, std::int64_t pw) {
    Tensor out({ph, pw});
    const std::int64_t W = grid.dim(1);
    for (std::int64_t y = 0; y < ph; ++y) {
        const scalar* src = grid.data() + (y0 + y) * W + x0;
        std::copy(src, src + pw, out.data() + y * pw);
    }
    return out;
}

} // namespace

std::vector<PatchPair> sample_patches(const Tensor& image, const Tensor& density,
                                      const PatchPolicy& policy, std::uint64_t seed) {
    if (image.rank() != 3) throw ShapeError("sample_patches: image must be [C,H,W], got " + image.shape_str());
    const std::int64_t H = image.dim(1), W = image.dim(2);
    if (density.rank() != 2 || density.dim(0) != H || density.dim(1) != W) {
        throw ShapeError("sample_patches: density " + density.shape_str() + " does not match image " +
                         image.shape_str());
    }
    const std::int64_t ph = policy.ph > 0 ? policy.ph : H;
    const std::int64_t pw = policy.pw > 0 ? policy.pw : W;
    if (ph > H || pw > W) {
        throw DataError("sample_patches: patch " + std::to_string(ph) + "x" + std::to_string(pw) +
                        " larger than image " + std::to_string(H) + "x" + std::to_string(W));
    }

    std::vector<std::pair<std::int64_t, std::int64_t>> corners;
    switch (policy.mode) {
    case PatchMode::random_train: {
        Rng rng(seed);
        for (std::int64_t s = 0; s < policy.num_samples; ++s) {
            const std::int64_t y0 = static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(H - ph + 1)));
            const std::int64_t x0 = static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(W - pw + 1)));
            corners.emplace_back(y0, x0);
        }
        break;
    }
    case PatchMode::tile_exact: {
        if (H % ph != 0 || W % pw != 0) {
            throw DataError("sample_patches: tile_exact needs divisible dims, image " + std::to_string(H) +
                            "x" + std::to_string(W) + " vs patch " + std::to_string(ph) + "x" +
                            std::to_string(pw));
        }
        for (std::int64_t y0 = 0; y0 < H; y0 += ph)
            for (std::int64_t x0 = 0; x0 < W; x0 += pw) corners.emplace_back(y0, x0);
        break;
    }
    case PatchMode::dense_scan: {
        for (std::int64_t y0 : scan_positions(H, ph, policy.stride))
            for (std::int64_t x0 : scan_positions(W, pw, policy.stride)) corners.emplace_back(y0, x0);
        break;
    }
    }

    std::vector<PatchPair> out;
    out.reserve(corners.size() * (policy.flip_augment ? 2 : 1));
    for (const auto& [y0, x0] : corners) {
        PatchPair pair{crop3(image, y0, x0, ph, pw), crop2(density, y0, x0, ph, pw)};
        if (policy.flip_augment) {
            PatchPair mirrored{flip_lr(pair.image), flip_lr(pair.density)};
            out.push_back(std::move(pair));
            out.push_back(std::move(mirrored));
        } else {
            out.push_back(std::move(pair));
        }
    }
    return out;
}

std::vector<Tensor> cut_tiles(const Tensor& image, std::int64_t ph, std::int64_t pw, TileLayout* layout) {
    if (image.rank() != 3) throw ShapeError("cut_tiles: image must be [C,H,W], got " + image.shape_str());
    const std::int64_t H = image.dim(1), W = image.dim(2);
    if (ph < 1 || pw < 1 || H % ph != 0 || W % pw != 0) {
        throw DataError("cut_tiles: image " + std::to_string(H) + "x" + std::to_string(W) +
                        " is not an exact multiple of tile " + std::to_string(ph) + "x" + std::to_string(pw));
    }
    TileLayout lay{H / ph, W / pw};
    if (layout) *layout = lay;
    std::vector<Tensor> tiles;
    tiles.reserve(static_cast<std::size_t>(lay.rows * lay.cols));
    for (std::int64_t r = 0; r < lay.rows; ++r)
        for (std::int64_t c = 0; c < lay.cols; ++c) tiles.push_back(crop3(image, r * ph, c * pw, ph, pw));
    return tiles;
}

Tensor stitch_tiles(const std::vector<Tensor>& tiles, TileLayout layout) {
    if (tiles.empty()) throw ShapeError("stitch_tiles: no tiles");
    if (static_cast<std::int64_t>(tiles.size()) != layout.rows * layout.cols) {
        throw ShapeError("stitch_tiles: " + std::to_string(tiles.size()) + " tiles for a " +
                         std::to_string(layout.rows) + "x" + std::to_string(layout.cols) + " layout");
    }
    const Tensor& first = tiles.front();
    if (first.rank() != 3) throw ShapeError("stitch_tiles: tiles must be [C,ph,pw]");
    const std::int64_t C = first.dim(0), ph = first.dim(1), pw = first.dim(2);
    for (const Tensor& t : tiles) {
        if (!t.same_shape(first)) {
            throw ShapeError("stitch_tiles: non-uniform tile shape " + t.shape_str() + " vs " +
                             first.shape_str());
        }
    }
    Tensor out({C, layout.rows * ph, layout.cols * pw});
    const std::int64_t H = out.dim(1), W = out.dim(2);
    for (std::int64_t r = 0; r < layout.rows; ++r)
        for (std::int64_t c = 0; c < layout.cols; ++c) {
            const Tensor& t = tiles[static_cast<std::size_t>(r * layout.cols + c)];
            for (std::int64_t ch = 0; ch < C; ++ch)
                for (std::int64_t y = 0; y < ph; ++y) {
                    const scalar* src = t.data() + (ch * ph + y) * pw;
                    std::copy(src, src + pw, out.data() + (ch * H + r * ph + y) * W + c * pw);
                }
        }
    return out;
}

std::vector<std::int64_t> scan_positions(std::int64_t extent, std::int64_t size, std::int64_t stride) {
    if (size < 1 || size > extent) {
        throw DataError("scan_positions: window " + std::to_string(size) + " does not fit extent " +
                        std::to_string(extent));
    }
    if (stride < 1) throw DataError("scan_positions: stride must be >= 1");
    std::vector<std::int64_t> positions;
    for (std::int64_t p = 0;; p += stride) {
        if (p + size >= extent) {
            // clamp the last window to the edge
            positions.push_back(extent - size);
            break;
        }
        positions.push_back(p);
    }
    return positions;
}

Tensor dense_scan_map(const Tensor& image, std::int64_t ph, std::int64_t pw, std::int64_t stride,
                      const std::function<Tensor(const Tensor&)>& predict_window, Tensor* coverage) {
    if (image.rank() != 3) throw ShapeError("dense_scan_map: image must be [C,H,W]");
    const std::int64_t H = image.dim(1), W = image.dim(2);
    if (stride > std::min(ph, pw)) {
        throw DataError("dense_scan_map: stride " + std::to_string(stride) + " exceeds patch dims " +
                        std::to_string(ph) + "x" + std::to_string(pw));
    }
    Tensor sums({H, W});
    Tensor counts({H, W});
    for (std::int64_t y0 : scan_positions(H, ph, stride)) {
        for (std::int64_t x0 : scan_positions(W, pw, stride)) {
            const Tensor window = crop3(image, y0, x0, ph, pw);
            Tensor pred = predict_window(window);
            if (pred.rank() != 2 || pred.dim(0) != ph || pred.dim(1) != pw) {
                throw ShapeError("dense_scan_map: window prediction " + pred.shape_str() +
                                 " does not match window " + std::to_string(ph) + "x" + std::to_string(pw));
            }
            for (std::int64_t y = 0; y < ph; ++y)
                for (std::int64_t x = 0; x < pw; ++x) {
                    sums.at2(y0 + y, x0 + x) += pred.at2(y, x);
                    counts.at2(y0 + y, x0 + x) += 1.0;
                }
        }
    }
    Tensor out({H, W});
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = sums[i] / counts[i];
    if (coverage) *coverage = std::move(counts);
    return out;
}

PaddedImage pad_and_mask(const Tensor& image, std::int64_t target_h, std::int64_t target_w) {
    if (image.rank() != 3) throw ShapeError("pad_and_mask: image must be [C,H,W]");
    const std::int64_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
    if (target_h < H || target_w < W) {
        throw DataError("pad_and_mask: target " + std::to_string(target_h) + "x" + std::to_string(target_w) +
                        " smaller than image " + std::to_string(H) + "x" + std::to_string(W));
    }
    PaddedImage out{Tensor({C, target_h, target_w}), Tensor({target_h, target_w}, 1.0)};
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t y = 0; y < H; ++y) {
            const scalar* src = image.data() + (c * H + y) * W;
            std::copy(src, src + W, out.image.data() + (c * target_h + y) * target_w);
        }
    for (std::int64_t y = 0; y < H; ++y)
        for (std::int64_t x = 0; x < W; ++x) out.mask.at2(y, x) = 0.0;
    return out;
}

Tensor apply_suppression(const Tensor& map, const Tensor& mask) {
    if (!map.same_shape(mask)) {
        throw ShapeError("apply_suppression: map " + map.shape_str() + " vs mask " + mask.shape_str());
    }
    Tensor out(map.shape());
    for (std::int64_t i = 0; i < map.numel(); ++i) out[i] = mask[i] != 0.0 ? 0.0 : map[i];
    return out;
}

std::string regime_name(Regime r) {
    switch (r) {
    case Regime::fixed_sigma: return "fixed-sigma";
    case Regime::ucsd_perspective: return "ucsd-perspective";
    case Regime::worldexpo_perspective: return "worldexpo-perspective";
    }
    return "?";
}

Regime regime_from_name(const std::string& name) {
    if (name == "fixed-sigma") return Regime::fixed_sigma;
    if (name == "ucsd-perspective") return Regime::ucsd_perspective;
    if (name == "worldexpo-perspective") return Regime::worldexpo_perspective;
    throw UsageError("unknown supervision regime '" + name + "'");
}

namespace {

std::vector<DatasetPreset> build_presets() {
    std::vector<DatasetPreset> presets;

    // UCF: 1600 random 150x150 patches; whole-image test after zero padding
    // to 1024x1024 with output suppression over the padding.
    DatasetPreset ucf;
    ucf.name = "ucf";
    ucf.train_policy = {150, 150, PatchMode::random_train, 1, 1, false};
    ucf.train_patches_total = 1600;
    ucf.eval_protocol = EvalProtocol::pad_suppress;
    ucf.pad_h = ucf.pad_w = 1024;
    ucf.default_regime = Regime::fixed_sigma;
    ucf.default_sigma = 15.0;
    presets.push_back(ucf);

    // TRANCOS: 1600 random 80x80 patches; non-overlapping 80x80 tiles
    // stitched back to 640x480 at test time.
    DatasetPreset trancos;
    trancos.name = "trancos";
    trancos.train_policy = {80, 80, PatchMode::random_train, 1, 1, false};
    trancos.train_patches_total = 1600;
    trancos.eval_protocol = EvalProtocol::tile_exact;
    trancos.eval_ph = trancos.eval_pw = 80;
    trancos.default_regime = Regime::fixed_sigma;
    trancos.default_sigma = 15.0;
    presets.push_back(trancos);

    // UCSD: 1600 random 119-wide x 79-high patches plus left-right flips;
    // test images split into 79x119 quadrants.
    DatasetPreset ucsd;
    ucsd.name = "ucsd";
    ucsd.train_policy = {79, 119, PatchMode::random_train, 1, 1, true};
    ucsd.train_patches_total = 1600;
    ucsd.eval_protocol = EvalProtocol::tile_exact;
    ucsd.eval_ph = 79;
    ucsd.eval_pw = 119;
    ucsd.default_regime = Regime::ucsd_perspective;
    presets.push_back(ucsd);

    // WorldExpo: 16000 random 150x150 patches; dense scan at stride 100.
    DatasetPreset worldexpo;
    worldexpo.name = "worldexpo";
    worldexpo.train_policy = {150, 150, PatchMode::random_train, 1, 1, false};
    worldexpo.train_patches_total = 16000;
    worldexpo.eval_protocol = EvalProtocol::dense_scan;
    worldexpo.eval_ph = worldexpo.eval_pw = 150;
    worldexpo.eval_stride = 100;
    worldexpo.default_regime = Regime::fixed_sigma;
    worldexpo.default_sigma = 15.0;
    presets.push_back(worldexpo);

    // Synthetic desk-scale data: whole images as training samples, full-image
    // eval. Supervision defaults to a compact fixed sigma, which keeps truth
    // integrals calibrated to the count on small frames; the generator's
    // perspective map remains available via the worldexpo-perspective regime.
    DatasetPreset synthetic;
    synthetic.name = "synthetic";
    synthetic.train_policy = {0, 0, PatchMode::tile_exact, 1, 1, false};
    synthetic.train_patches_total = 0;
    synthetic.eval_protocol = EvalProtocol::full_image;
    synthetic.default_regime = Regime::fixed_sigma;
    synthetic.default_sigma = 2.0;
    synthetic.default_lr = 1e-3;
    presets.push_back(synthetic);

    return presets;
}

const std::vector<DatasetPreset>& presets() {
    static const std::vector<DatasetPreset> p = build_presets();
    return p;
}

} // namespace

const DatasetPreset& get_preset(const std::string& name) {
    for (const DatasetPreset& p : presets())
        if (p.name == name) return p;
    throw UsageError("unknown dataset preset '" + name + "'");
}

std::vector<std::string> preset_names() {
    std::vector<std::string> names;
    for (const DatasetPreset& p : presets()) names.push_back(p.name);
    return names;
}

} // namespace amdcn
