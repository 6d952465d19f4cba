#include "amdcn/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "amdcn/autodiff.hpp"
#include "amdcn/random.hpp"
#include "amdcn/supervision.hpp"

namespace amdcn {

namespace {
using clock_type = std::chrono::steady_clock;

scalar elapsed_seconds(clock_type::time_point start) {
    return std::chrono::duration<scalar>(clock_type::now() - start).count();
}
} // namespace

Adam::Adam(AdamConfig config, const std::vector<const Tensor*>& params) : config_(config) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Tensor* p : params) {
        m_.emplace_back(p->shape());
        v_.emplace_back(p->shape());
    }
}

void Adam::step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        throw ShapeError("adam: parameter list size changed since construction");
    }
    ++t_;
    const scalar bc1 = 1.0 - std::pow(config_.beta1, static_cast<scalar>(t_));
    const scalar bc2 = 1.0 - std::pow(config_.beta2, static_cast<scalar>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = *grads[i];
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        if (!p.same_shape(m) || !g.same_shape(m)) {
            throw ShapeError("adam: param/grad " + std::to_string(i) + " shape mismatch, got " +
                             p.shape_str() + " and " + g.shape_str() + " vs state " + m.shape_str());
        }
        for (std::int64_t k = 0; k < p.numel(); ++k) {
            m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * g[k];
            v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * g[k] * g[k];
            const scalar m_hat = m[k] / bc1;
            const scalar v_hat = v[k] / bc2;
            p[k] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
        }
    }
}

TrainPlan plan_from_preset(const DatasetPreset& preset) {
    TrainPlan plan;
    plan.preset = preset.name;
    plan.patch_policy = preset.train_policy;
    plan.patches_total = preset.train_patches_total;
    plan.regime = preset.default_regime;
    plan.sigma = preset.default_sigma;
    plan.learning_rate = preset.default_lr;
    return plan;
}

Tensor build_density(const io::DatasetRecord& record, Regime regime, scalar sigma) {
    switch (regime) {
    case Regime::fixed_sigma:
        return gaussian_density(record.annotations, sigma);
    case Regime::ucsd_perspective:
        if (record.perspective) {
            return ucsd_density(record.annotations, &*record.perspective);
        }
        return ucsd_density(record.annotations, nullptr);
    case Regime::worldexpo_perspective:
        if (!record.perspective) {
            throw DataError("supervision: record '" + record.stem +
                            "' has no perspective map, required by the worldexpo-perspective regime");
        }
        return worldexpo_density(record.annotations, *record.perspective);
    }
    throw DataError("supervision: unknown regime");
}

namespace {

struct PatchRef {
    std::int64_t image = 0;
    std::int64_t y0 = 0;
    std::int64_t x0 = 0;
    bool flip = false;
};

// Batched (image, corner) descriptors; patches are cut lazily at batch time.
std::vector<PatchRef> build_patch_set(const io::Dataset& dataset, const TrainPlan& plan, Rng& rng) {
    std::vector<PatchRef> refs;
    const std::int64_t n = static_cast<std::int64_t>(dataset.records.size());
    const PatchPolicy& pol = plan.patch_policy;
    if (pol.mode == PatchMode::random_train && plan.patches_total > 0) {
        for (std::int64_t s = 0; s < plan.patches_total; ++s) {
            const std::int64_t idx = static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(n)));
            const Tensor& img = dataset.records[static_cast<std::size_t>(idx)].image;
            const std::int64_t H = img.dim(1), W = img.dim(2);
            const std::int64_t ph = pol.ph > 0 ? pol.ph : H;
            const std::int64_t pw = pol.pw > 0 ? pol.pw : W;
            if (ph > H || pw > W) {
                throw DataError("train: patch " + std::to_string(ph) + "x" + std::to_string(pw) +
                                " larger than image '" + dataset.records[static_cast<std::size_t>(idx)].stem +
                                "' (" + std::to_string(H) + "x" + std::to_string(W) + ")");
            }
            PatchRef ref;
            ref.image = idx;
            ref.y0 = static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(H - ph + 1)));
            ref.x0 = static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(W - pw + 1)));
            refs.push_back(ref);
        }
    } else {
        // one pass over the images, whole frames (or exact tiles)
        for (std::int64_t idx = 0; idx < n; ++idx) {
            const Tensor& img = dataset.records[static_cast<std::size_t>(idx)].image;
            const std::int64_t H = img.dim(1), W = img.dim(2);
            const std::int64_t ph = pol.ph > 0 ? pol.ph : H;
            const std::int64_t pw = pol.pw > 0 ? pol.pw : W;
            if (H % ph != 0 || W % pw != 0) {
                throw DataError("train: tile_exact patch " + std::to_string(ph) + "x" + std::to_string(pw) +
                                " does not divide image '" +
                                dataset.records[static_cast<std::size_t>(idx)].stem + "'");
            }
            for (std::int64_t y0 = 0; y0 < H; y0 += ph)
                for (std::int64_t x0 = 0; x0 < W; x0 += pw) refs.push_back({idx, y0, x0, false});
        }
    }
    if (pol.flip_augment) {
        const std::size_t base = refs.size();
        for (std::size_t i = 0; i < base; ++i) {
            PatchRef mirrored = refs[i];
            mirrored.flip = true;
            refs.push_back(mirrored);
        }
    }
    return refs;
}

void cut_into_batch(Tensor& batch_img, Tensor& batch_tgt, std::int64_t slot, const Tensor& image,
                    const Tensor& density, const PatchRef& ref) {
    const std::int64_t C = batch_img.dim(1), ph = batch_img.dim(2), pw = batch_img.dim(3);
    const std::int64_t W = image.dim(2);
    for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t y = 0; y < ph; ++y) {
            const scalar* isrc = image.data() + (c * image.dim(1) + ref.y0 + y) * W + ref.x0;
            scalar* idst = batch_img.data() + ((slot * C + c) * ph + y) * pw;
            if (ref.flip) {
                for (std::int64_t x = 0; x < pw; ++x) idst[x] = isrc[pw - 1 - x];
            } else {
                std::copy(isrc, isrc + pw, idst);
            }
        }
    for (std::int64_t y = 0; y < ph; ++y) {
        const scalar* dsrc = density.data() + (ref.y0 + y) * density.dim(1) + ref.x0;
        scalar* ddst = batch_tgt.data() + (slot * ph + y) * pw;
        if (ref.flip) {
            for (std::int64_t x = 0; x < pw; ++x) ddst[x] = dsrc[pw - 1 - x];
        } else {
            std::copy(dsrc, dsrc + pw, ddst);
        }
    }
}

} // namespace

TrainResult train(const ModelConfig& config, const TrainPlan& plan, const io::Dataset& dataset,
                  const ModelParams* initial_params) {
    const auto start = clock_type::now();
    if (dataset.records.empty()) throw DataError("train: empty dataset");
    if (plan.epochs < 1 || plan.batch_size < 1) throw UsageError("train: epochs and batch size must be >= 1");
    if (!(plan.gamma > 0.0)) throw UsageError("train: gamma must be positive");
    validate_config(config);
    for (const io::DatasetRecord& rec : dataset.records) {
        if (rec.image.dim(0) != config.input_channels) {
            throw DataError("train: image '" + rec.stem + "' has " + std::to_string(rec.image.dim(0)) +
                            " channels, config expects " + std::to_string(config.input_channels));
        }
    }

    TrainResult result;
    {
        std::vector<const Tensor*> imgs;
        for (const io::DatasetRecord& rec : dataset.records) imgs.push_back(&rec.image);
        result.channel_means = compute_channel_means(imgs);
    }

    // normalized inputs + ground-truth densities, one per record
    std::vector<Tensor> inputs;
    std::vector<Tensor> densities;
    scalar count_sum = 0.0;
    for (const io::DatasetRecord& rec : dataset.records) {
        inputs.push_back(normalize(rec.image, result.channel_means));
        densities.push_back(build_density(rec, plan.regime, plan.sigma));
        count_sum += static_cast<scalar>(rec.annotations.points.size());
    }
    result.train_mean_count = count_sum / static_cast<scalar>(dataset.records.size());

    Rng sample_rng(Rng::mix(plan.seed, 0x5A3D1E5ULL));
    const std::vector<PatchRef> patch_set = build_patch_set(dataset, plan, sample_rng);
    if (patch_set.empty()) throw DataError("train: patch set is empty");
    const std::int64_t ph = plan.patch_policy.ph > 0 ? plan.patch_policy.ph : inputs.front().dim(1);
    const std::int64_t pw = plan.patch_policy.pw > 0 ? plan.patch_policy.pw : inputs.front().dim(2);

    ModelParams params = initial_params ? *initial_params : init_params(config, plan.seed);
    GradTape tape;
    ParamNodes nodes = make_param_nodes(tape, params);
    std::vector<Tensor*> param_tensors;
    std::vector<const Tensor*> param_tensors_const;
    std::vector<const Tensor*> grad_tensors;
    for (std::size_t i = 0; i < nodes.kernels.size(); ++i) {
        param_tensors.push_back(&nodes.kernels[i]->value);
        param_tensors.push_back(&nodes.biases[i]->value);
        grad_tensors.push_back(&nodes.kernels[i]->grad);
        grad_tensors.push_back(&nodes.biases[i]->grad);
    }
    for (Tensor* t : param_tensors) param_tensors_const.push_back(t);
    Adam adam(AdamConfig{plan.learning_rate, 0.9, 0.999, 1e-8}, param_tensors_const);

    std::vector<std::size_t> order(patch_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < plan.epochs; ++epoch) {
        Rng shuffle_rng(Rng::mix(plan.seed, 0xE90C0ULL + static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng.next_below(i))]);
        }
        // per-sample losses recorded in patch-set slot order, so the epoch
        // mean does not depend on the shuffle for fixed parameters
        std::vector<scalar> slot_losses(patch_set.size(), 0.0);
        for (std::size_t pos = 0; pos < order.size(); pos += static_cast<std::size_t>(plan.batch_size)) {
            const std::int64_t bsz = std::min<std::int64_t>(plan.batch_size,
                                                            static_cast<std::int64_t>(order.size() - pos));
            Tensor batch_img({bsz, config.input_channels, ph, pw});
            Tensor batch_tgt({bsz, 1, ph, pw});
            for (std::int64_t s = 0; s < bsz; ++s) {
                const PatchRef& ref = patch_set[order[pos + static_cast<std::size_t>(s)]];
                cut_into_batch(batch_img, batch_tgt, s, inputs[static_cast<std::size_t>(ref.image)],
                               densities[static_cast<std::size_t>(ref.image)], ref);
            }

            tape.clear();
            for (std::size_t i = 0; i < nodes.kernels.size(); ++i) {
                nodes.kernels[i]->grad.fill(0.0);
                nodes.biases[i]->grad.fill(0.0);
            }
            NodePtr input = tape.leaf(std::move(batch_img), /*requires_grad=*/false);
            NodePtr out = forward_tape(tape, nodes, config, input);

            const std::int64_t sample_px = ph * pw;
            bool finite = true;
            for (std::int64_t s = 0; s < bsz; ++s) {
                scalar acc = 0.0;
                const scalar* pred = out->value.data() + s * sample_px;
                const scalar* tgt = batch_tgt.data() + s * sample_px;
                for (std::int64_t i = 0; i < sample_px; ++i) {
                    acc += std::fabs(pred[i] - plan.gamma * tgt[i]);
                }
                const scalar sample_loss = acc / static_cast<scalar>(sample_px);
                if (!std::isfinite(sample_loss)) finite = false;
                slot_losses[order[pos + static_cast<std::size_t>(s)]] = sample_loss;
            }
            if (!finite) {
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                                   std::to_string(pos / static_cast<std::size_t>(plan.batch_size)));
            }
            tape.backward(out, metrics::scaled_mae_loss_grad(out->value, batch_tgt, plan.gamma));
            adam.step(param_tensors, grad_tensors);
        }
        scalar epoch_loss = 0.0;
        for (scalar v : slot_losses) epoch_loss += v;
        result.epoch_losses.push_back(epoch_loss / static_cast<scalar>(slot_losses.size()));
    }

    for (std::size_t i = 0; i < params.entries.size(); ++i) {
        params.entries[i].kernel = nodes.kernels[i]->value;
        params.entries[i].bias = nodes.biases[i]->value;
    }
    result.params = std::move(params);
    result.seconds = elapsed_seconds(start);
    return result;
}

EvalSpec eval_spec_from_preset(const DatasetPreset& preset, Regime regime, scalar sigma, scalar gamma,
                               std::vector<scalar> channel_means) {
    EvalSpec spec;
    spec.protocol = preset.eval_protocol;
    spec.pad_h = preset.pad_h;
    spec.pad_w = preset.pad_w;
    spec.eval_ph = preset.eval_ph;
    spec.eval_pw = preset.eval_pw;
    spec.eval_stride = preset.eval_stride;
    spec.regime = regime;
    spec.sigma = sigma;
    spec.gamma = gamma;
    spec.channel_means = std::move(channel_means);
    return spec;
}

namespace {

Tensor squeeze_map(const Tensor& out) {
    // [1,1,H,W] -> [H,W]
    return Tensor({out.dim(2), out.dim(3)}, out.values());
}

Tensor unsqueeze_image(const Tensor& img) {
    // [C,H,W] -> [1,C,H,W]
    Shape s = img.shape();
    s.insert(s.begin(), 1);
    return Tensor(s, img.values());
}

Tensor predict_map(const ModelParams& params, const ModelConfig& config, const Tensor& normalized,
                   const EvalSpec& spec) {
    switch (spec.protocol) {
    case EvalProtocol::full_image:
        return squeeze_map(forward(params, config, unsqueeze_image(normalized)));
    case EvalProtocol::pad_suppress: {
        PaddedImage padded = pad_and_mask(normalized, spec.pad_h, spec.pad_w);
        Tensor map = squeeze_map(forward(params, config, unsqueeze_image(padded.image)));
        map = apply_suppression(map, padded.mask);
        Tensor cropped({normalized.dim(1), normalized.dim(2)});
        for (std::int64_t y = 0; y < cropped.dim(0); ++y)
            for (std::int64_t x = 0; x < cropped.dim(1); ++x) cropped.at2(y, x) = map.at2(y, x);
        return cropped;
    }
    case EvalProtocol::tile_exact: {
        TileLayout layout;
        const std::vector<Tensor> tiles = cut_tiles(normalized, spec.eval_ph, spec.eval_pw, &layout);
        std::vector<Tensor> maps;
        maps.reserve(tiles.size());
        for (const Tensor& tile : tiles) {
            Tensor m = squeeze_map(forward(params, config, unsqueeze_image(tile)));
            maps.push_back(Tensor({std::int64_t{1}, m.dim(0), m.dim(1)}, m.values()));
        }
        const Tensor stitched = stitch_tiles(maps, layout);
        return Tensor({stitched.dim(1), stitched.dim(2)}, stitched.values());
    }
    case EvalProtocol::dense_scan:
        return dense_scan_average(params, config, normalized, spec.eval_ph, spec.eval_pw,
                                  spec.eval_stride);
    }
    throw DataError("evaluate: unknown protocol");
}

} // namespace

Tensor dense_scan_average(const ModelParams& params, const ModelConfig& config, const Tensor& image,
                          std::int64_t ph, std::int64_t pw, std::int64_t stride) {
    return dense_scan_map(image, ph, pw, stride, [&](const Tensor& window) {
        return squeeze_map(forward(params, config, unsqueeze_image(window)));
    });
}

MetricReport evaluate(const ModelParams& params, const ModelConfig& config, const io::Dataset& dataset,
                      const EvalSpec& spec, std::optional<scalar> train_mean_count,
                      const PredictOverride& predict_override) {
    const auto start = clock_type::now();
    if (dataset.records.empty()) throw DataError("evaluate: empty dataset");
    MetricReport report;
    report.images = static_cast<std::int64_t>(dataset.records.size());

    std::vector<Tensor> pred_maps;
    std::vector<Tensor> true_maps;
    std::vector<scalar> pred_counts, true_counts;
    for (const io::DatasetRecord& rec : dataset.records) {
        const Tensor normalized = normalize(rec.image, spec.channel_means);
        Tensor net_map = predict_override ? predict_override(rec, normalized)
                                          : predict_map(params, config, normalized, spec);
        Tensor map = ops::mul(net_map, 1.0 / spec.gamma); // back to true-density units
        pred_counts.push_back(std::max(0.0, ops::reduce_sum(map)));
        true_counts.push_back(static_cast<scalar>(rec.annotations.points.size()));
        pred_maps.push_back(std::move(map));
        true_maps.push_back(build_density(rec, spec.regime, spec.sigma));
    }
    report.mae = metrics::count_mae(pred_counts, true_counts);
    std::vector<const Tensor*> preds, truths;
    for (std::size_t i = 0; i < pred_maps.size(); ++i) {
        preds.push_back(&pred_maps[i]);
        truths.push_back(&true_maps[i]);
    }
    for (int level = 0; level <= 3; ++level) {
        report.game_levels[static_cast<std::size_t>(level)] = metrics::game_batch(preds, truths, level);
    }
    if (train_mean_count) {
        std::vector<scalar> baseline(true_counts.size(), *train_mean_count);
        report.baseline_mae = metrics::count_mae(baseline, true_counts);
    }
    report.seconds = elapsed_seconds(start);
    return report;
}

std::string format_metric_report(const MetricReport& report) {
    char buf[64];
    std::ostringstream os;
    std::snprintf(buf, sizeof(buf), "%.6f", report.mae);
    os << "mae: " << buf << "\n";
    for (int level = 0; level <= 3; ++level) {
        std::snprintf(buf, sizeof(buf), "%.6f", report.game_levels[static_cast<std::size_t>(level)]);
        os << "game" << level << ": " << buf << "\n";
    }
    os << "images: " << report.images << "\n";
    std::snprintf(buf, sizeof(buf), "%.3f", report.seconds);
    os << "seconds: " << buf << "\n";
    return os.str();
}

std::vector<AblationCell> run_ablation(const AblationGrid& grid, const io::Dataset& train_data,
                                       const io::Dataset& eval_data, const EvalSpec& eval_spec) {
    if (grid.column_counts.empty() || grid.aggregator_options.empty()) {
        throw UsageError("ablation: empty grid");
    }
    std::vector<int> columns = grid.column_counts;
    std::sort(columns.begin(), columns.end());
    std::vector<bool> aggs = grid.aggregator_options;
    std::sort(aggs.begin(), aggs.end()); // off before on

    const std::int64_t input_channels = train_data.records.empty()
                                            ? 1
                                            : train_data.records.front().image.dim(0);
    std::vector<AblationCell> cells;
    for (int cols : columns) {
        for (bool agg : aggs) {
            const auto cell_start = clock_type::now();
            const ModelConfig config = default_config(cols, agg, input_channels, grid.feature_maps);
            TrainResult tr = train(config, grid.plan, train_data);
            EvalSpec spec = eval_spec;
            spec.channel_means = tr.channel_means;
            const MetricReport report = evaluate(tr.params, config, eval_data, spec);
            cells.push_back({cols, agg, report.mae, elapsed_seconds(cell_start)});
        }
    }
    return cells;
}

std::string format_ablation_table(const std::vector<AblationCell>& cells) {
    std::ostringstream os;
    os << "columns,aggregator,mae,seconds\n";
    char buf[64];
    for (const AblationCell& cell : cells) {
        std::snprintf(buf, sizeof(buf), "%d,%s,%.6f,%.3f", cell.columns, cell.aggregator ? "on" : "off",
                      cell.mae, cell.seconds);
        os << buf << "\n";
    }
    return os.str();
}

} // namespace amdcn
