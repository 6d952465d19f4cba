#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "amdcn/io.hpp"
#include "amdcn/metrics.hpp"
#include "amdcn/model.hpp"
#include "amdcn/patchwork.hpp"
#include "amdcn/tensor.hpp"

namespace amdcn {

struct AdamConfig {
    scalar lr = 1e-4;
    scalar beta1 = 0.9;
    scalar beta2 = 0.999;
    scalar eps = 1e-8;
};

// Standard Adam with bias correction. Moment tensors mirror the parameter
// list given at construction; step() must be called with the same list.
class Adam {
public:
    Adam(AdamConfig config, const std::vector<const Tensor*>& params);
    void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads);
    std::int64_t steps_taken() const { return t_; }
    const AdamConfig& config() const { return config_; }

private:
    AdamConfig config_;
    std::vector<Tensor> m_, v_;
    std::int64_t t_ = 0;
};

struct TrainPlan {
    int epochs = 10;
    int batch_size = 8;
    scalar learning_rate = 1e-4;
    std::uint64_t seed = 0;
    std::string preset = "synthetic";
    PatchPolicy patch_policy;            // patch geometry + sampling mode
    std::int64_t patches_total = 0;      // random_train: total sampled patches; 0 = one pass over images
    Regime regime = Regime::fixed_sigma;
    scalar sigma = 15.0;
    scalar gamma = 255.0;
};

// Fills plan fields from a preset; seed/epochs/batch stay caller-controlled.
TrainPlan plan_from_preset(const DatasetPreset& preset);

// Ground-truth density for one record under the given supervision regime.
Tensor build_density(const io::DatasetRecord& record, Regime regime, scalar sigma);

struct TrainResult {
    ModelParams params;
    std::vector<scalar> epoch_losses; // mean training loss per epoch
    std::vector<scalar> channel_means;
    scalar train_mean_count = 0.0;
    scalar seconds = 0.0;
};

// Deterministic given (seed, dataset order, plan): init, patch sampling and
// batch order all derive from plan.seed. Throws NumericError naming the
// epoch/batch on a non-finite loss.
TrainResult train(const ModelConfig& config, const TrainPlan& plan, const io::Dataset& dataset,
                  const ModelParams* initial_params = nullptr);

struct EvalSpec {
    EvalProtocol protocol = EvalProtocol::full_image;
    std::int64_t pad_h = 0, pad_w = 0;
    std::int64_t eval_ph = 0, eval_pw = 0;
    std::int64_t eval_stride = 0;
    Regime regime = Regime::fixed_sigma;
    scalar sigma = 15.0;
    scalar gamma = 255.0;
    std::vector<scalar> channel_means;
};

EvalSpec eval_spec_from_preset(const DatasetPreset& preset, Regime regime, scalar sigma, scalar gamma,
                               std::vector<scalar> channel_means);

// Sliding-window model inference: forward on every ph x pw window at the
// given stride (windows clamped at the borders), per-pixel average of the
// overlapping network-space predictions. Returns an [H,W] map.
Tensor dense_scan_average(const ModelParams& params, const ModelConfig& config, const Tensor& image,
                          std::int64_t ph, std::int64_t pw, std::int64_t stride);

struct MetricReport {
    scalar mae = 0.0;
    std::array<scalar, 4> game_levels{}; // GAME(0..3)
    std::int64_t images = 0;
    scalar seconds = 0.0;
    std::optional<scalar> baseline_mae; // mean-predictor baseline, when known
};

// Test seam: when set, replaces the model forward pass per record; must
// return the network-space (gamma-scaled) [H,W] map.
using PredictOverride = std::function<Tensor(const io::DatasetRecord&, const Tensor& normalized_image)>;

// Runs the preset inference protocol per image and reports count MAE plus
// GAME(0..3) of the gamma^-1-rescaled maps against the ground truth.
MetricReport evaluate(const ModelParams& params, const ModelConfig& config, const io::Dataset& dataset,
                      const EvalSpec& spec, std::optional<scalar> train_mean_count = std::nullopt,
                      const PredictOverride& predict_override = {});

// Exactly the keys {mae, game0..game3, images, seconds}, one per line.
std::string format_metric_report(const MetricReport& report);

struct AblationGrid {
    std::vector<int> column_counts = {1, 2, 3, 4, 5};
    std::vector<bool> aggregator_options = {false, true};
    std::int64_t feature_maps = 32;
    TrainPlan plan;
};

struct AblationCell {
    int columns = 0;
    bool aggregator = false;
    scalar mae = 0.0;
    scalar seconds = 0.0;
};

// Trains every (columns, aggregator) cell under the identical plan and seed,
// evaluating each on eval_data. Rows come back sorted by (columns, aggregator).
std::vector<AblationCell> run_ablation(const AblationGrid& grid, const io::Dataset& train_data,
                                       const io::Dataset& eval_data, const EvalSpec& eval_spec);

// Delimiter-separated table, header `columns,aggregator,mae,seconds`.
std::string format_ablation_table(const std::vector<AblationCell>& cells);

} // namespace amdcn
