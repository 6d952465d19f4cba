#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "amdcn/autodiff.hpp"
#include "amdcn/ops.hpp"
#include "amdcn/tensor.hpp"

namespace amdcn {

// One column: a stack of same-padded dilated convs, each followed by a ReLU.
struct ColumnSpec {
    std::string label;
    std::vector<ConvSpec> layers;
};

// The AMDCN: N parallel columns over a shared input, channel concatenation,
// then a head stack ("aggregator" when with_aggregator, else a single 1x1
// conv to one channel). ReLUs sit between head layers but never after the
// final one, so raw outputs may be negative.
struct ModelConfig {
    std::vector<ColumnSpec> columns;
    std::vector<ConvSpec> aggregator; // head stack; final layer has out_channels == 1
    bool with_aggregator = true;
    std::int64_t feature_maps = 32;
    std::int64_t input_channels = 1;
};

// Canonical construction: column k (1-based) is k+1 3x3 convs with dilations
// 1,2,4,...,2^k; the aggregator is six 3x3 convs with dilations 1,2,4,8,16,1,
// the last mapping to a single channel. Without the aggregator the head is
// one 1x1 dilation-1 conv to one channel.
ModelConfig default_config(int num_columns, bool with_aggregator, std::int64_t input_channels,
                           std::int64_t feature_maps = 32);

void validate_config(const ModelConfig& config);

std::string config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const std::string& json_text);
std::uint64_t config_fingerprint(const ModelConfig& config);

struct ModelParams {
    struct Entry {
        std::string name; // "col<k>.conv<j>" / "agg.conv<j>"
        Tensor kernel;    // [out,in,kh,kw]
        Tensor bias;      // [out]
    };
    std::vector<Entry> entries;

    const Entry& at(const std::string& name) const;
    std::int64_t parameter_count() const;
};

// Walks layers in execution order: every column in order, then the head.
// relu_after is false only for the final head layer.
struct LayerRef {
    std::string name;
    ConvSpec spec;
    bool relu_after;
};
std::vector<LayerRef> layer_sequence(const ModelConfig& config);

// Glorot-uniform kernels (b = sqrt(6/(fan_in+fan_out))), zero biases.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

// Inference forward; preserves spatial dims for any input size.
Tensor forward(const ModelParams& params, const ModelConfig& config, const Tensor& image);
// Per-column activations entering the concat (each [B,feature_maps,H,W]).
std::vector<Tensor> forward_columns(const ModelParams& params, const ModelConfig& config,
                                    const Tensor& image);

// count = max(0, sum(forward)/gamma); gamma^-1 recovers true-density units.
scalar predict_count(const ModelParams& params, const ModelConfig& config, const Tensor& image,
                     scalar gamma);

// Training-time forward on a tape. param_nodes must follow the entry order
// of ModelParams (kernel,bias per layer), as produced by make_param_nodes.
struct ParamNodes {
    std::vector<NodePtr> kernels;
    std::vector<NodePtr> biases;
};
ParamNodes make_param_nodes(GradTape& tape, const ModelParams& params);
NodePtr forward_tape(GradTape& tape, const ParamNodes& nodes, const ModelConfig& config,
                     const NodePtr& image);

// Checkpoint container: format version, config fingerprint + embedded config,
// then a named tensor table (shape dims + raw little-endian f64 payload).
// Round-trips are bit-exact. `meta` carries run context such as per-channel
// input means, gamma and the training-set mean count.
struct Checkpoint {
    ModelConfig config;
    ModelParams params;
    std::map<std::string, Tensor> meta;
};

void save_checkpoint(const std::string& path, const ModelConfig& config, const ModelParams& params,
                     const std::map<std::string, Tensor>& meta = {});
Checkpoint load_checkpoint(const std::string& path);
// Same, but refuses a checkpoint whose fingerprint differs from `expected`.
Checkpoint load_checkpoint(const std::string& path, const ModelConfig& expected);

} // namespace amdcn
