#include "amdcn/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "amdcn/random.hpp"

namespace amdcn {

namespace {
using nlohmann::json;

json spec_to_json(const ConvSpec& s) {
    return json{{"kh", s.kh}, {"kw", s.kw}, {"dilation", s.dilation},
                {"in", s.in_channels}, {"out", s.out_channels}};
}

ConvSpec spec_from_json(const json& j) {
    return ConvSpec::make(j.at("kh").get<std::int64_t>(), j.at("kw").get<std::int64_t>(),
                          j.at("dilation").get<std::int64_t>(), j.at("in").get<std::int64_t>(),
                          j.at("out").get<std::int64_t>());
}
} // namespace

ModelConfig default_config(int num_columns, bool with_aggregator, std::int64_t input_channels,
                           std::int64_t feature_maps) {
    if (num_columns < 1 || num_columns > 5) {
        throw UsageError("column count must be in 1..5, got " + std::to_string(num_columns));
    }
    if (input_channels < 1 || feature_maps < 1) {
        throw UsageError("input_channels and feature_maps must be >= 1");
    }
    ModelConfig cfg;
    cfg.with_aggregator = with_aggregator;
    cfg.feature_maps = feature_maps;
    cfg.input_channels = input_channels;
    for (int k = 1; k <= num_columns; ++k) {
        ColumnSpec col;
        col.label = "col" + std::to_string(k - 1);
        std::int64_t in = input_channels;
        std::int64_t dilation = 1;
        for (int layer = 0; layer <= k; ++layer) {
            col.layers.push_back(ConvSpec::make(3, 3, dilation, in, feature_maps));
            in = feature_maps;
            dilation *= 2;
        }
        cfg.columns.push_back(std::move(col));
    }
    const std::int64_t concat_c = num_columns * feature_maps;
    if (with_aggregator) {
        const std::int64_t dil[6] = {1, 2, 4, 8, 16, 1};
        std::int64_t in = concat_c;
        for (int i = 0; i < 6; ++i) {
            const std::int64_t out = (i == 5) ? 1 : feature_maps;
            cfg.aggregator.push_back(ConvSpec::make(3, 3, dil[i], in, out));
            in = out;
        }
    } else {
        cfg.aggregator.push_back(ConvSpec::make(1, 1, 1, concat_c, 1));
    }
    validate_config(cfg);
    return cfg;
}

void validate_config(const ModelConfig& config) {
    if (config.columns.empty() || config.columns.size() > 5) {
        throw ShapeError("model config: need 1..5 columns, got " + std::to_string(config.columns.size()));
    }
    std::int64_t concat_c = 0;
    for (const ColumnSpec& col : config.columns) {
        if (col.layers.empty()) throw ShapeError("model config: column '" + col.label + "' has no layers");
        std::int64_t in = config.input_channels;
        for (const ConvSpec& s : col.layers) {
            if (s.in_channels != in) {
                throw ShapeError("model config: column '" + col.label + "' layer expects " +
                                 std::to_string(s.in_channels) + " input channels, chain provides " +
                                 std::to_string(in));
            }
            if (s.out_channels != config.feature_maps) {
                throw ShapeError("model config: hidden conv in column '" + col.label +
                                 "' must emit feature_maps=" + std::to_string(config.feature_maps) +
                                 " channels, got " + std::to_string(s.out_channels));
            }
            in = s.out_channels;
        }
        concat_c += in;
    }
    if (config.aggregator.empty()) throw ShapeError("model config: head stack is empty");
    std::int64_t in = concat_c;
    for (std::size_t i = 0; i < config.aggregator.size(); ++i) {
        const ConvSpec& s = config.aggregator[i];
        if (s.in_channels != in) {
            throw ShapeError("model config: head layer " + std::to_string(i) + " expects " +
                             std::to_string(s.in_channels) + " input channels, chain provides " +
                             std::to_string(in));
        }
        in = s.out_channels;
    }
    if (in != 1) {
        throw ShapeError("model config: final head layer must emit a single channel, got " +
                         std::to_string(in));
    }
}

std::string config_to_json(const ModelConfig& config) {
    json j;
    j["input_channels"] = config.input_channels;
    j["feature_maps"] = config.feature_maps;
    j["with_aggregator"] = config.with_aggregator;
    json cols = json::array();
    for (const ColumnSpec& col : config.columns) {
        json layers = json::array();
        for (const ConvSpec& s : col.layers) layers.push_back(spec_to_json(s));
        cols.push_back(json{{"label", col.label}, {"layers", layers}});
    }
    j["columns"] = cols;
    json agg = json::array();
    for (const ConvSpec& s : config.aggregator) agg.push_back(spec_to_json(s));
    j["aggregator"] = agg;
    return j.dump();
}

ModelConfig config_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw DataError(std::string("config json: ") + e.what());
    }
    try {
        ModelConfig cfg;
        cfg.input_channels = j.at("input_channels").get<std::int64_t>();
        cfg.feature_maps = j.at("feature_maps").get<std::int64_t>();
        cfg.with_aggregator = j.at("with_aggregator").get<bool>();
        for (const json& jc : j.at("columns")) {
            ColumnSpec col;
            col.label = jc.at("label").get<std::string>();
            for (const json& jl : jc.at("layers")) col.layers.push_back(spec_from_json(jl));
            cfg.columns.push_back(std::move(col));
        }
        for (const json& jl : j.at("aggregator")) cfg.aggregator.push_back(spec_from_json(jl));
        validate_config(cfg);
        return cfg;
    } catch (const json::exception& e) {
        throw DataError(std::string("config json: ") + e.what());
    }
}

std::uint64_t config_fingerprint(const ModelConfig& config) {
    // FNV-1a over the canonical json text
    const std::string text = config_to_json(config);
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

const ModelParams::Entry& ModelParams::at(const std::string& name) const {
    for (const Entry& e : entries)
        if (e.name == name) return e;
    throw ShapeError("model params: no layer named '" + name + "'");
}

std::int64_t ModelParams::parameter_count() const {
    std::int64_t n = 0;
    for (const Entry& e : entries) n += e.kernel.numel() + e.bias.numel();
    return n;
}

std::vector<LayerRef> layer_sequence(const ModelConfig& config) {
    std::vector<LayerRef> seq;
    for (std::size_t k = 0; k < config.columns.size(); ++k) {
        const ColumnSpec& col = config.columns[k];
        for (std::size_t j = 0; j < col.layers.size(); ++j) {
            seq.push_back({"col" + std::to_string(k) + ".conv" + std::to_string(j), col.layers[j], true});
        }
    }
    for (std::size_t j = 0; j < config.aggregator.size(); ++j) {
        const bool last = (j + 1 == config.aggregator.size());
        seq.push_back({"agg.conv" + std::to_string(j), config.aggregator[j], !last});
    }
    return seq;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
    validate_config(config);
    ModelParams params;
    Rng rng(seed);
    for (const LayerRef& layer : layer_sequence(config)) {
        const ConvSpec& s = layer.spec;
        const scalar fan_in = static_cast<scalar>(s.in_channels * s.kh * s.kw);
        const scalar fan_out = static_cast<scalar>(s.out_channels * s.kh * s.kw);
        const scalar bound = std::sqrt(6.0 / (fan_in + fan_out));
        Tensor kernel({s.out_channels, s.in_channels, s.kh, s.kw});
        for (std::int64_t i = 0; i < kernel.numel(); ++i) kernel[i] = rng.uniform(-bound, bound);
        params.entries.push_back({layer.name, std::move(kernel), Tensor({s.out_channels})});
    }
    return params;
}

namespace {

void check_image(const ModelConfig& config, const Tensor& image) {
    if (image.rank() != 4) {
        throw ShapeError("forward: image must be rank 4 (B,C,H,W), got " + image.shape_str());
    }
    if (image.dim(1) != config.input_channels) {
        throw ShapeError("forward: image has " + std::to_string(image.dim(1)) +
                         " channels, config expects " + std::to_string(config.input_channels));
    }
}

} // namespace

std::vector<Tensor> forward_columns(const ModelParams& params, const ModelConfig& config,
                                    const Tensor& image) {
    check_image(config, image);
    std::vector<Tensor> outs;
    std::size_t entry = 0;
    for (const ColumnSpec& col : config.columns) {
        Tensor x = image;
        for (std::size_t j = 0; j < col.layers.size(); ++j, ++entry) {
            const ModelParams::Entry& e = params.entries[entry];
            x = ops::relu(ops::conv2d(x, e.kernel, e.bias, col.layers[j]));
        }
        outs.push_back(std::move(x));
    }
    return outs;
}

Tensor forward(const ModelParams& params, const ModelConfig& config, const Tensor& image) {
    std::vector<Tensor> cols = forward_columns(params, config, image);
    Tensor x = ops::concat_channels(cols);
    std::size_t entry = params.entries.size() - config.aggregator.size();
    for (std::size_t j = 0; j < config.aggregator.size(); ++j, ++entry) {
        const ModelParams::Entry& e = params.entries[entry];
        x = ops::conv2d(x, e.kernel, e.bias, config.aggregator[j]);
        if (j + 1 < config.aggregator.size()) x = ops::relu(x);
    }
    return x;
}

scalar predict_count(const ModelParams& params, const ModelConfig& config, const Tensor& image,
                     scalar gamma) {
    const Tensor map = forward(params, config, image);
    return std::max(0.0, ops::reduce_sum(map) / gamma);
}

ParamNodes make_param_nodes(GradTape& tape, const ModelParams& params) {
    ParamNodes nodes;
    for (const ModelParams::Entry& e : params.entries) {
        nodes.kernels.push_back(tape.leaf(e.kernel));
        nodes.biases.push_back(tape.leaf(e.bias));
    }
    return nodes;
}

NodePtr forward_tape(GradTape& tape, const ParamNodes& nodes, const ModelConfig& config,
                     const NodePtr& image) {
    check_image(config, image->value);
    std::vector<NodePtr> cols;
    std::size_t entry = 0;
    for (const ColumnSpec& col : config.columns) {
        NodePtr x = image;
        for (std::size_t j = 0; j < col.layers.size(); ++j, ++entry) {
            x = tape.relu(tape.conv2d(x, nodes.kernels[entry], nodes.biases[entry], col.layers[j]));
        }
        cols.push_back(std::move(x));
    }
    NodePtr x = tape.concat_channels(cols);
    for (std::size_t j = 0; j < config.aggregator.size(); ++j, ++entry) {
        x = tape.conv2d(x, nodes.kernels[entry], nodes.biases[entry], config.aggregator[j]);
        if (j + 1 < config.aggregator.size()) x = tape.relu(x);
    }
    return x;
}

// ---- checkpoint io ----

namespace {

constexpr char kMagic[8] = {'A', 'M', 'D', 'C', 'N', 'C', 'K', '1'};

void put_u64(std::ofstream& f, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    f.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::ifstream& f) {
    unsigned char b[8];
    f.read(reinterpret_cast<char*>(b), 8);
    if (!f) throw DataError("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

void put_f64(std::ofstream& f, scalar x) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, 8);
    put_u64(f, bits);
}

scalar get_f64(std::ifstream& f) {
    const std::uint64_t bits = get_u64(f);
    scalar x;
    std::memcpy(&x, &bits, 8);
    return x;
}

void put_string(std::ofstream& f, const std::string& s) {
    put_u64(f, s.size());
    f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::ifstream& f) {
    const std::uint64_t n = get_u64(f);
    if (n > (1ULL << 30)) throw DataError("checkpoint: corrupt string length");
    std::string s(n, '\0');
    f.read(s.data(), static_cast<std::streamsize>(n));
    if (!f) throw DataError("checkpoint: truncated file");
    return s;
}

void put_tensor(std::ofstream& f, const std::string& name, const Tensor& t) {
    put_string(f, name);
    put_u64(f, t.rank());
    for (std::int64_t d : t.shape()) put_u64(f, static_cast<std::uint64_t>(d));
    for (std::int64_t i = 0; i < t.numel(); ++i) put_f64(f, t[i]);
}

std::pair<std::string, Tensor> get_tensor(std::ifstream& f) {
    std::string name = get_string(f);
    const std::uint64_t rank = get_u64(f);
    if (rank > 8) throw DataError("checkpoint: corrupt tensor rank for '" + name + "'");
    Shape shape;
    for (std::uint64_t i = 0; i < rank; ++i) shape.push_back(static_cast<std::int64_t>(get_u64(f)));
    Tensor t(shape);
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = get_f64(f);
    return {std::move(name), std::move(t)};
}

} // namespace

void save_checkpoint(const std::string& path, const ModelConfig& config, const ModelParams& params,
                     const std::map<std::string, Tensor>& meta) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("checkpoint: cannot open '" + path + "' for writing");
    f.write(kMagic, 8);
    put_u64(f, config_fingerprint(config));
    put_string(f, config_to_json(config));
    put_u64(f, params.entries.size() * 2 + meta.size());
    for (const ModelParams::Entry& e : params.entries) {
        put_tensor(f, e.name + ".kernel", e.kernel);
        put_tensor(f, e.name + ".bias", e.bias);
    }
    for (const auto& [name, t] : meta) put_tensor(f, "meta." + name, t);
    if (!f) throw DataError("checkpoint: write to '" + path + "' failed");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("checkpoint: cannot open '" + path + "'");
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0) {
        throw DataError("checkpoint: '" + path + "' is not an AMDCN checkpoint");
    }
    const std::uint64_t stored_fp = get_u64(f);
    const std::string config_text = get_string(f);
    Checkpoint ckpt;
    ckpt.config = config_from_json(config_text);
    if (config_fingerprint(ckpt.config) != stored_fp) {
        throw DataError("checkpoint: fingerprint does not match embedded config (corrupt file)");
    }
    const std::uint64_t ntensors = get_u64(f);
    std::map<std::string, Tensor> table;
    for (std::uint64_t i = 0; i < ntensors; ++i) {
        auto [name, t] = get_tensor(f);
        table.emplace(std::move(name), std::move(t));
    }
    // Reassemble entries in layer order and verify shapes against the config.
    for (const LayerRef& layer : layer_sequence(ckpt.config)) {
        auto ki = table.find(layer.name + ".kernel");
        auto bi = table.find(layer.name + ".bias");
        if (ki == table.end() || bi == table.end()) {
            throw DataError("checkpoint: missing tensors for layer '" + layer.name + "'");
        }
        const ConvSpec& s = layer.spec;
        const Shape want{s.out_channels, s.in_channels, s.kh, s.kw};
        if (ki->second.shape() != want || bi->second.shape() != Shape{s.out_channels}) {
            throw DataError("checkpoint: tensor shape mismatch for layer '" + layer.name + "'");
        }
        ckpt.params.entries.push_back({layer.name, std::move(ki->second), std::move(bi->second)});
        table.erase(ki);
        table.erase(bi);
    }
    for (auto& [name, t] : table) {
        if (name.rfind("meta.", 0) == 0) ckpt.meta.emplace(name.substr(5), std::move(t));
    }
    return ckpt;
}

Checkpoint load_checkpoint(const std::string& path, const ModelConfig& expected) {
    Checkpoint ckpt = load_checkpoint(path);
    if (config_fingerprint(ckpt.config) != config_fingerprint(expected)) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%016llx vs %016llx",
                      static_cast<unsigned long long>(config_fingerprint(ckpt.config)),
                      static_cast<unsigned long long>(config_fingerprint(expected)));
        throw DataError(std::string("checkpoint: config fingerprint mismatch (") + buf + ")");
    }
    return ckpt;
}

} // namespace amdcn
