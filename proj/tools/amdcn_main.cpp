// amdcn: density-map counting toolkit
//
// Subcommands: synth, train, eval, predict, ablate. Every command writes a
// manifest.json with the fully resolved arguments next to its outputs, so a
// run can be reproduced exactly (bit-identical in --deterministic mode).
// Exit codes: 0 ok, 1 usage, 2 data error, 3 numerical abort.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "amdcn/io.hpp"
#include "amdcn/metrics.hpp"
#include "amdcn/model.hpp"
#include "amdcn/optim.hpp"
#include "amdcn/parallel.hpp"
#include "amdcn/patchwork.hpp"
#include "amdcn/plot.hpp"
#include "amdcn/synthdata.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace amdcn;

namespace {

constexpr const char* kToolVersion = "amdcn 0.1.0";

struct CommonOpts {
    int threads = 0;          // 0 = hardware default
    bool deterministic = false;
};

void apply_common(const CommonOpts& opts) {
    if (opts.deterministic) {
        set_max_threads(1);
    } else if (opts.threads > 0) {
        set_max_threads(opts.threads);
    }
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--threads", opts.threads, "cap worker threads (default: hardware)");
    cmd->add_flag("--deterministic", opts.deterministic,
                  "single-threaded 64-bit mode for bit-reproducible runs");
}

std::string default_out_root() {
    const char* env = std::getenv("AMDCN_OUT");
    return env && *env ? env : ".";
}

// "HxW" -> (h, w)
std::pair<std::int64_t, std::int64_t> parse_size(const std::string& text) {
    const auto x = text.find('x');
    if (x == std::string::npos) throw UsageError("expected HxW, got '" + text + "'");
    try {
        return {std::stoll(text.substr(0, x)), std::stoll(text.substr(x + 1))};
    } catch (const std::exception&) {
        throw UsageError("expected HxW, got '" + text + "'");
    }
}

// "a:b" -> (a, b) with a <= b
std::pair<scalar, scalar> parse_range(const std::string& text, const char* what) {
    const auto c = text.find(':');
    if (c == std::string::npos) throw UsageError(std::string(what) + ": expected MIN:MAX, got '" + text + "'");
    scalar lo = 0, hi = 0;
    try {
        lo = std::stod(text.substr(0, c));
        hi = std::stod(text.substr(c + 1));
    } catch (const std::exception&) {
        throw UsageError(std::string(what) + ": expected MIN:MAX, got '" + text + "'");
    }
    if (lo > hi) throw UsageError(std::string(what) + ": MIN exceeds MAX in '" + text + "'");
    return {lo, hi};
}

std::vector<int> parse_column_list(const std::string& text) {
    std::vector<int> cols;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        int v = 0;
        try {
            v = std::stoi(item);
        } catch (const std::exception&) {
            throw UsageError("bad column list entry '" + item + "'");
        }
        if (v < 1 || v > 5) throw UsageError("column count must be in 1..5, got " + item);
        cols.push_back(v);
    }
    if (cols.empty()) throw UsageError("empty column list");
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    return cols;
}

void write_manifest(const fs::path& path, const json& body) {
    json j = body;
    j["tool"] = kToolVersion;
    std::ofstream f(path);
    if (!f) throw DataError("cannot write manifest '" + path.string() + "'");
    f << j.dump(2) << "\n";
}

json meta_to_json(const std::map<std::string, Tensor>& meta) {
    json j = json::object();
    for (const auto& [name, t] : meta) {
        if (t.numel() == 1) j[name] = t[0];
    }
    return j;
}

// ---- synth ----

int cmd_synth(const std::string& out_dir, std::int64_t images, const std::string& size,
              const std::string& counts, const std::string& radius, scalar noise, std::uint64_t seed,
              bool force, const CommonOpts& common) {
    apply_common(common);
    SceneSpec spec;
    auto [h, w] = parse_size(size);
    spec.height = h;
    spec.width = w;
    auto [cmin, cmax] = parse_range(counts, "--counts");
    spec.count_min = static_cast<std::int64_t>(cmin);
    spec.count_max = static_cast<std::int64_t>(cmax);
    auto [rmin, rmax] = parse_range(radius, "--radius");
    spec.r_min = rmin;
    spec.r_max = rmax;
    spec.noise_level = noise;
    spec.seed = seed;
    validate_scene_spec(spec);

    if (fs::exists(out_dir) && !fs::is_empty(out_dir) && !force) {
        throw DataError("output directory '" + out_dir + "' is not empty (use --force)");
    }
    const io::Dataset ds = generate_scenes(spec, images);
    write_dataset(ds, out_dir, spec);

    json manifest;
    manifest["command"] = "synth";
    manifest["images"] = images;
    manifest["size"] = size;
    manifest["counts"] = counts;
    manifest["radius"] = radius;
    manifest["noise"] = noise;
    manifest["seed"] = seed;
    write_manifest(fs::path(out_dir) / "run_manifest.json", manifest);
    std::cout << "wrote " << images << " scenes to " << out_dir << "\n";
    return 0;
}

// ---- train ----

struct TrainArgs {
    std::string data_dir;
    std::string out_dir;
    std::string preset = "synthetic";
    int columns = 5;
    std::string aggregator = "on";
    int epochs = 10;
    int batch_size = 8;
    double lr = 0.0; // 0 = preset default
    double gamma = 255.0;
    std::string regime; // empty = preset default
    double sigma = 0.0; // 0 = preset default
    std::uint64_t seed = 0;
    std::int64_t feature_maps = 32;
    std::int64_t samples = -1;     // -1 = preset default
    std::string patch;             // "HxW", empty = preset default
};

int cmd_train(const TrainArgs& args, const CommonOpts& common) {
    apply_common(common);
    if (args.aggregator != "on" && args.aggregator != "off") {
        throw UsageError("--aggregator must be 'on' or 'off'");
    }
    const DatasetPreset& preset = get_preset(args.preset);
    TrainPlan plan = plan_from_preset(preset);
    plan.epochs = args.epochs;
    plan.batch_size = args.batch_size;
    plan.seed = args.seed;
    plan.gamma = args.gamma;
    if (args.lr > 0.0) plan.learning_rate = args.lr;
    if (!args.regime.empty()) plan.regime = regime_from_name(args.regime);
    if (args.sigma > 0.0) plan.sigma = args.sigma;
    if (args.samples >= 0) plan.patches_total = args.samples;
    if (!args.patch.empty()) {
        auto [ph, pw] = parse_size(args.patch);
        plan.patch_policy.ph = ph;
        plan.patch_policy.pw = pw;
    }

    const io::Dataset dataset = io::load_dataset(args.data_dir);
    const std::int64_t channels = dataset.records.front().image.dim(0);
    const ModelConfig config =
        default_config(args.columns, args.aggregator == "on", channels, args.feature_maps);

    TrainResult result = train(config, plan, dataset);

    fs::create_directories(args.out_dir);
    std::map<std::string, Tensor> meta;
    meta["gamma"] = Tensor({1}, std::vector<scalar>{plan.gamma});
    meta["train_mean_count"] = Tensor({1}, std::vector<scalar>{result.train_mean_count});
    meta["channel_means"] =
        Tensor({static_cast<std::int64_t>(result.channel_means.size())}, result.channel_means);
    const fs::path ckpt_path = fs::path(args.out_dir) / "checkpoint.bin";
    save_checkpoint(ckpt_path.string(), config, result.params, meta);

    char fp[32];
    std::snprintf(fp, sizeof(fp), "%016llx",
                  static_cast<unsigned long long>(config_fingerprint(config)));

    std::ostringstream report;
    report << "config_fingerprint: " << fp << "\n";
    report << "preset: " << plan.preset << "\n";
    report << "columns: " << args.columns << "\n";
    report << "aggregator: " << args.aggregator << "\n";
    report << "feature_maps: " << args.feature_maps << "\n";
    report << "epochs: " << plan.epochs << "\n";
    report << "batch_size: " << plan.batch_size << "\n";
    report << "learning_rate: " << plan.learning_rate << "\n";
    report << "gamma: " << plan.gamma << "\n";
    report << "regime: " << regime_name(plan.regime) << "\n";
    report << "sigma: " << plan.sigma << "\n";
    report << "seed: " << plan.seed << "\n";
    report << "parameters: " << result.params.parameter_count() << "\n";
    for (std::size_t e = 0; e < result.epoch_losses.size(); ++e) {
        report << "epoch" << e << "_loss: " << result.epoch_losses[e] << "\n";
    }
    report << "seconds: " << result.seconds << "\n";
    std::ofstream rf(fs::path(args.out_dir) / "report.txt");
    rf << report.str();
    std::cout << report.str();

    json manifest;
    manifest["command"] = "train";
    manifest["data"] = args.data_dir;
    manifest["preset"] = plan.preset;
    manifest["columns"] = args.columns;
    manifest["aggregator"] = args.aggregator;
    manifest["feature_maps"] = args.feature_maps;
    manifest["epochs"] = plan.epochs;
    manifest["batch_size"] = plan.batch_size;
    manifest["learning_rate"] = plan.learning_rate;
    manifest["gamma"] = plan.gamma;
    manifest["regime"] = regime_name(plan.regime);
    manifest["sigma"] = plan.sigma;
    manifest["seed"] = plan.seed;
    manifest["samples"] = plan.patches_total;
    manifest["config_fingerprint"] = fp;
    manifest["config"] = json::parse(config_to_json(config));
    write_manifest(fs::path(args.out_dir) / "run_manifest.json", manifest);
    return 0;
}

// ---- eval ----

int cmd_eval(const std::string& ckpt_path, const std::string& data_dir, const std::string& out_dir,
             const std::string& preset_name, const std::string& regime_override, double sigma_override,
             int columns, const std::string& aggregator, const CommonOpts& common) {
    apply_common(common);
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    if (columns > 0) {
        // caller pinned a config; refuse a checkpoint that does not match it
        const std::int64_t channels = ckpt.config.input_channels;
        const ModelConfig requested =
            default_config(columns, aggregator == "on", channels, ckpt.config.feature_maps);
        ckpt = load_checkpoint(ckpt_path, requested);
    }

    const DatasetPreset& preset = get_preset(preset_name);
    const io::Dataset dataset = io::load_dataset(data_dir);

    Regime regime = preset.default_regime;
    if (!regime_override.empty()) regime = regime_from_name(regime_override);
    scalar sigma = sigma_override > 0.0 ? sigma_override : preset.default_sigma;
    scalar gamma = 255.0;
    if (auto it = ckpt.meta.find("gamma"); it != ckpt.meta.end()) gamma = it->second[0];
    std::vector<scalar> means;
    if (auto it = ckpt.meta.find("channel_means"); it != ckpt.meta.end()) {
        means.assign(it->second.values().begin(), it->second.values().end());
    } else {
        means.assign(static_cast<std::size_t>(ckpt.config.input_channels), 0.0);
    }

    std::optional<scalar> train_mean;
    if (auto it = ckpt.meta.find("train_mean_count"); it != ckpt.meta.end()) train_mean = it->second[0];

    const EvalSpec spec = eval_spec_from_preset(preset, regime, sigma, gamma, means);
    const MetricReport report = evaluate(ckpt.params, ckpt.config, dataset, spec, train_mean);

    const std::string text = format_metric_report(report);
    std::cout << text;
    if (report.baseline_mae) {
        std::printf("baseline_mae: %.6f (mean predictor)\n", *report.baseline_mae);
    }
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream rf(fs::path(out_dir) / "report.txt");
        rf << text;
        json manifest;
        manifest["command"] = "eval";
        manifest["checkpoint"] = ckpt_path;
        manifest["data"] = data_dir;
        manifest["preset"] = preset_name;
        manifest["regime"] = regime_name(regime);
        manifest["sigma"] = sigma;
        manifest["gamma"] = gamma;
        write_manifest(fs::path(out_dir) / "run_manifest.json", manifest);
    }
    return 0;
}

// ---- predict ----

int cmd_predict(const std::string& ckpt_path, const std::string& image_path, const std::string& out_path,
                const CommonOpts& common) {
    apply_common(common);
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const Tensor image = io::read_pgm(image_path);
    scalar gamma = 255.0;
    if (auto it = ckpt.meta.find("gamma"); it != ckpt.meta.end()) gamma = it->second[0];
    std::vector<scalar> means(static_cast<std::size_t>(ckpt.config.input_channels), 0.0);
    if (auto it = ckpt.meta.find("channel_means"); it != ckpt.meta.end()) {
        means.assign(it->second.values().begin(), it->second.values().end());
    }

    const Tensor normalized = normalize(image, means);
    Shape batched_shape = normalized.shape();
    batched_shape.insert(batched_shape.begin(), 1);
    const Tensor out = forward(ckpt.params, ckpt.config, Tensor(batched_shape, normalized.values()));
    const scalar count = std::max(0.0, ops::reduce_sum(out) / gamma);

    // normalized visualization: peak maps to white
    Tensor vis({out.dim(2), out.dim(3)});
    scalar peak = 0.0;
    for (std::int64_t i = 0; i < out.numel(); ++i) peak = std::max(peak, out[i]);
    if (peak > 0.0) {
        for (std::int64_t i = 0; i < vis.numel(); ++i) vis[i] = std::max(0.0, out[i]) / peak;
    }
    io::write_pgm(out_path, vis);
    write_manifest(fs::path(out_path).string() + ".manifest.json",
                   json{{"command", "predict"},
                        {"checkpoint", ckpt_path},
                        {"image", image_path},
                        {"gamma", gamma},
                        {"count", count}});
    std::printf("count: %.2f\n", count);
    return 0;
}

// ---- ablate ----

int cmd_ablate(const std::string& data_dir, const std::string& eval_dir, const std::string& out_dir,
               const std::string& preset_name, const std::string& columns_list, int epochs,
               std::int64_t feature_maps, double lr, std::uint64_t seed, const CommonOpts& common) {
    apply_common(common);
    const DatasetPreset& preset = get_preset(preset_name);
    AblationGrid grid;
    grid.column_counts = parse_column_list(columns_list);
    grid.feature_maps = feature_maps;
    grid.plan = plan_from_preset(preset);
    grid.plan.epochs = epochs;
    grid.plan.seed = seed;
    if (lr > 0.0) grid.plan.learning_rate = lr;

    const io::Dataset train_data = io::load_dataset(data_dir);
    const io::Dataset eval_data = eval_dir.empty() ? io::load_dataset(data_dir) : io::load_dataset(eval_dir);
    const EvalSpec eval_spec =
        eval_spec_from_preset(preset, grid.plan.regime, grid.plan.sigma, grid.plan.gamma, {});

    const std::vector<AblationCell> cells = run_ablation(grid, train_data, eval_data, eval_spec);
    const std::string table = format_ablation_table(cells);

    fs::create_directories(out_dir);
    std::ofstream tf(fs::path(out_dir) / "ablation.csv");
    tf << table;
    write_ablation_plot((fs::path(out_dir) / "ablation.ppm").string(), cells);

    json manifest;
    manifest["command"] = "ablate";
    manifest["data"] = data_dir;
    manifest["eval_data"] = eval_dir.empty() ? data_dir : eval_dir;
    manifest["preset"] = preset_name;
    manifest["columns"] = columns_list;
    manifest["epochs"] = epochs;
    manifest["feature_maps"] = feature_maps;
    manifest["learning_rate"] = grid.plan.learning_rate;
    manifest["seed"] = seed;
    write_manifest(fs::path(out_dir) / "run_manifest.json", manifest);

    std::cout << table;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"AMDCN density-map counting toolkit"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic counting dataset");
    std::string s_out = default_out_root() + "/dataset";
    std::int64_t s_images = 50;
    std::string s_size = "64x64", s_counts = "5:20", s_radius = "2:5";
    double s_noise = 0.05;
    std::uint64_t s_seed = 0;
    bool s_force = false;
    CommonOpts s_common;
    synth->add_option("--out", s_out, "output directory");
    synth->add_option("--images", s_images, "number of images");
    synth->add_option("--size", s_size, "image size HxW");
    synth->add_option("--counts", s_counts, "objects per image MIN:MAX");
    synth->add_option("--radius", s_radius, "object radius MIN:MAX (pixels)");
    synth->add_option("--noise", s_noise, "background noise amplitude");
    synth->add_option("--seed", s_seed, "generator seed");
    synth->add_flag("--force", s_force, "overwrite a non-empty output directory");
    add_common(synth, s_common);

    // train
    auto* tr = app.add_subcommand("train", "train a model on a dataset directory");
    TrainArgs t;
    t.out_dir = default_out_root() + "/run";
    CommonOpts t_common;
    tr->add_option("--data", t.data_dir, "dataset directory")->required();
    tr->add_option("--out", t.out_dir, "output directory (checkpoint, report, manifest)");
    tr->add_option("--preset", t.preset, "ucf|trancos|ucsd|worldexpo|synthetic");
    tr->add_option("--columns", t.columns, "number of columns (1-5)");
    tr->add_option("--aggregator", t.aggregator, "on|off");
    tr->add_option("--epochs", t.epochs, "training epochs");
    tr->add_option("--batch", t.batch_size, "batch size");
    tr->add_option("--lr", t.lr, "learning rate (default: preset)");
    tr->add_option("--gamma", t.gamma, "target scale factor");
    tr->add_option("--regime", t.regime, "fixed-sigma|ucsd-perspective|worldexpo-perspective");
    tr->add_option("--sigma", t.sigma, "gaussian sigma for fixed-sigma supervision");
    tr->add_option("--seed", t.seed, "training seed");
    tr->add_option("--feature-maps", t.feature_maps, "feature maps per conv");
    tr->add_option("--samples", t.samples, "total sampled training patches (preset default)");
    tr->add_option("--patch", t.patch, "training patch HxW (preset default)");
    add_common(tr, t_common);

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    std::string e_ckpt, e_data, e_out, e_preset = "synthetic", e_regime;
    double e_sigma = 0.0;
    int e_columns = 0;
    std::string e_agg = "on";
    CommonOpts e_common;
    ev->add_option("--checkpoint", e_ckpt, "checkpoint file")->required();
    ev->add_option("--data", e_data, "dataset directory")->required();
    ev->add_option("--out", e_out, "optional output directory for report + manifest");
    ev->add_option("--preset", e_preset, "ucf|trancos|ucsd|worldexpo|synthetic");
    ev->add_option("--regime", e_regime, "supervision regime override");
    ev->add_option("--sigma", e_sigma, "sigma override");
    ev->add_option("--columns", e_columns, "verify checkpoint matches this column count");
    ev->add_option("--aggregator", e_agg, "on|off (with --columns)");
    add_common(ev, e_common);

    // predict
    auto* pr = app.add_subcommand("predict", "predict a density map + count for one image");
    std::string p_ckpt, p_image, p_out = "density.pgm";
    CommonOpts p_common;
    pr->add_option("--checkpoint", p_ckpt, "checkpoint file")->required();
    pr->add_option("--image", p_image, "input PGM image")->required();
    pr->add_option("--out", p_out, "output density visualization (PGM)");
    add_common(pr, p_common);

    // ablate
    auto* ab = app.add_subcommand("ablate", "column/aggregator ablation grid");
    std::string a_data, a_eval, a_out = default_out_root() + "/ablation";
    std::string a_preset = "synthetic", a_columns = "1,2,3,4,5";
    int a_epochs = 10;
    std::int64_t a_fm = 32;
    double a_lr = 0.0;
    std::uint64_t a_seed = 0;
    CommonOpts a_common;
    ab->add_option("--data", a_data, "training dataset directory")->required();
    ab->add_option("--eval-data", a_eval, "evaluation dataset (default: training data)");
    ab->add_option("--out", a_out, "output directory (table, plot, manifest)");
    ab->add_option("--preset", a_preset, "dataset preset");
    ab->add_option("--columns", a_columns, "comma-separated column counts");
    ab->add_option("--epochs", a_epochs, "epochs per cell");
    ab->add_option("--feature-maps", a_fm, "feature maps per conv");
    ab->add_option("--lr", a_lr, "learning rate (default: preset)");
    ab->add_option("--seed", a_seed, "shared seed for every cell");
    add_common(ab, a_common);

    try {
        app.parse(argc, argv);
        if (synth->parsed()) {
            return cmd_synth(s_out, s_images, s_size, s_counts, s_radius, s_noise, s_seed, s_force, s_common);
        }
        if (tr->parsed()) return cmd_train(t, t_common);
        if (ev->parsed()) {
            return cmd_eval(e_ckpt, e_data, e_out, e_preset, e_regime, e_sigma, e_columns, e_agg, e_common);
        }
        if (pr->parsed()) return cmd_predict(p_ckpt, p_image, p_out, p_common);
        if (ab->parsed()) {
            return cmd_ablate(a_data, a_eval, a_out, a_preset, a_columns, a_epochs, a_fm, a_lr, a_seed,
                              a_common);
        }
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const ShapeError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
