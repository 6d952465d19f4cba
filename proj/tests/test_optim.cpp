#include <doctest.h>

#include <cmath>

#include "amdcn/optim.hpp"
#include "amdcn/synthdata.hpp"
#include "oracles.hpp"

using namespace amdcn;
using oracle::rand_tensor;

namespace {

io::Dataset tiny_dataset(int n_images, std::int64_t side = 16, std::uint64_t seed = 7) {
    SceneSpec spec;
    spec.height = side;
    spec.width = side;
    spec.count_min = 1;
    spec.count_max = 3;
    spec.r_min = 1.5;
    spec.r_max = 2.5;
    spec.noise_level = 0.02;
    spec.seed = seed;
    return generate_scenes(spec, n_images);
}

TrainPlan tiny_plan(int epochs = 2) {
    TrainPlan plan = plan_from_preset(get_preset("synthetic"));
    plan.epochs = epochs;
    plan.batch_size = 4;
    plan.seed = 5;
    plan.sigma = 1.5;
    return plan;
}

} // namespace

TEST_CASE("adam leaves parameters untouched under zero gradients") {
    Rng rng(1);
    Tensor theta = rand_tensor({4, 3}, rng);
    const Tensor before = theta;
    const Tensor zero(theta.shape());
    Adam adam(AdamConfig{0.05, 0.9, 0.999, 1e-8}, {&theta});
    for (int i = 0; i < 25; ++i) adam.step({&theta}, {&zero});
    CHECK(oracle::max_abs_diff(theta, before) == 0.0);
    CHECK(adam.steps_taken() == 25);
}

TEST_CASE("first adam step moves against the gradient sign by about alpha") {
    Tensor theta({3}, std::vector<scalar>{1.0, -2.0, 0.5});
    const Tensor grad({3}, std::vector<scalar>{3.0, -0.7, 0.001});
    const scalar alpha = 0.05;
    Adam adam(AdamConfig{alpha, 0.9, 0.999, 1e-8}, {&theta});
    adam.step({&theta}, {&grad});
    CHECK(theta[0] == doctest::Approx(1.0 - alpha).epsilon(1e-6));
    CHECK(theta[1] == doctest::Approx(-2.0 + alpha).epsilon(1e-6));
    CHECK(theta[2] == doctest::Approx(0.5 - alpha).epsilon(1e-4));
}

TEST_CASE("adam converges on the convex quadratic oracle") {
    Rng rng(2);
    Tensor theta = rand_tensor({8}, rng, -3.0, 3.0);
    const Tensor target = rand_tensor({8}, rng, -1.0, 1.0);
    Adam adam(AdamConfig{0.05, 0.9, 0.999, 1e-8}, {&theta});
    int steps = 0;
    for (; steps < 2000; ++steps) {
        Tensor grad(theta.shape());
        for (std::int64_t i = 0; i < theta.numel(); ++i) grad[i] = 2.0 * (theta[i] - target[i]);
        adam.step({&theta}, {&grad});
        if (oracle::max_abs_diff(theta, target) < 1e-3) break;
    }
    CHECK(steps < 2000);
    CHECK(oracle::max_abs_diff(theta, target) < 1e-3);
}

TEST_CASE("adam rejects mismatched parameter lists") {
    Tensor a({2});
    Tensor b({3});
    Adam adam(AdamConfig{}, {&a});
    const Tensor ga({2});
    CHECK_THROWS_AS(adam.step({&b}, {&ga}), ShapeError);
}

TEST_CASE("zero learning rate freezes training") {
    const io::Dataset ds = tiny_dataset(4);
    const ModelConfig cfg = default_config(1, false, 1, 2);
    TrainPlan plan = tiny_plan(3);
    plan.learning_rate = 0.0;
    const TrainResult r = train(cfg, plan, ds);
    REQUIRE(r.epoch_losses.size() == 3);
    CHECK(r.epoch_losses[0] == r.epoch_losses[1]);
    CHECK(r.epoch_losses[1] == r.epoch_losses[2]);
    const ModelParams fresh = init_params(cfg, plan.seed);
    for (std::size_t i = 0; i < fresh.entries.size(); ++i) {
        CHECK(oracle::max_abs_diff(r.params.entries[i].kernel, fresh.entries[i].kernel) == 0.0);
    }
}

TEST_CASE("training is bit-reproducible for a fixed seed") {
    const io::Dataset ds = tiny_dataset(6);
    const ModelConfig cfg = default_config(2, true, 1, 2);
    const TrainPlan plan = tiny_plan(2);
    const TrainResult a = train(cfg, plan, ds);
    const TrainResult b = train(cfg, plan, ds);
    REQUIRE(a.epoch_losses.size() == b.epoch_losses.size());
    for (std::size_t i = 0; i < a.epoch_losses.size(); ++i) {
        CHECK(a.epoch_losses[i] == b.epoch_losses[i]);
    }
    for (std::size_t i = 0; i < a.params.entries.size(); ++i) {
        CHECK(oracle::max_abs_diff(a.params.entries[i].kernel, b.params.entries[i].kernel) == 0.0);
    }
    CHECK(a.train_mean_count == b.train_mean_count);
}

TEST_CASE("one step updates every column and the aggregator") {
    const io::Dataset ds = tiny_dataset(4);
    const ModelConfig cfg = default_config(3, true, 1, 2);
    TrainPlan plan = tiny_plan(1);
    plan.batch_size = 4;
    const ModelParams before = init_params(cfg, plan.seed);
    const TrainResult r = train(cfg, plan, ds);
    bool col_changed[3] = {false, false, false};
    bool agg_changed = false;
    for (std::size_t i = 0; i < before.entries.size(); ++i) {
        const bool changed =
            oracle::max_abs_diff(r.params.entries[i].kernel, before.entries[i].kernel) > 0.0;
        const std::string& name = before.entries[i].name;
        if (!changed) continue;
        if (name.rfind("agg.", 0) == 0) {
            agg_changed = true;
        } else {
            col_changed[name[3] - '0'] = true;
        }
    }
    CHECK(col_changed[0]);
    CHECK(col_changed[1]);
    CHECK(col_changed[2]);
    CHECK(agg_changed);
}

TEST_CASE("non-finite loss aborts with the batch index") {
    const io::Dataset ds = tiny_dataset(4);
    const ModelConfig cfg = default_config(1, false, 1, 2);
    ModelParams poisoned = init_params(cfg, 5);
    // the head has no ReLU after it, so the NaN reaches the loss
    poisoned.entries.back().bias[0] = std::numeric_limits<scalar>::quiet_NaN();
    const TrainPlan plan = tiny_plan(1);
    CHECK_THROWS_WITH_AS(train(cfg, plan, ds, &poisoned), doctest::Contains("batch"), NumericError);
}

TEST_CASE("training fails cleanly on an empty dataset") {
    const io::Dataset empty;
    CHECK_THROWS_AS(train(default_config(1, false, 1, 2), tiny_plan(), empty), DataError);
}

TEST_CASE("synthetic training reduces the loss") {
    const io::Dataset ds = tiny_dataset(12, 24);
    const ModelConfig cfg = default_config(2, true, 1, 4);
    TrainPlan plan = tiny_plan(4);
    plan.learning_rate = 1e-3;
    const TrainResult r = train(cfg, plan, ds);
    REQUIRE(r.epoch_losses.size() == 4);
    CHECK(r.epoch_losses.back() < r.epoch_losses.front());
    for (scalar loss : r.epoch_losses) CHECK(std::isfinite(loss));
}

TEST_CASE("the oracle predictor scores zero on every metric") {
    // interior-only annotations so the truth integral equals the count
    io::Dataset ds;
    Rng rng(17);
    for (int i = 0; i < 5; ++i) {
        io::DatasetRecord rec;
        rec.stem = "rec" + std::to_string(i);
        rec.image = Tensor({1, 24, 24}, 0.5);
        rec.annotations.height = rec.annotations.width = 24;
        const int count = 1 + static_cast<int>(rng.next_below(4));
        for (int j = 0; j < count; ++j) {
            rec.annotations.points.push_back({rng.uniform(8.0, 15.0), rng.uniform(8.0, 15.0)});
        }
        ds.records.push_back(std::move(rec));
    }
    const ModelConfig cfg = default_config(1, false, 1, 2);
    const ModelParams params = init_params(cfg, 1);
    EvalSpec spec = eval_spec_from_preset(get_preset("synthetic"), Regime::fixed_sigma, 1.5, 255.0,
                                          {0.0});
    const auto oracle_predict = [&](const io::DatasetRecord& rec, const Tensor&) {
        return scale_targets(build_density(rec, spec.regime, spec.sigma), spec.gamma);
    };
    const MetricReport report = evaluate(params, cfg, ds, spec, std::nullopt, oracle_predict);
    CHECK(report.mae < 1e-9);
    for (scalar g : report.game_levels) CHECK(g < 1e-9);
    CHECK(report.images == 5);
}

TEST_CASE("the zero model scores the mean true count") {
    const io::Dataset ds = tiny_dataset(6);
    const ModelConfig cfg = default_config(1, false, 1, 2);
    ModelParams zero = init_params(cfg, 1);
    for (auto& e : zero.entries) {
        e.kernel.fill(0.0);
        e.bias.fill(0.0);
    }
    std::vector<const Tensor*> imgs;
    for (const auto& rec : ds.records) imgs.push_back(&rec.image);
    EvalSpec spec = eval_spec_from_preset(get_preset("synthetic"), Regime::fixed_sigma, 1.5, 255.0,
                                          compute_channel_means(imgs));
    scalar mean_count = 0.0;
    for (const auto& rec : ds.records) mean_count += static_cast<scalar>(rec.annotations.points.size());
    mean_count /= static_cast<scalar>(ds.records.size());

    const MetricReport report = evaluate(zero, cfg, ds, spec, mean_count);
    scalar expected = 0.0;
    for (const auto& rec : ds.records) expected += static_cast<scalar>(rec.annotations.points.size());
    expected /= static_cast<scalar>(ds.records.size());
    CHECK(report.mae == doctest::Approx(expected).epsilon(1e-12));
    REQUIRE(report.baseline_mae.has_value());
    CHECK(*report.baseline_mae ==
          doctest::Approx(metrics::count_mae(std::vector<scalar>(6, mean_count),
                                             [&] {
                                                 std::vector<scalar> t;
                                                 for (const auto& rec : ds.records)
                                                     t.push_back(static_cast<scalar>(
                                                         rec.annotations.points.size()));
                                                 return t;
                                             }()))
              .epsilon(1e-12));
}

TEST_CASE("dense_scan_average runs the model across clamped windows") {
    const ModelConfig cfg = default_config(1, false, 1, 2);
    ModelParams params = init_params(cfg, 2);
    for (auto& e : params.entries) {
        e.kernel.fill(0.0);
        e.bias.fill(0.0);
    }
    // constant-output model: head bias only
    params.entries.back().bias.fill(3.25);
    Rng rng(3);
    const Tensor image = rand_tensor({1, 10, 14}, rng);
    const Tensor map = dense_scan_average(params, cfg, image, 6, 6, 4);
    CHECK(map.shape() == Shape{10, 14});
    for (std::int64_t i = 0; i < map.numel(); ++i) CHECK(map[i] == doctest::Approx(3.25));
}

TEST_CASE("metric report text has exactly the documented keys") {
    MetricReport report;
    report.mae = 1.5;
    report.game_levels = {1.0, 2.0, 3.0, 4.0};
    report.images = 7;
    report.seconds = 0.25;
    const std::string text = format_metric_report(report);
    CHECK(text == "mae: 1.500000\ngame0: 1.000000\ngame1: 2.000000\ngame2: 3.000000\n"
                  "game3: 4.000000\nimages: 7\nseconds: 0.250\n");
}

TEST_CASE("ablation grid trains every cell deterministically") {
    const io::Dataset ds = tiny_dataset(4);
    AblationGrid grid;
    grid.column_counts = {2, 1};
    grid.aggregator_options = {true, false};
    grid.feature_maps = 2;
    grid.plan = tiny_plan(1);
    EvalSpec spec = eval_spec_from_preset(get_preset("synthetic"), grid.plan.regime, grid.plan.sigma,
                                          grid.plan.gamma, {});
    const auto cells = run_ablation(grid, ds, ds, spec);
    REQUIRE(cells.size() == 4);
    // sorted by (columns, aggregator) with off before on
    CHECK(cells[0].columns == 1);
    CHECK_FALSE(cells[0].aggregator);
    CHECK(cells[1].columns == 1);
    CHECK(cells[1].aggregator);
    CHECK(cells[2].columns == 2);
    CHECK_FALSE(cells[2].aggregator);
    CHECK(cells[3].columns == 2);
    CHECK(cells[3].aggregator);

    const auto rerun = run_ablation(grid, ds, ds, spec);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        CHECK(cells[i].mae == rerun[i].mae);
    }

    const std::string table = format_ablation_table(cells);
    CHECK(table.rfind("columns,aggregator,mae,seconds\n", 0) == 0);
    CHECK(table.find("1,off,") != std::string::npos);
    CHECK(table.find("2,on,") != std::string::npos);
}
