#include <doctest.h>

#include "amdcn/metrics.hpp"
#include "amdcn/ops.hpp"
#include "oracles.hpp"

using namespace amdcn;
using oracle::rand_tensor;

TEST_CASE("scaled MAE loss basics") {
    Rng rng(1);
    const Tensor truth = rand_tensor({4, 4}, rng, 0.0, 0.01);
    const Tensor exact = ops::mul(truth, 255.0);
    CHECK(metrics::scaled_mae_loss(exact, truth, 255.0) == 0.0);

    const Tensor off = ops::add(exact, 0.37);
    CHECK(metrics::scaled_mae_loss(off, truth, 255.0) == doctest::Approx(0.37).epsilon(1e-12));

    CHECK_THROWS_AS(metrics::scaled_mae_loss(Tensor({2, 2}), Tensor({3, 2}), 255.0), ShapeError);
}

TEST_CASE("loss adjoint matches finite differences away from ties") {
    Rng rng(2);
    Tensor pred = rand_tensor({3, 5}, rng, -1.0, 1.0);
    const Tensor truth = rand_tensor({3, 5}, rng, 0.0, 0.002);
    auto objective = [&] { return metrics::scaled_mae_loss(pred, truth, 255.0); };
    const Tensor analytic = metrics::scaled_mae_loss_grad(pred, truth, 255.0);
    CHECK(oracle::grads_close(analytic, oracle::numeric_grad(pred, objective)));

    // adjoint magnitude never exceeds 1/n
    const scalar inv_n = 1.0 / static_cast<scalar>(pred.numel());
    for (std::int64_t i = 0; i < analytic.numel(); ++i) {
        CHECK(std::fabs(analytic[i]) <= inv_n + 1e-18);
    }
}

TEST_CASE("loss is nonnegative and zero only at the scaled target") {
    Rng rng(3);
    const Tensor truth = rand_tensor({4, 4}, rng, 0.0, 0.01);
    for (int rep = 0; rep < 10; ++rep) {
        const Tensor pred = rand_tensor({4, 4}, rng, -2.0, 2.0);
        const scalar loss = metrics::scaled_mae_loss(pred, truth, 255.0);
        CHECK(loss >= 0.0);
        if (loss == 0.0) CHECK(oracle::max_abs_diff(pred, ops::mul(truth, 255.0)) == 0.0);
    }
}

TEST_CASE("count MAE") {
    CHECK(metrics::count_mae({4.0, 7.5}, {4.0, 7.5}) == 0.0);
    CHECK(metrics::count_mae({10.0, 20.0}, {12.0, 16.0}) == doctest::Approx(3.0));
    CHECK(metrics::count_mae({5.0}, {9.25}) == doctest::Approx(4.25));
    CHECK_THROWS_AS(metrics::count_mae({}, {}), ShapeError);
    CHECK_THROWS_AS(metrics::count_mae({1.0}, {1.0, 2.0}), ShapeError);
}

TEST_CASE("GAME basics and the 4x4 hand case") {
    Rng rng(4);
    const Tensor same = rand_tensor({8, 8}, rng, 0.0, 1.0);
    for (int level = 0; level <= 3; ++level) CHECK(metrics::game(same, same, level) == 0.0);

    Tensor pred({4, 4});
    Tensor truth({4, 4});
    pred.at2(0, 0) = 1.0;
    truth.at2(3, 3) = 1.0;
    CHECK(metrics::game(pred, truth, 0) == doctest::Approx(0.0));
    CHECK(metrics::game(pred, truth, 1) == doctest::Approx(2.0));
    CHECK(metrics::game_monotonicity_check(pred, truth, 2));
}

TEST_CASE("GAME(0) is the absolute count difference") {
    Rng rng(5);
    for (int rep = 0; rep < 5; ++rep) {
        const Tensor a = rand_tensor({6, 9}, rng, 0.0, 1.0);
        const Tensor b = rand_tensor({6, 9}, rng, 0.0, 1.0);
        CHECK(metrics::game(a, b, 0) ==
              doctest::Approx(std::fabs(ops::reduce_sum(a) - ops::reduce_sum(b))).epsilon(1e-12));
    }
}

TEST_CASE("batch GAME(0) equals count MAE of the integrated maps") {
    Rng rng(6);
    std::vector<Tensor> preds, truths;
    std::vector<scalar> pred_counts, true_counts;
    for (int i = 0; i < 8; ++i) {
        preds.push_back(rand_tensor({8, 8}, rng, 0.0, 1.0));
        truths.push_back(rand_tensor({8, 8}, rng, 0.0, 1.0));
        pred_counts.push_back(ops::reduce_sum(preds.back()));
        true_counts.push_back(ops::reduce_sum(truths.back()));
    }
    std::vector<const Tensor*> p, t;
    for (int i = 0; i < 8; ++i) {
        p.push_back(&preds[static_cast<std::size_t>(i)]);
        t.push_back(&truths[static_cast<std::size_t>(i)]);
    }
    CHECK(std::fabs(metrics::game_batch(p, t, 0) - metrics::count_mae(pred_counts, true_counts)) < 1e-9);
}

TEST_CASE("GAME is monotone in the level on power-of-two maps") {
    Rng rng(7);
    for (int rep = 0; rep < 25; ++rep) {
        const Tensor a = rand_tensor({16, 16}, rng, 0.0, 1.0);
        const Tensor b = rand_tensor({16, 16}, rng, 0.0, 1.0);
        CHECK(metrics::game_monotonicity_check(a, b, 4));
        scalar prev = metrics::game(a, b, 0);
        for (int level = 1; level <= 4; ++level) {
            const scalar cur = metrics::game(a, b, level);
            CHECK(cur >= prev - 1e-12);
            prev = cur;
        }
    }
}

TEST_CASE("remainder pixels go to the leading bands") {
    // 5 columns at level 1: bands of 3 and 2
    Tensor pred({2, 5});
    Tensor truth({2, 5});
    pred.at2(0, 2) = 1.0; // column 2 is still in the left band (size 3)
    CHECK(metrics::game(pred, truth, 1) == doctest::Approx(1.0));
    Tensor pred2({2, 5});
    pred2.at2(0, 3) = 1.0; // column 3 is in the right band
    CHECK(metrics::game(pred2, truth, 1) == doctest::Approx(1.0));
    // both cases differ in which region carries the error, not the total
}

TEST_CASE("GAME rejects bad levels and mismatched maps") {
    const Tensor a({4, 4});
    CHECK_THROWS_AS(metrics::game(a, Tensor({4, 5}), 0), ShapeError);
    CHECK_THROWS_AS(metrics::game(a, a, -1), ShapeError);
    CHECK_THROWS_AS(metrics::game(a, a, 9), ShapeError);
    CHECK_THROWS_AS(metrics::game(a, a, 3), ShapeError); // 8 bands > 4 pixels
    CHECK_THROWS_AS(metrics::game_batch({}, {}, 0), ShapeError);
}
