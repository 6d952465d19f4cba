#include <doctest.h>

#include "amdcn/autodiff.hpp"
#include "amdcn/metrics.hpp"
#include "oracles.hpp"

using namespace amdcn;
using oracle::rand_tensor;

TEST_CASE("tape records one step per op and clears") {
    GradTape tape;
    Rng rng(1);
    NodePtr x = tape.leaf(rand_tensor({1, 1, 4, 4}, rng));
    NodePtr k = tape.leaf(rand_tensor({1, 1, 3, 3}, rng));
    NodePtr b = tape.leaf(Tensor({1}));
    CHECK(tape.size() == 0); // leaves record nothing
    NodePtr y = tape.relu(tape.conv2d(x, k, b, ConvSpec::make(3, 3, 1, 1, 1)));
    NodePtr s = tape.reduce_sum(y);
    CHECK(tape.size() == 3);
    tape.backward(s);
    CHECK(ops::reduce_sum(ops::abs(x->grad)) > 0.0);
    tape.clear();
    CHECK(tape.size() == 0);
}

TEST_CASE("backward requires a scalar output unless seeded") {
    GradTape tape;
    NodePtr x = tape.leaf(Tensor({2, 2}, 1.0));
    NodePtr y = tape.abs(x);
    CHECK_THROWS_AS(tape.backward(y), ShapeError);
    CHECK_THROWS_AS(tape.backward(y, Tensor({3}, 1.0)), ShapeError);
    tape.backward(y, Tensor({2, 2}, 1.0));
    CHECK(x->grad[0] == 1.0);
}

TEST_CASE("gradients accumulate when a node is reused") {
    GradTape tape;
    NodePtr x = tape.leaf(Tensor({2}, std::vector<scalar>{3.0, -1.0}));
    NodePtr y = tape.add(x, x); // dy/dx = 2
    NodePtr s = tape.reduce_sum(y);
    tape.backward(s);
    CHECK(x->grad[0] == 2.0);
    CHECK(x->grad[1] == 2.0);
}

TEST_CASE("composite scaled-MAE expression matches finite differences") {
    // mean(|a - 255*b|) via tape ops, gradient wrt a
    Rng rng(9);
    Tensor a_val = rand_tensor({2, 3, 4}, rng, 0.0, 2.0);
    const Tensor b_val = rand_tensor({2, 3, 4}, rng, 0.0, 0.005);
    const scalar n = static_cast<scalar>(a_val.numel());

    GradTape tape;
    NodePtr a = tape.leaf(a_val);
    NodePtr b = tape.leaf(b_val, /*requires_grad=*/false);
    NodePtr loss = tape.scale(tape.reduce_sum(tape.abs(tape.sub(a, tape.scale(b, 255.0)))), 1.0 / n);
    tape.backward(loss);

    auto objective = [&] {
        scalar acc = 0.0;
        for (std::int64_t i = 0; i < a_val.numel(); ++i) acc += std::fabs(a_val[i] - 255.0 * b_val[i]);
        return acc / n;
    };
    const Tensor numeric = oracle::numeric_grad(a_val, objective);
    CHECK(oracle::grads_close(a->grad, numeric));

    // the tape route agrees with the explicit loss + adjoint
    CHECK(loss->value[0] == doctest::Approx(metrics::scaled_mae_loss(a_val, b_val, 255.0)));
    CHECK(oracle::max_abs_diff(a->grad, metrics::scaled_mae_loss_grad(a_val, b_val, 255.0)) < 1e-15);
}

TEST_CASE("tape mul/sub/scale adjoints match finite differences") {
    Rng rng(13);
    Tensor a_val = rand_tensor({3, 3}, rng);
    Tensor b_val = rand_tensor({3, 3}, rng);

    GradTape tape;
    NodePtr a = tape.leaf(a_val);
    NodePtr b = tape.leaf(b_val);
    NodePtr out = tape.reduce_sum(tape.mul(tape.scale(a, 1.7), tape.sub(a, b)));
    tape.backward(out);

    auto objective = [&] {
        scalar acc = 0.0;
        for (std::int64_t i = 0; i < a_val.numel(); ++i) acc += 1.7 * a_val[i] * (a_val[i] - b_val[i]);
        return acc;
    };
    CHECK(oracle::grads_close(a->grad, oracle::numeric_grad(a_val, objective)));
    CHECK(oracle::grads_close(b->grad, oracle::numeric_grad(b_val, objective)));
}

TEST_CASE("concat through the tape splits gradients by channel") {
    Rng rng(21);
    GradTape tape;
    NodePtr a = tape.leaf(rand_tensor({1, 2, 2, 2}, rng));
    NodePtr b = tape.leaf(rand_tensor({1, 3, 2, 2}, rng));
    NodePtr cat = tape.concat_channels({a, b});
    // weight channel 0 of the concat only
    Tensor seed(cat->value.shape());
    for (std::int64_t i = 0; i < 4; ++i) seed[i] = 1.0;
    tape.backward(cat, seed);
    CHECK(ops::reduce_sum(a->grad) == doctest::Approx(4.0));
    CHECK(ops::reduce_sum(b->grad) == doctest::Approx(0.0));
}
