#include "amdcn/autodiff.hpp"

namespace amdcn {

namespace {

void accumulate(Tensor& into, const Tensor& g) {
    scalar* d = into.data();
    const scalar* s = g.data();
    for (std::int64_t i = 0; i < into.numel(); ++i) d[i] += s[i];
}

} // namespace

void GradTape::record(std::string op, std::function<void()> fn) {
    steps_.push_back(Step{std::move(op), std::move(fn)});
}

NodePtr GradTape::leaf(Tensor value, bool requires_grad) {
    return std::make_shared<Node>(std::move(value), requires_grad);
}

NodePtr GradTape::conv2d(const NodePtr& input, const NodePtr& kernel, const NodePtr& bias,
                         const ConvSpec& spec) {
    auto out = std::make_shared<Node>(ops::conv2d(input->value, kernel->value, bias->value, spec));
    record("conv2d", [input, kernel, bias, spec, out] {
        ops::ConvGrads g = ops::conv2d_backward(out->grad, input->value, kernel->value, spec);
        if (input->requires_grad) accumulate(input->grad, g.input);
        if (kernel->requires_grad) accumulate(kernel->grad, g.kernel);
        if (bias->requires_grad) accumulate(bias->grad, g.bias);
    });
    return out;
}

NodePtr GradTape::relu(const NodePtr& x) {
    auto out = std::make_shared<Node>(ops::relu(x->value));
    record("relu", [x, out] {
        if (x->requires_grad) accumulate(x->grad, ops::relu_backward(out->grad, x->value));
    });
    return out;
}

NodePtr GradTape::concat_channels(const std::vector<NodePtr>& xs) {
    std::vector<Tensor> vals;
    std::vector<std::int64_t> channels;
    vals.reserve(xs.size());
    for (const auto& x : xs) {
        vals.push_back(x->value);
        channels.push_back(x->value.dim(1));
    }
    auto out = std::make_shared<Node>(ops::concat_channels(vals));
    record("concat_channels", [xs, channels, out] {
        std::vector<Tensor> slices = ops::concat_channels_backward(out->grad, channels);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (xs[i]->requires_grad) accumulate(xs[i]->grad, slices[i]);
        }
    });
    return out;
}

NodePtr GradTape::add(const NodePtr& a, const NodePtr& b) {
    auto out = std::make_shared<Node>(ops::add(a->value, b->value));
    record("add", [a, b, out] {
        if (a->requires_grad) accumulate(a->grad, out->grad);
        if (b->requires_grad) accumulate(b->grad, out->grad);
    });
    return out;
}

NodePtr GradTape::sub(const NodePtr& a, const NodePtr& b) {
    auto out = std::make_shared<Node>(ops::sub(a->value, b->value));
    record("sub", [a, b, out] {
        if (a->requires_grad) accumulate(a->grad, out->grad);
        if (b->requires_grad) accumulate(b->grad, ops::mul(out->grad, -1.0));
    });
    return out;
}

NodePtr GradTape::mul(const NodePtr& a, const NodePtr& b) {
    auto out = std::make_shared<Node>(ops::mul(a->value, b->value));
    record("mul", [a, b, out] {
        if (a->requires_grad) accumulate(a->grad, ops::mul_backward(out->grad, b->value));
        if (b->requires_grad) accumulate(b->grad, ops::mul_backward(out->grad, a->value));
    });
    return out;
}

NodePtr GradTape::abs(const NodePtr& x) {
    auto out = std::make_shared<Node>(ops::abs(x->value));
    record("abs", [x, out] {
        if (x->requires_grad) accumulate(x->grad, ops::abs_backward(out->grad, x->value));
    });
    return out;
}

NodePtr GradTape::scale(const NodePtr& x, scalar c) {
    auto out = std::make_shared<Node>(ops::mul(x->value, c));
    record("scale", [x, c, out] {
        if (x->requires_grad) accumulate(x->grad, ops::mul(out->grad, c));
    });
    return out;
}

NodePtr GradTape::reduce_sum(const NodePtr& x) {
    auto out = std::make_shared<Node>(Tensor({1}, std::vector<scalar>{ops::reduce_sum(x->value)}));
    Shape in_shape = x->value.shape();
    record("reduce_sum", [x, in_shape, out] {
        if (x->requires_grad) accumulate(x->grad, ops::reduce_sum_backward(out->grad[0], in_shape));
    });
    return out;
}

void GradTape::backward(const NodePtr& output) {
    if (output->value.numel() != 1) {
        throw ShapeError("backward: implicit seed requires a scalar output, got " +
                         output->value.shape_str());
    }
    backward(output, Tensor::full(output->value.shape(), 1.0));
}

void GradTape::backward(const NodePtr& output, const Tensor& seed) {
    if (!seed.same_shape(output->value)) {
        throw ShapeError("backward: seed shape " + seed.shape_str() + " does not match output " +
                         output->value.shape_str());
    }
    accumulate(output->grad, seed);
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) it->fn();
}

} // namespace amdcn
