#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "amdcn/ops.hpp"
#include "amdcn/tensor.hpp"

namespace amdcn {

// A tape node: the forward value plus a same-shaped gradient accumulator.
struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = true;

    explicit Node(Tensor v, bool rg = true)
        : value(std::move(v)), grad(value.shape()), requires_grad(rg) {}
};

using NodePtr = std::shared_ptr<Node>;

// Reverse-mode tape. Each op records its adjoint as a closure over the
// participating nodes; backward() replays the closures exactly once, in
// reverse execution order, accumulating into Node::grad. The tape is owned
// by a single training thread.
class GradTape {
public:
    NodePtr leaf(Tensor value, bool requires_grad = true);

    NodePtr conv2d(const NodePtr& input, const NodePtr& kernel, const NodePtr& bias, const ConvSpec& spec);
    NodePtr relu(const NodePtr& x);
    NodePtr concat_channels(const std::vector<NodePtr>& xs);
    NodePtr add(const NodePtr& a, const NodePtr& b);
    NodePtr sub(const NodePtr& a, const NodePtr& b);
    NodePtr mul(const NodePtr& a, const NodePtr& b);
    NodePtr abs(const NodePtr& x);
    NodePtr scale(const NodePtr& x, scalar c);
    NodePtr reduce_sum(const NodePtr& x); // rank-1 singleton result

    // Seeds the output gradient and replays recorded adjoints in reverse.
    void backward(const NodePtr& output);                     // scalar output, seed 1
    void backward(const NodePtr& output, const Tensor& seed); // arbitrary output

    std::size_t size() const { return steps_.size(); }
    void clear() { steps_.clear(); }

private:
    struct Step {
        std::string op;
        std::function<void()> fn;
    };
    void record(std::string op, std::function<void()> fn);
    std::vector<Step> steps_;
};

} // namespace amdcn
