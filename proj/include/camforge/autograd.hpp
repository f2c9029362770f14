#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "camforge/params.hpp"
#include "camforge/tensor.hpp"

namespace camforge {

class Tape;

// One value in the computation graph. Leaf nodes either own their value
// (inputs) or alias a Parameter's value. Op nodes own their output and carry
// a closure that scatters the node's gradient to its parents.
struct Node {
    Tensor value_storage;
    Parameter* param = nullptr;
    Tensor grad;
    bool grad_live = false;
    std::function<void()> backward;
    Tape* owner = nullptr;

    const Tensor& value() const { return param ? param->value : value_storage; }

    void add_grad(const Tensor& g) {
        if (param) {
            accumulate(param->grad, g);
            return;
        }
        if (!grad_live) {
            grad = Tensor(value().shape());
            grad_live = true;
        }
        accumulate(grad, g);
    }
};

using NodePtr = std::shared_ptr<Node>;

// Handle to a node. Cheap to copy; the graph stays alive through these
// shared handles (and, during training, through the tape).
class Var {
public:
    Var() = default;
    explicit Var(NodePtr n) : node_(std::move(n)) {}

    bool defined() const { return node_ != nullptr; }
    const Tensor& value() const {
        if (!node_) throw UsageError("reading the value of an empty variable");
        return node_->value();
    }

    // Gradient accumulated by backward. Zeros if no gradient reached this
    // node; parameters report their parameter gradient.
    Tensor grad() const {
        if (!node_) throw UsageError("reading the gradient of an empty variable");
        if (node_->param) return node_->param->grad;
        if (!node_->grad_live) return Tensor(node_->value().shape());
        return node_->grad;
    }

    const NodePtr& node() const { return node_; }

private:
    NodePtr node_;
};

// Records op nodes in execution order; backward replays them in reverse.
// A null Tape* passed to an op means inference: no closure is built and no
// node is retained, so intermediate values free as soon as possible.
class Tape {
public:
    void record(NodePtr n) {
        n->owner = this;
        nodes_.push_back(std::move(n));
    }

    size_t size() const { return nodes_.size(); }

    // Seeds d(loss)/d(loss) = 1 and runs every recorded closure in reverse.
    // The loss must be a scalar recorded on this tape; a tape runs backward
    // once. Gradients of separate backward passes accumulate additively in
    // the parameters until zero_grads.
    void backward(const Var& loss);

private:
    std::vector<NodePtr> nodes_;
    bool consumed_ = false;
};

// Differentiable leaf holding a copy of `value`. Its gradient is readable
// through Var::grad() after backward.
Var make_input(Tensor value);

// Leaf aliasing a parameter's value; backward accumulates into its .grad.
Var make_leaf(Parameter& p);

} // namespace camforge
