#include "camforge/autograd.hpp"

namespace camforge {

void Tape::backward(const Var& loss) {
    if (consumed_) throw UsageError("backward already ran on this tape");
    if (nodes_.empty()) throw UsageError("backward on an empty tape");
    if (!loss.defined() || loss.node()->owner != this)
        throw UsageError("backward target was not recorded on this tape");
    if (loss.value().numel() != 1)
        throw UsageError("backward target must be a scalar, got shape " +
                         loss.value().shape_str());
    consumed_ = true;
    loss.node()->add_grad(Tensor::scalar(1.0f));
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        Node& n = **it;
        if (n.grad_live && n.backward) n.backward();
    }
}

Var make_input(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value_storage = std::move(value);
    return Var(std::move(n));
}

Var make_leaf(Parameter& p) {
    auto n = std::make_shared<Node>();
    n->param = &p;
    return Var(std::move(n));
}

} // namespace camforge
