#include "camforge/var_ops.hpp"

#include <algorithm>

namespace camforge::vop {

namespace {

NodePtr new_node(Tensor value, const char* op) {
    ensure_finite(value, op);
    auto n = std::make_shared<Node>();
    n->value_storage = std::move(value);
    return n;
}

void require(const Var& v, const char* what) {
    if (!v.defined()) throw UsageError(std::string(what) + " is an empty variable");
}

} // namespace

Var conv1d(Tape* tape, const Var& x, const Var& w, const Var& b, const ops::Conv1dGeom& g) {
    require(x, "conv1d input");
    require(w, "conv1d weight");
    const Tensor* bt = b.defined() ? &b.value() : nullptr;
    auto n = new_node(ops::conv1d(x.value(), w.value(), bt, g), "conv1d");
    if (tape) {
        Node* np = n.get();
        NodePtr xn = x.node(), wn = w.node(), bn = b.defined() ? b.node() : nullptr;
        n->backward = [np, xn, wn, bn, g]() {
            Tensor gx, gw, gb;
            ops::conv1d_backward(np->grad, xn->value(), wn->value(), bn != nullptr, g, gx, gw, gb);
            xn->add_grad(gx);
            wn->add_grad(gw);
            if (bn) bn->add_grad(gb);
        };
        tape->record(n);
    }
    return Var(n);
}

Var conv2d(Tape* tape, const Var& x, const Var& w, const Var& b, const ops::Conv2dGeom& g) {
    require(x, "conv2d input");
    require(w, "conv2d weight");
    const Tensor* bt = b.defined() ? &b.value() : nullptr;
    auto n = new_node(ops::conv2d(x.value(), w.value(), bt, g), "conv2d");
    if (tape) {
        Node* np = n.get();
        NodePtr xn = x.node(), wn = w.node(), bn = b.defined() ? b.node() : nullptr;
        n->backward = [np, xn, wn, bn, g]() {
            Tensor gx, gw, gb;
            ops::conv2d_backward(np->grad, xn->value(), wn->value(), bn != nullptr, g, gx, gw, gb);
            xn->add_grad(gx);
            wn->add_grad(gw);
            if (bn) bn->add_grad(gb);
        };
        tape->record(n);
    }
    return Var(n);
}

Var linear(Tape* tape, const Var& x, const Var& w, const Var& b) {
    require(x, "linear input");
    require(w, "linear weight");
    const Tensor* bt = b.defined() ? &b.value() : nullptr;
    auto n = new_node(ops::linear(x.value(), w.value(), bt), "linear");
    if (tape) {
        Node* np = n.get();
        NodePtr xn = x.node(), wn = w.node(), bn = b.defined() ? b.node() : nullptr;
        n->backward = [np, xn, wn, bn]() {
            Tensor gx, gw, gb;
            ops::linear_backward(np->grad, xn->value(), wn->value(), bn != nullptr, gx, gw, gb);
            xn->add_grad(gx);
            wn->add_grad(gw);
            if (bn) bn->add_grad(gb);
        };
        tape->record(n);
    }
    return Var(n);
}

Var batchnorm_train(Tape* tape, const Var& x, const Var& gamma, const Var& beta, float eps,
                    Tensor* batch_mean, Tensor* batch_var) {
    require(x, "batchnorm input");
    Tensor mean, var;
    auto n = new_node(ops::bn_train(x.value(), gamma.value(), beta.value(), eps, mean, var),
                      "batchnorm(train)");
    if (batch_mean) *batch_mean = mean;
    if (batch_var) *batch_var = var;
    if (tape) {
        Node* np = n.get();
        NodePtr xn = x.node(), gn = gamma.node(), bn = beta.node();
        n->backward = [np, xn, gn, bn, mean, var, eps]() {
            Tensor gx, gg, gb;
            ops::bn_train_backward(np->grad, xn->value(), gn->value(), mean, var, eps, gx, gg, gb);
            xn->add_grad(gx);
            gn->add_grad(gg);
            bn->add_grad(gb);
        };
        tape->record(n);
    }
    return Var(n);
}

Var batchnorm_infer(Tape* tape, const Var& x, const Var& gamma, const Var& beta,
                    const Tensor& rmean, const Tensor& rvar, float eps) {
    require(x, "batchnorm input");
    auto n = new_node(ops::bn_infer(x.value(), gamma.value(), beta.value(), rmean, rvar, eps),
                      "batchnorm(infer)");
    if (tape) {
        Node* np = n.get();
        NodePtr xn = x.node(), gn = gamma.node(), bn = beta.node();
        Tensor rm = rmean, rv = rvar;
        n->backward = [np, xn, gn, bn, rm, rv, eps]() {
            Tensor gx, gg, gb;
            ops::bn_infer_backward(np->grad, xn->value(), gn->value(), rm, rv, eps, gx, gg, gb);
            xn->add_grad(gx);
            gn->add_grad(gg);
            bn->add_grad(gb);
        };
        tape->record(n);
    }
    return Var(n);
}

Var relu(Tape* tape, const Var& x) {
    require(x, "relu input");
    auto n = new_node(ops::relu(x.value()), "relu");
    if (tape) {
        Node* np = n.get();
        NodePtr xn = x.node();
        n->backward = [np, xn]() { xn->add_grad(ops::relu_backward(np->grad, xn->value())); };
        tape->record(n);
    }
    return Var(n);
}

Var sigmoid(Tape* tape, const Var& x) {
    require(x, "sigmoid input");
    auto n = new_node(ops::sigmoid(x.value()), "sigmoid");
    if (tape) {
        Node* np = n.get();
        NodePtr xn = x.node();
        n->backward = [np, xn]() { xn->add_grad(ops::sigmoid_backward(np->grad, np->value())); };
        tape->record(n);
    }
    return Var(n);
}

Var add(Tape* tape, const Var& a, const Var& b) {
    require(a, "add input");
    require(b, "add input");
    auto n = new_node(ops::add(a.value(), b.value()), "add");
    if (tape) {
        Node* np = n.get();
        NodePtr an = a.node(), bn = b.node();
        n->backward = [np, an, bn]() {
            an->add_grad(np->grad);
            bn->add_grad(np->grad);
        };
        tape->record(n);
    }
    return Var(n);
}

Var mul(Tape* tape, const Var& a, const Var& b) {
    require(a, "mul input");
    require(b, "mul input");
    auto n = new_node(ops::mul(a.value(), b.value()), "mul");
    if (tape) {
        Node* np = n.get();
        NodePtr an = a.node(), bn = b.node();
        n->backward = [np, an, bn]() {
            an->add_grad(ops::mul(np->grad, bn->value()));
            bn->add_grad(ops::mul(np->grad, an->value()));
        };
        tape->record(n);
    }
    return Var(n);
}

Var concat0(Tape* tape, const Var& a, const Var& b) {
    require(a, "concat input");
    require(b, "concat input");
    auto n = new_node(ops::concat0(a.value(), b.value()), "concat");
    if (tape) {
        Node* np = n.get();
        NodePtr an = a.node(), bn = b.node();
        n->backward = [np, an, bn]() {
            const Tensor& go = np->grad;
            int64_t na = an->value().numel();
            Tensor ga(an->value().shape());
            Tensor gb(bn->value().shape());
            std::copy(go.data(), go.data() + na, ga.data());
            std::copy(go.data() + na, go.data() + go.numel(), gb.data());
            an->add_grad(ga);
            bn->add_grad(gb);
        };
        tape->record(n);
    }
    return Var(n);
}

Var reshape(Tape* tape, const Var& x, std::vector<int64_t> shape) {
    require(x, "reshape input");
    int64_t n_new = 1;
    for (int64_t d : shape) n_new *= d;
    if (n_new != x.value().numel())
        throw UsageError("reshape cannot change element count: " + x.value().shape_str() +
                          " has " + std::to_string(x.value().numel()) + " elements");
    Tensor y(std::move(shape), std::vector<float>(x.value().data(),
                                                  x.value().data() + x.value().numel()));
    auto n = std::make_shared<Node>();
    n->value_storage = std::move(y);
    if (tape) {
        Node* np = n.get();
        NodePtr xn = x.node();
        n->backward = [np, xn]() {
            Tensor gx(xn->value().shape(),
                      std::vector<float>(np->grad.data(), np->grad.data() + np->grad.numel()));
            xn->add_grad(gx);
        };
        tape->record(n);
    }
    return Var(n);
}

Var transpose2d(Tape* tape, const Var& x) {
    require(x, "transpose input");
    auto n = new_node(ops::transpose2d(x.value()), "transpose");
    if (tape) {
        Node* np = n.get();
        NodePtr xn = x.node();
        n->backward = [np, xn]() { xn->add_grad(ops::transpose2d(np->grad)); };
        tape->record(n);
    }
    return Var(n);
}

Var global_mean(Tape* tape, const Var& x) {
    require(x, "global mean input");
    auto n = new_node(ops::global_mean(x.value()), "global_mean");
    if (tape) {
        Node* np = n.get();
        NodePtr xn = x.node();
        n->backward = [np, xn]() {
            int64_t c = xn->value().dim(0), t = xn->value().dim(1);
            Tensor gx({c, t});
            for (int64_t ci = 0; ci < c; ++ci) {
                float v = np->grad[ci] / static_cast<float>(t);
                for (int64_t i = 0; i < t; ++i) gx.at(ci, i) = v;
            }
            xn->add_grad(gx);
        };
        tape->record(n);
    }
    return Var(n);
}

Var segment_mean(Tape* tape, const Var& x, int64_t seg_len) {
    require(x, "segment mean input");
    auto n = new_node(ops::segment_mean(x.value(), seg_len), "segment_mean");
    if (tape) {
        Node* np = n.get();
        NodePtr xn = x.node();
        n->backward = [np, xn, seg_len]() {
            int64_t c = xn->value().dim(0), t = xn->value().dim(1);
            int64_t k = np->grad.dim(1);
            Tensor gx({c, t});
            for (int64_t ci = 0; ci < c; ++ci)
                for (int64_t s = 0; s < k; ++s) {
                    int64_t lo = s * seg_len, hi = std::min(lo + seg_len, t);
                    float v = np->grad.at(ci, s) / static_cast<float>(hi - lo);
                    for (int64_t i = lo; i < hi; ++i) gx.at(ci, i) = v;
                }
            xn->add_grad(gx);
        };
        tape->record(n);
    }
    return Var(n);
}

Var expand_segments(Tape* tape, const Var& x, int64_t seg_len, int64_t t) {
    require(x, "segment expand input");
    auto n = new_node(ops::expand_segments(x.value(), seg_len, t), "expand_segments");
    if (tape) {
        Node* np = n.get();
        NodePtr xn = x.node();
        n->backward = [np, xn, seg_len, t]() {
            int64_t c = xn->value().dim(0), k = xn->value().dim(1);
            Tensor gx({c, k});
            for (int64_t ci = 0; ci < c; ++ci)
                for (int64_t s = 0; s < k; ++s) {
                    int64_t lo = s * seg_len, hi = std::min(lo + seg_len, t);
                    double acc = 0.0;
                    for (int64_t i = lo; i < hi; ++i) acc += np->grad.at(ci, i);
                    gx.at(ci, s) = static_cast<float>(acc);
                }
            xn->add_grad(gx);
        };
        tape->record(n);
    }
    return Var(n);
}

Var add_col(Tape* tape, const Var& x, const Var& v) {
    require(x, "column add input");
    require(v, "column add vector");
    auto n = new_node(ops::add_col(x.value(), v.value()), "add_col");
    if (tape) {
        Node* np = n.get();
        NodePtr xn = x.node(), vn = v.node();
        n->backward = [np, xn, vn]() {
            xn->add_grad(np->grad);
            int64_t c = np->grad.dim(0), k = np->grad.dim(1);
            Tensor gv({c});
            for (int64_t ci = 0; ci < c; ++ci) {
                double acc = 0.0;
                for (int64_t i = 0; i < k; ++i) acc += np->grad.at(ci, i);
                gv[ci] = static_cast<float>(acc);
            }
            vn->add_grad(gv);
        };
        tape->record(n);
    }
    return Var(n);
}

Var stats_pool(Tape* tape, const Var& x, float eps) {
    require(x, "stats pool input");
    auto n = new_node(ops::stats_pool(x.value(), eps), "stats_pool");
    if (tape) {
        Node* np = n.get();
        NodePtr xn = x.node();
        n->backward = [np, xn, eps]() {
            Tensor gx;
            ops::stats_pool_backward(np->grad, xn->value(), eps, gx);
            xn->add_grad(gx);
        };
        tape->record(n);
    }
    return Var(n);
}

Var stack_cols(Tape* tape, const std::vector<Var>& xs) {
    std::vector<const Tensor*> vals;
    vals.reserve(xs.size());
    for (const Var& v : xs) {
        require(v, "stack input");
        vals.push_back(&v.value());
    }
    auto n = new_node(ops::stack_cols(vals), "stack_cols");
    if (tape) {
        Node* np = n.get();
        std::vector<NodePtr> parents;
        parents.reserve(xs.size());
        for (const Var& v : xs) parents.push_back(v.node());
        n->backward = [np, parents]() {
            int64_t d = np->grad.dim(0);
            for (size_t j = 0; j < parents.size(); ++j) {
                Tensor g({d});
                for (int64_t i = 0; i < d; ++i) g[i] = np->grad.at(i, static_cast<int64_t>(j));
                parents[j]->add_grad(g);
            }
        };
        tape->record(n);
    }
    return Var(n);
}

Var scale(Tape* tape, const Var& x, float c) {
    require(x, "scale input");
    auto n = new_node(ops::scale(x.value(), c), "scale");
    if (tape) {
        Node* np = n.get();
        NodePtr xn = x.node();
        n->backward = [np, xn, c]() { xn->add_grad(ops::scale(np->grad, c)); };
        tape->record(n);
    }
    return Var(n);
}

Var sum_all(Tape* tape, const Var& x) {
    require(x, "sum input");
    auto n = new_node(ops::sum_all(x.value()), "sum");
    if (tape) {
        Node* np = n.get();
        NodePtr xn = x.node();
        n->backward = [np, xn]() { xn->add_grad(Tensor::full(xn->value().shape(), np->grad[0])); };
        tape->record(n);
    }
    return Var(n);
}

Var cam_mask(Tape* tape, const Var& x, const Var& e_global, const Var& e_seg, const Var& w1,
             const Var& b1, const Var& w2, const Var& b2, int64_t seg_len) {
    require(x, "cam input");
    Var ctx = add_col(tape, e_seg, e_global);
    Var h = relu(tape, conv1d(tape, ctx, w1, b1, {}));
    Var m = sigmoid(tape, conv1d(tape, h, w2, b2, {}));
    Var mask = expand_segments(tape, m, seg_len, x.value().dim(1));
    return mul(tape, x, mask);
}

} // namespace camforge::vop
