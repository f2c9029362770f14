#pragma once

#include <cstdint>
#include <vector>

#include "camforge/autograd.hpp"
#include "camforge/ops.hpp"

// Differentiable wrappers over the raw kernels. Every op validates shapes,
// checks its output for non-finite values, and (when a tape is given)
// records a backward closure. Optional biases are default-constructed Vars.
namespace camforge::vop {

Var conv1d(Tape* tape, const Var& x, const Var& w, const Var& b, const ops::Conv1dGeom& g);
Var conv2d(Tape* tape, const Var& x, const Var& w, const Var& b, const ops::Conv2dGeom& g);
Var linear(Tape* tape, const Var& x, const Var& w, const Var& b);

// Training-mode batch norm over dim 1 of [C,N]. Batch statistics are written
// to *batch_mean / *batch_var (when non-null) for running-average updates.
Var batchnorm_train(Tape* tape, const Var& x, const Var& gamma, const Var& beta, float eps,
                    Tensor* batch_mean, Tensor* batch_var);
Var batchnorm_infer(Tape* tape, const Var& x, const Var& gamma, const Var& beta,
                    const Tensor& rmean, const Tensor& rvar, float eps);

Var relu(Tape* tape, const Var& x);
Var sigmoid(Tape* tape, const Var& x);
Var add(Tape* tape, const Var& a, const Var& b);
Var mul(Tape* tape, const Var& a, const Var& b);
Var concat0(Tape* tape, const Var& a, const Var& b);
Var reshape(Tape* tape, const Var& x, std::vector<int64_t> shape);
Var transpose2d(Tape* tape, const Var& x);

Var global_mean(Tape* tape, const Var& x);
Var segment_mean(Tape* tape, const Var& x, int64_t seg_len);
Var expand_segments(Tape* tape, const Var& x, int64_t seg_len, int64_t t);
Var add_col(Tape* tape, const Var& x, const Var& v);
Var stats_pool(Tape* tape, const Var& x, float eps = 1e-10f);
Var stack_cols(Tape* tape, const std::vector<Var>& xs);
Var scale(Tape* tape, const Var& x, float c);
Var sum_all(Tape* tape, const Var& x);

// Context-aware multiplicative masking. Pools a global and a per-segment
// context vector are combined (broadcast add), squeezed through a bottleneck
// (w1/b1, relu) and re-expanded (w2/b2, sigmoid) into a per-segment mask
// that scales x segment-wise. w1 is [H,C,1], w2 is [C,H,1].
Var cam_mask(Tape* tape, const Var& x, const Var& e_global, const Var& e_seg, const Var& w1,
             const Var& b1, const Var& w2, const Var& b2, int64_t seg_len);

} // namespace camforge::vop
