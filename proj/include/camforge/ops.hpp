#pragma once

#include <cstdint>
#include <vector>

#include "camforge/tensor.hpp"

// Raw compute kernels. Pure functions over tensors: no state, no allocation
// tricks, fixed loop order so results are bit-identical run to run. The
// autograd layer wraps these; tests hit them directly.
namespace camforge::ops {

struct Conv1dGeom {
    int64_t stride = 1;
    int64_t dilation = 1;
    int64_t padding = 0; // zeros, both sides
};

struct Conv2dGeom {
    int64_t stride_f = 1, stride_t = 1;
    int64_t padding_f = 0, padding_t = 0;
};

// Output length of a 1-d convolution; throws ConfigError if the geometry is
// invalid or the output would be empty.
int64_t conv1d_out_len(int64_t in_len, int64_t kernel, const Conv1dGeom& g);
int64_t conv_axis_out_len(int64_t in_len, int64_t kernel, int64_t stride, int64_t dilation,
                          int64_t padding);

// x [Cin,T], w [Cout,Cin,K], b [Cout] or null -> [Cout,Tout]
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor* b, const Conv1dGeom& g);
void conv1d_backward(const Tensor& go, const Tensor& x, const Tensor& w, bool has_bias,
                     const Conv1dGeom& g, Tensor& gx, Tensor& gw, Tensor& gb);

// x [Cin,F,T], w [Cout,Cin,KF,KT], b [Cout] or null -> [Cout,Fout,Tout]
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* b, const Conv2dGeom& g);
void conv2d_backward(const Tensor& go, const Tensor& x, const Tensor& w, bool has_bias,
                     const Conv2dGeom& g, Tensor& gx, Tensor& gw, Tensor& gb);

// x [Din] or [B,Din], w [Dout,Din], b [Dout] or null
Tensor linear(const Tensor& x, const Tensor& w, const Tensor* b);
void linear_backward(const Tensor& go, const Tensor& x, const Tensor& w, bool has_bias, Tensor& gx,
                     Tensor& gw, Tensor& gb);

// Batch norm over dim 1 of a [C,N] tensor (per-channel batch statistics,
// biased variance). Returns the normalized output and writes the batch mean
// and variance for the caller's running-average update.
Tensor bn_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps, Tensor& mean,
                Tensor& var);
void bn_train_backward(const Tensor& go, const Tensor& x, const Tensor& gamma, const Tensor& mean,
                       const Tensor& var, float eps, Tensor& gx, Tensor& ggamma, Tensor& gbeta);

// Batch norm with fixed statistics; x is [C] or [C,N]. Negative running
// variance entries raise FormatError (corrupt weights).
Tensor bn_infer(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Tensor& rmean,
                const Tensor& rvar, float eps);
void bn_infer_backward(const Tensor& go, const Tensor& x, const Tensor& gamma, const Tensor& rmean,
                       const Tensor& rvar, float eps, Tensor& gx, Tensor& ggamma, Tensor& gbeta);

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& go, const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor sigmoid_backward(const Tensor& go, const Tensor& y); // y = sigmoid(x)

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

// Concatenate along dim 0; trailing dims must match.
Tensor concat0(const Tensor& a, const Tensor& b);

Tensor transpose2d(const Tensor& x); // [A,B] -> [B,A]

// [C,T] -> [C], mean over time.
Tensor global_mean(const Tensor& x);

// Fixed-length segmentation of T frames: count = ceil(T/seg_len); the last
// segment may be short.
int64_t segment_count(int64_t t, int64_t seg_len);

// [C,T] -> [C,K], per-segment mean.
Tensor segment_mean(const Tensor& x, int64_t seg_len);
// [C,K] -> [C,T], each segment filled with its column.
Tensor expand_segments(const Tensor& x, int64_t seg_len, int64_t t);

// [C,K] + [C] broadcast over columns.
Tensor add_col(const Tensor& x, const Tensor& v);

// [C,T] -> [2C]: per-channel mean then std (biased, eps added to variance).
Tensor stats_pool(const Tensor& x, float eps);
void stats_pool_backward(const Tensor& go, const Tensor& x, float eps, Tensor& gx);

// B vectors [D] -> [D,B].
Tensor stack_cols(const std::vector<const Tensor*>& xs);

Tensor scale(const Tensor& x, float c);
Tensor sum_all(const Tensor& x); // -> [1]

} // namespace camforge::ops
