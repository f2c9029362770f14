#include "camforge/ops.hpp"

#include <cmath>
#include <string>

namespace camforge::ops {

namespace {

void check_rank(const Tensor& t, int rank, const char* what) {
    if (t.ndim() != rank)
        throw ConfigError(std::string(what) + " must have rank " + std::to_string(rank) +
                          ", got shape " + t.shape_str());
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b))
        throw ConfigError(std::string(what) + " shape mismatch: " + a.shape_str() + " vs " +
                          b.shape_str());
}

// First output index whose receptive tap to*stride + off lands in [0, len).
inline int64_t first_valid(int64_t off, int64_t stride) {
    if (off >= 0) return 0;
    return (-off + stride - 1) / stride;
}

inline int64_t last_valid(int64_t off, int64_t stride, int64_t len) {
    return (len - 1 - off) / stride; // may be negative: empty range
}

} // namespace

int64_t conv_axis_out_len(int64_t in_len, int64_t kernel, int64_t stride, int64_t dilation,
                          int64_t padding) {
    if (kernel < 1 || stride < 1 || dilation < 1 || padding < 0)
        throw ConfigError("bad conv geometry: kernel " + std::to_string(kernel) + " stride " +
                          std::to_string(stride) + " dilation " + std::to_string(dilation) +
                          " padding " + std::to_string(padding));
    int64_t span = dilation * (kernel - 1) + 1;
    int64_t out = (in_len + 2 * padding - span) / stride + 1;
    if (out < 1)
        throw ConfigError("conv output would be empty: input length " + std::to_string(in_len) +
                          ", kernel span " + std::to_string(span) + ", padding " +
                          std::to_string(padding));
    return out;
}

int64_t conv1d_out_len(int64_t in_len, int64_t kernel, const Conv1dGeom& g) {
    return conv_axis_out_len(in_len, kernel, g.stride, g.dilation, g.padding);
}

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor* b, const Conv1dGeom& g) {
    check_rank(x, 2, "conv1d input");
    check_rank(w, 3, "conv1d weight");
    int64_t cin = x.dim(0), t = x.dim(1);
    int64_t cout = w.dim(0), k = w.dim(2);
    if (w.dim(1) != cin)
        throw ConfigError("conv1d weight expects " + std::to_string(w.dim(1)) +
                          " input channels, input has " + std::to_string(cin));
    if (b) {
        check_rank(*b, 1, "conv1d bias");
        if (b->dim(0) != cout)
            throw ConfigError("conv1d bias length " + std::to_string(b->dim(0)) +
                              " does not match " + std::to_string(cout) + " output channels");
    }
    int64_t tout = conv1d_out_len(t, k, g);
    Tensor y({cout, tout});
    for (int64_t co = 0; co < cout; ++co) {
        float* yrow = y.data() + co * tout;
        if (b) {
            float bv = (*b)[co];
            for (int64_t to = 0; to < tout; ++to) yrow[to] = bv;
        }
        for (int64_t ci = 0; ci < cin; ++ci) {
            const float* xrow = x.data() + ci * t;
            const float* wrow = w.data() + (co * cin + ci) * k;
            for (int64_t kk = 0; kk < k; ++kk) {
                int64_t off = kk * g.dilation - g.padding;
                int64_t lo = first_valid(off, g.stride);
                int64_t hi = last_valid(off, g.stride, t);
                if (hi > tout - 1) hi = tout - 1;
                float wv = wrow[kk];
                for (int64_t to = lo; to <= hi; ++to) yrow[to] += wv * xrow[to * g.stride + off];
            }
        }
    }
    return y;
}

void conv1d_backward(const Tensor& go, const Tensor& x, const Tensor& w, bool has_bias,
                     const Conv1dGeom& g, Tensor& gx, Tensor& gw, Tensor& gb) {
    int64_t cin = x.dim(0), t = x.dim(1);
    int64_t cout = w.dim(0), k = w.dim(2);
    int64_t tout = go.dim(1);
    gx = Tensor({cin, t});
    gw = Tensor({cout, cin, k});
    if (has_bias) gb = Tensor({cout});
    for (int64_t co = 0; co < cout; ++co) {
        const float* grow = go.data() + co * tout;
        if (has_bias) {
            double s = 0.0;
            for (int64_t to = 0; to < tout; ++to) s += grow[to];
            gb[co] = static_cast<float>(s);
        }
        for (int64_t ci = 0; ci < cin; ++ci) {
            const float* xrow = x.data() + ci * t;
            float* gxrow = gx.data() + ci * t;
            const float* wrow = w.data() + (co * cin + ci) * k;
            float* gwrow = gw.data() + (co * cin + ci) * k;
            for (int64_t kk = 0; kk < k; ++kk) {
                int64_t off = kk * g.dilation - g.padding;
                int64_t lo = first_valid(off, g.stride);
                int64_t hi = last_valid(off, g.stride, t);
                if (hi > tout - 1) hi = tout - 1;
                float wv = wrow[kk];
                double acc = 0.0;
                for (int64_t to = lo; to <= hi; ++to) {
                    int64_t ti = to * g.stride + off;
                    acc += static_cast<double>(grow[to]) * xrow[ti];
                    gxrow[ti] += wv * grow[to];
                }
                gwrow[kk] += static_cast<float>(acc);
            }
        }
    }
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* b, const Conv2dGeom& g) {
    check_rank(x, 3, "conv2d input");
    check_rank(w, 4, "conv2d weight");
    int64_t cin = x.dim(0), f = x.dim(1), t = x.dim(2);
    int64_t cout = w.dim(0), kf = w.dim(2), kt = w.dim(3);
    if (w.dim(1) != cin)
        throw ConfigError("conv2d weight expects " + std::to_string(w.dim(1)) +
                          " input channels, input has " + std::to_string(cin));
    if (b) {
        check_rank(*b, 1, "conv2d bias");
        if (b->dim(0) != cout)
            throw ConfigError("conv2d bias length does not match output channels");
    }
    int64_t fout = conv_axis_out_len(f, kf, g.stride_f, 1, g.padding_f);
    int64_t tout = conv_axis_out_len(t, kt, g.stride_t, 1, g.padding_t);
    Tensor y({cout, fout, tout});
    for (int64_t co = 0; co < cout; ++co) {
        float* yplane = y.data() + co * fout * tout;
        if (b) {
            float bv = (*b)[co];
            for (int64_t i = 0; i < fout * tout; ++i) yplane[i] = bv;
        }
        for (int64_t ci = 0; ci < cin; ++ci) {
            const float* xplane = x.data() + ci * f * t;
            const float* wk = w.data() + (co * cin + ci) * kf * kt;
            for (int64_t i = 0; i < kf; ++i) {
                int64_t offf = i - g.padding_f;
                for (int64_t j = 0; j < kt; ++j) {
                    int64_t offt = j - g.padding_t;
                    float wv = wk[i * kt + j];
                    int64_t flo = first_valid(offf, g.stride_f);
                    int64_t fhi = last_valid(offf, g.stride_f, f);
                    if (fhi > fout - 1) fhi = fout - 1;
                    int64_t tlo = first_valid(offt, g.stride_t);
                    int64_t thi = last_valid(offt, g.stride_t, t);
                    if (thi > tout - 1) thi = tout - 1;
                    for (int64_t fo = flo; fo <= fhi; ++fo) {
                        const float* xrow = xplane + (fo * g.stride_f + offf) * t;
                        float* yrow = yplane + fo * tout;
                        for (int64_t to = tlo; to <= thi; ++to)
                            yrow[to] += wv * xrow[to * g.stride_t + offt];
                    }
                }
            }
        }
    }
    return y;
}

void conv2d_backward(const Tensor& go, const Tensor& x, const Tensor& w, bool has_bias,
                     const Conv2dGeom& g, Tensor& gx, Tensor& gw, Tensor& gb) {
    int64_t cin = x.dim(0), f = x.dim(1), t = x.dim(2);
    int64_t cout = w.dim(0), kf = w.dim(2), kt = w.dim(3);
    int64_t fout = go.dim(1), tout = go.dim(2);
    gx = Tensor({cin, f, t});
    gw = Tensor({cout, cin, kf, kt});
    if (has_bias) gb = Tensor({cout});
    for (int64_t co = 0; co < cout; ++co) {
        const float* gplane = go.data() + co * fout * tout;
        if (has_bias) {
            double s = 0.0;
            for (int64_t i = 0; i < fout * tout; ++i) s += gplane[i];
            gb[co] = static_cast<float>(s);
        }
        for (int64_t ci = 0; ci < cin; ++ci) {
            const float* xplane = x.data() + ci * f * t;
            float* gxplane = gx.data() + ci * f * t;
            const float* wk = w.data() + (co * cin + ci) * kf * kt;
            float* gwk = gw.data() + (co * cin + ci) * kf * kt;
            for (int64_t i = 0; i < kf; ++i) {
                int64_t offf = i - g.padding_f;
                for (int64_t j = 0; j < kt; ++j) {
                    int64_t offt = j - g.padding_t;
                    float wv = wk[i * kt + j];
                    int64_t flo = first_valid(offf, g.stride_f);
                    int64_t fhi = last_valid(offf, g.stride_f, f);
                    if (fhi > fout - 1) fhi = fout - 1;
                    int64_t tlo = first_valid(offt, g.stride_t);
                    int64_t thi = last_valid(offt, g.stride_t, t);
                    if (thi > tout - 1) thi = tout - 1;
                    double acc = 0.0;
                    for (int64_t fo = flo; fo <= fhi; ++fo) {
                        const float* xrow = xplane + (fo * g.stride_f + offf) * t;
                        float* gxrow = gxplane + (fo * g.stride_f + offf) * t;
                        const float* grow = gplane + fo * tout;
                        for (int64_t to = tlo; to <= thi; ++to) {
                            int64_t ti = to * g.stride_t + offt;
                            acc += static_cast<double>(grow[to]) * xrow[ti];
                            gxrow[ti] += wv * grow[to];
                        }
                    }
                    gwk[i * kt + j] += static_cast<float>(acc);
                }
            }
        }
    }
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor* b) {
    check_rank(w, 2, "linear weight");
    if (x.ndim() != 1 && x.ndim() != 2)
        throw ConfigError("linear input must have rank 1 or 2, got " + x.shape_str());
    int64_t din = x.dim(x.ndim() - 1);
    int64_t batch = x.ndim() == 2 ? x.dim(0) : 1;
    int64_t dout = w.dim(0);
    if (w.dim(1) != din)
        throw ConfigError("linear weight expects " + std::to_string(w.dim(1)) +
                          " inputs, input has " + std::to_string(din));
    if (b && (b->ndim() != 1 || b->dim(0) != dout))
        throw ConfigError("linear bias shape mismatch");
    Tensor y(x.ndim() == 2 ? std::vector<int64_t>{batch, dout} : std::vector<int64_t>{dout});
    for (int64_t bi = 0; bi < batch; ++bi) {
        const float* xr = x.data() + bi * din;
        float* yr = y.data() + bi * dout;
        for (int64_t o = 0; o < dout; ++o) {
            const float* wr = w.data() + o * din;
            double acc = b ? (*b)[o] : 0.0;
            for (int64_t i = 0; i < din; ++i) acc += static_cast<double>(xr[i]) * wr[i];
            yr[o] = static_cast<float>(acc);
        }
    }
    return y;
}

void linear_backward(const Tensor& go, const Tensor& x, const Tensor& w, bool has_bias, Tensor& gx,
                     Tensor& gw, Tensor& gb) {
    int64_t din = x.dim(x.ndim() - 1);
    int64_t batch = x.ndim() == 2 ? x.dim(0) : 1;
    int64_t dout = w.dim(0);
    gx = Tensor(x.shape());
    gw = Tensor({dout, din});
    if (has_bias) gb = Tensor({dout});
    for (int64_t bi = 0; bi < batch; ++bi) {
        const float* xr = x.data() + bi * din;
        const float* gr = go.data() + bi * dout;
        float* gxr = gx.data() + bi * din;
        for (int64_t o = 0; o < dout; ++o) {
            float gv = gr[o];
            const float* wr = w.data() + o * din;
            float* gwr = gw.data() + o * din;
            for (int64_t i = 0; i < din; ++i) {
                gxr[i] += gv * wr[i];
                gwr[i] += gv * xr[i];
            }
            if (has_bias) gb[o] += gv;
        }
    }
}

Tensor bn_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps, Tensor& mean,
                Tensor& var) {
    check_rank(x, 2, "batchnorm(train) input");
    int64_t c = x.dim(0), n = x.dim(1);
    check_same_shape(gamma, Tensor({c}), "batchnorm gamma");
    check_same_shape(beta, Tensor({c}), "batchnorm beta");
    mean = Tensor({c});
    var = Tensor({c});
    Tensor y({c, n});
    for (int64_t ci = 0; ci < c; ++ci) {
        const float* xr = x.data() + ci * n;
        double mu = 0.0;
        for (int64_t i = 0; i < n; ++i) mu += xr[i];
        mu /= static_cast<double>(n);
        double v = 0.0;
        for (int64_t i = 0; i < n; ++i) {
            double d = xr[i] - mu;
            v += d * d;
        }
        v /= static_cast<double>(n);
        mean[ci] = static_cast<float>(mu);
        var[ci] = static_cast<float>(v);
        float inv = 1.0f / std::sqrt(static_cast<float>(v) + eps);
        float g = gamma[ci], b = beta[ci];
        float* yr = y.data() + ci * n;
        float m = static_cast<float>(mu);
        for (int64_t i = 0; i < n; ++i) yr[i] = g * (xr[i] - m) * inv + b;
    }
    return y;
}

void bn_train_backward(const Tensor& go, const Tensor& x, const Tensor& gamma, const Tensor& mean,
                       const Tensor& var, float eps, Tensor& gx, Tensor& ggamma, Tensor& gbeta) {
    int64_t c = x.dim(0), n = x.dim(1);
    gx = Tensor({c, n});
    ggamma = Tensor({c});
    gbeta = Tensor({c});
    for (int64_t ci = 0; ci < c; ++ci) {
        const float* xr = x.data() + ci * n;
        const float* gr = go.data() + ci * n;
        float* gxr = gx.data() + ci * n;
        float m = mean[ci];
        float inv = 1.0f / std::sqrt(var[ci] + eps);
        double sum_g = 0.0, sum_gxh = 0.0;
        for (int64_t i = 0; i < n; ++i) {
            double xh = (xr[i] - m) * inv;
            sum_g += gr[i];
            sum_gxh += gr[i] * xh;
        }
        ggamma[ci] = static_cast<float>(sum_gxh);
        gbeta[ci] = static_cast<float>(sum_g);
        double mg = sum_g / n, mgxh = sum_gxh / n;
        float gsc = gamma[ci] * inv;
        for (int64_t i = 0; i < n; ++i) {
            double xh = (xr[i] - m) * inv;
            gxr[i] = static_cast<float>(gsc * (gr[i] - mg - xh * mgxh));
        }
    }
}

Tensor bn_infer(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Tensor& rmean,
                const Tensor& rvar, float eps) {
    if (x.ndim() != 1 && x.ndim() != 2)
        throw ConfigError("batchnorm(infer) input must have rank 1 or 2, got " + x.shape_str());
    int64_t c = x.dim(0), n = x.ndim() == 2 ? x.dim(1) : 1;
    if (gamma.numel() != c || beta.numel() != c || rmean.numel() != c || rvar.numel() != c)
        throw ConfigError("batchnorm parameter length does not match " + std::to_string(c) +
                          " channels");
    for (int64_t ci = 0; ci < c; ++ci)
        if (rvar[ci] < 0.0f)
            throw FormatError("corrupt weights: negative running variance at channel " +
                              std::to_string(ci));
    Tensor y(x.shape());
    for (int64_t ci = 0; ci < c; ++ci) {
        float inv = 1.0f / std::sqrt(rvar[ci] + eps);
        float g = gamma[ci], b = beta[ci], m = rmean[ci];
        const float* xr = x.data() + ci * n;
        float* yr = y.data() + ci * n;
        for (int64_t i = 0; i < n; ++i) yr[i] = g * (xr[i] - m) * inv + b;
    }
    return y;
}

void bn_infer_backward(const Tensor& go, const Tensor& x, const Tensor& gamma, const Tensor& rmean,
                       const Tensor& rvar, float eps, Tensor& gx, Tensor& ggamma, Tensor& gbeta) {
    int64_t c = x.dim(0), n = x.ndim() == 2 ? x.dim(1) : 1;
    gx = Tensor(x.shape());
    ggamma = Tensor({c});
    gbeta = Tensor({c});
    for (int64_t ci = 0; ci < c; ++ci) {
        float inv = 1.0f / std::sqrt(rvar[ci] + eps);
        float g = gamma[ci], m = rmean[ci];
        const float* xr = x.data() + ci * n;
        const float* gr = go.data() + ci * n;
        float* gxr = gx.data() + ci * n;
        double sg = 0.0, sgx = 0.0;
        for (int64_t i = 0; i < n; ++i) {
            gxr[i] = gr[i] * g * inv;
            sg += gr[i];
            sgx += static_cast<double>(gr[i]) * (xr[i] - m) * inv;
        }
        ggamma[ci] = static_cast<float>(sgx);
        gbeta[ci] = static_cast<float>(sg);
    }
}

Tensor relu(const Tensor& x) {
    Tensor y(x.shape());
    const float* xp = x.data();
    float* yp = y.data();
    for (int64_t i = 0; i < x.numel(); ++i) yp[i] = xp[i] > 0.0f ? xp[i] : 0.0f;
    return y;
}

Tensor relu_backward(const Tensor& go, const Tensor& x) {
    Tensor g(x.shape());
    const float* xp = x.data();
    const float* gp = go.data();
    float* out = g.data();
    for (int64_t i = 0; i < x.numel(); ++i) out[i] = xp[i] > 0.0f ? gp[i] : 0.0f;
    return g;
}

Tensor sigmoid(const Tensor& x) {
    Tensor y(x.shape());
    const float* xp = x.data();
    float* yp = y.data();
    for (int64_t i = 0; i < x.numel(); ++i)
        yp[i] = static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(xp[i]))));
    return y;
}

Tensor sigmoid_backward(const Tensor& go, const Tensor& y) {
    Tensor g(y.shape());
    const float* yp = y.data();
    const float* gp = go.data();
    float* out = g.data();
    for (int64_t i = 0; i < y.numel(); ++i) out[i] = gp[i] * yp[i] * (1.0f - yp[i]);
    return g;
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor y(a.shape());
    for (int64_t i = 0; i < a.numel(); ++i) y[i] = a[i] + b[i];
    return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    Tensor y(a.shape());
    for (int64_t i = 0; i < a.numel(); ++i) y[i] = a[i] * b[i];
    return y;
}

Tensor concat0(const Tensor& a, const Tensor& b) {
    if (a.ndim() != b.ndim() || a.ndim() < 1)
        throw ConfigError("concat rank mismatch: " + a.shape_str() + " vs " + b.shape_str());
    for (int i = 1; i < a.ndim(); ++i)
        if (a.dim(i) != b.dim(i))
            throw ConfigError("concat trailing dim mismatch: " + a.shape_str() + " vs " +
                              b.shape_str());
    std::vector<int64_t> shape = a.shape();
    shape[0] += b.dim(0);
    Tensor y(shape);
    std::copy(a.data(), a.data() + a.numel(), y.data());
    std::copy(b.data(), b.data() + b.numel(), y.data() + a.numel());
    return y;
}

Tensor transpose2d(const Tensor& x) {
    check_rank(x, 2, "transpose input");
    int64_t a = x.dim(0), b = x.dim(1);
    Tensor y({b, a});
    for (int64_t i = 0; i < a; ++i)
        for (int64_t j = 0; j < b; ++j) y.at(j, i) = x.at(i, j);
    return y;
}

Tensor global_mean(const Tensor& x) {
    check_rank(x, 2, "global mean input");
    int64_t c = x.dim(0), t = x.dim(1);
    Tensor y({c});
    for (int64_t ci = 0; ci < c; ++ci) {
        double s = 0.0;
        const float* xr = x.data() + ci * t;
        for (int64_t i = 0; i < t; ++i) s += xr[i];
        y[ci] = static_cast<float>(s / t);
    }
    return y;
}

int64_t segment_count(int64_t t, int64_t seg_len) {
    if (t < 1 || seg_len < 1)
        throw ConfigError("segmentation needs positive length and segment size, got length " +
                          std::to_string(t) + " segment " + std::to_string(seg_len));
    return (t + seg_len - 1) / seg_len;
}

Tensor segment_mean(const Tensor& x, int64_t seg_len) {
    check_rank(x, 2, "segment mean input");
    int64_t c = x.dim(0), t = x.dim(1);
    int64_t k = segment_count(t, seg_len);
    Tensor y({c, k});
    for (int64_t ci = 0; ci < c; ++ci) {
        const float* xr = x.data() + ci * t;
        for (int64_t s = 0; s < k; ++s) {
            int64_t lo = s * seg_len;
            int64_t hi = std::min(lo + seg_len, t);
            double acc = 0.0;
            for (int64_t i = lo; i < hi; ++i) acc += xr[i];
            y.at(ci, s) = static_cast<float>(acc / (hi - lo));
        }
    }
    return y;
}

Tensor expand_segments(const Tensor& x, int64_t seg_len, int64_t t) {
    check_rank(x, 2, "segment expand input");
    int64_t c = x.dim(0), k = x.dim(1);
    if (segment_count(t, seg_len) != k)
        throw ConfigError("segment expand: " + std::to_string(k) + " segments do not cover " +
                          std::to_string(t) + " frames at segment length " +
                          std::to_string(seg_len));
    Tensor y({c, t});
    for (int64_t ci = 0; ci < c; ++ci) {
        float* yr = y.data() + ci * t;
        for (int64_t s = 0; s < k; ++s) {
            int64_t lo = s * seg_len;
            int64_t hi = std::min(lo + seg_len, t);
            float v = x.at(ci, s);
            for (int64_t i = lo; i < hi; ++i) yr[i] = v;
        }
    }
    return y;
}

Tensor add_col(const Tensor& x, const Tensor& v) {
    check_rank(x, 2, "column add input");
    check_rank(v, 1, "column add vector");
    if (v.dim(0) != x.dim(0))
        throw ConfigError("column add channel mismatch: " + x.shape_str() + " vs " +
                          v.shape_str());
    Tensor y(x.shape());
    int64_t c = x.dim(0), k = x.dim(1);
    for (int64_t ci = 0; ci < c; ++ci) {
        float b = v[ci];
        const float* xr = x.data() + ci * k;
        float* yr = y.data() + ci * k;
        for (int64_t i = 0; i < k; ++i) yr[i] = xr[i] + b;
    }
    return y;
}

Tensor stats_pool(const Tensor& x, float eps) {
    check_rank(x, 2, "stats pool input");
    int64_t c = x.dim(0), t = x.dim(1);
    Tensor y({2 * c});
    for (int64_t ci = 0; ci < c; ++ci) {
        const float* xr = x.data() + ci * t;
        double mu = 0.0;
        for (int64_t i = 0; i < t; ++i) mu += xr[i];
        mu /= t;
        double v = 0.0;
        for (int64_t i = 0; i < t; ++i) {
            double d = xr[i] - mu;
            v += d * d;
        }
        v /= t;
        y[ci] = static_cast<float>(mu);
        y[c + ci] = static_cast<float>(std::sqrt(v + eps));
    }
    return y;
}

void stats_pool_backward(const Tensor& go, const Tensor& x, float eps, Tensor& gx) {
    int64_t c = x.dim(0), t = x.dim(1);
    gx = Tensor({c, t});
    for (int64_t ci = 0; ci < c; ++ci) {
        const float* xr = x.data() + ci * t;
        float* gr = gx.data() + ci * t;
        double mu = 0.0;
        for (int64_t i = 0; i < t; ++i) mu += xr[i];
        mu /= t;
        double v = 0.0;
        for (int64_t i = 0; i < t; ++i) {
            double d = xr[i] - mu;
            v += d * d;
        }
        v /= t;
        double sd = std::sqrt(v + eps);
        float gmu = go[ci], gsd = go[c + ci];
        for (int64_t i = 0; i < t; ++i)
            gr[i] = static_cast<float>(gmu / t + gsd * (xr[i] - mu) / (t * sd));
    }
}

Tensor stack_cols(const std::vector<const Tensor*>& xs) {
    if (xs.empty()) throw ConfigError("stack needs at least one vector");
    int64_t d = xs[0]->numel();
    for (const Tensor* t : xs) {
        if (t->ndim() != 1 || t->numel() != d)
            throw ConfigError("stack expects rank-1 tensors of equal length");
    }
    int64_t b = static_cast<int64_t>(xs.size());
    Tensor y({d, b});
    for (int64_t j = 0; j < b; ++j)
        for (int64_t i = 0; i < d; ++i) y.at(i, j) = (*xs[j])[i];
    return y;
}

Tensor scale(const Tensor& x, float c) {
    Tensor y(x.shape());
    for (int64_t i = 0; i < x.numel(); ++i) y[i] = x[i] * c;
    return y;
}

Tensor sum_all(const Tensor& x) {
    double s = 0.0;
    for (int64_t i = 0; i < x.numel(); ++i) s += x[i];
    return Tensor::scalar(static_cast<float>(s));
}

} // namespace camforge::ops
