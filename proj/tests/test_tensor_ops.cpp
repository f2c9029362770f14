#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "camforge/error.hpp"
#include "camforge/ops.hpp"
#include "camforge/rng.hpp"
#include "camforge/tensor.hpp"

using namespace camforge;

namespace {

Tensor rand_tensor(Rng& rng, std::vector<int64_t> shape, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = float(rng.uniform(lo, hi));
    return t;
}

// Direct convolution over an explicitly zero-padded copy of the input,
// written independently of the library kernel.
Tensor conv1d_oracle(const Tensor& x, const Tensor& w, const Tensor* b, const ops::Conv1dGeom& g) {
    const int64_t cin = x.dim(0), t = x.dim(1);
    const int64_t cout = w.dim(0), k = w.dim(2);
    std::vector<std::vector<double>> padded(size_t(cin),
                                            std::vector<double>(size_t(t + 2 * g.padding), 0.0));
    for (int64_t c = 0; c < cin; ++c)
        for (int64_t i = 0; i < t; ++i) padded[size_t(c)][size_t(i + g.padding)] = x.at(c, i);
    const int64_t span = (k - 1) * g.dilation + 1;
    const int64_t tout = (t + 2 * g.padding - span) / g.stride + 1;
    Tensor out({cout, tout});
    for (int64_t co = 0; co < cout; ++co) {
        for (int64_t o = 0; o < tout; ++o) {
            double acc = b ? (*b)[co] : 0.0;
            for (int64_t ci = 0; ci < cin; ++ci)
                for (int64_t kk = 0; kk < k; ++kk)
                    acc += padded[size_t(ci)][size_t(o * g.stride + kk * g.dilation)] *
                           w.at(co, ci, kk);
            out.at(co, o) = float(acc);
        }
    }
    return out;
}

Tensor conv2d_oracle(const Tensor& x, const Tensor& w, const Tensor* b, const ops::Conv2dGeom& g) {
    const int64_t cin = x.dim(0), f = x.dim(1), t = x.dim(2);
    const int64_t cout = w.dim(0), kf = w.dim(2), kt = w.dim(3);
    const int64_t fp = f + 2 * g.padding_f, tp = t + 2 * g.padding_t;
    std::vector<double> padded(size_t(cin * fp * tp), 0.0);
    auto pad_at = [&](int64_t c, int64_t i, int64_t j) -> double& {
        return padded[size_t((c * fp + i) * tp + j)];
    };
    for (int64_t c = 0; c < cin; ++c)
        for (int64_t i = 0; i < f; ++i)
            for (int64_t j = 0; j < t; ++j) pad_at(c, i + g.padding_f, j + g.padding_t) = x.at(c, i, j);
    const int64_t fout = (fp - kf) / g.stride_f + 1;
    const int64_t tout = (tp - kt) / g.stride_t + 1;
    Tensor out({cout, fout, tout});
    for (int64_t co = 0; co < cout; ++co)
        for (int64_t fo = 0; fo < fout; ++fo)
            for (int64_t to = 0; to < tout; ++to) {
                double acc = b ? (*b)[co] : 0.0;
                for (int64_t ci = 0; ci < cin; ++ci)
                    for (int64_t ki = 0; ki < kf; ++ki)
                        for (int64_t kj = 0; kj < kt; ++kj)
                            acc += pad_at(ci, fo * g.stride_f + ki, to * g.stride_t + kj) *
                                   w.data()[((co * cin + ci) * kf + ki) * kt + kj];
                out.at(co, fo, to) = float(acc);
            }
    return out;
}

void check_close(const Tensor& a, const Tensor& b, double tol = 1e-5) {
    REQUIRE(a.same_shape(b));
    for (int64_t i = 0; i < a.numel(); ++i) {
        CAPTURE(i);
        CHECK(double(a[i]) == doctest::Approx(double(b[i])).epsilon(tol).scale(1.0));
    }
}

} // namespace

TEST_CASE("tensor shape validation") {
    CHECK_THROWS_AS(Tensor({3, 0}), ConfigError);
    CHECK_THROWS_AS(Tensor({-1}), ConfigError);
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0f, 2.0f}), ConfigError);
    Tensor t({2, 3});
    CHECK(t.numel() == 6);
    CHECK(t.ndim() == 2);
    t.at(1, 2) = 5.0f;
    CHECK(t[5] == 5.0f);
    CHECK(t.shape_str() == "[2,3]");
    CHECK(Tensor::scalar(2.5f).numel() == 1);
    CHECK(Tensor().empty());
    CHECK_THROWS_AS(t.dim(2), UsageError);
}

TEST_CASE("ensure_finite names the op and index") {
    Tensor t({3});
    t[1] = std::nanf("");
    try {
        ensure_finite(t, "myop");
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("myop") != std::string::npos);
    }
    t[1] = 0.0f;
    CHECK_NOTHROW(ensure_finite(t, "myop"));
    t[2] = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS(ensure_finite(t, "myop"), NumericError);
}

TEST_CASE("accumulate adds elementwise and rejects shape mismatch") {
    Tensor a({2}), b({2});
    a[0] = 1.0f;
    b[0] = 2.0f;
    b[1] = -1.0f;
    accumulate(a, b);
    CHECK(a[0] == 3.0f);
    CHECK(a[1] == -1.0f);
    Tensor c({3});
    CHECK_THROWS_AS(accumulate(a, c), UsageError);
}

TEST_CASE("rng is deterministic and in range") {
    Rng a(42), b(42), c(43);
    bool all_same = true, any_diff = false;
    for (int i = 0; i < 100; ++i) {
        double x = a.uniform();
        all_same = all_same && (x == b.uniform());
        any_diff = any_diff || (x != c.uniform());
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
    }
    CHECK(all_same);
    CHECK(any_diff);
    for (int i = 0; i < 100; ++i) CHECK(a.below(7) < 7);
    double lo = a.uniform(-2.0, 3.0);
    CHECK(lo >= -2.0);
    CHECK(lo < 3.0);
}

TEST_CASE("conv1d matches brute-force enumeration on random geometries") {
    Rng rng(7);
    for (int trial = 0; trial < 12; ++trial) {
        int64_t cin = 1 + int64_t(rng.below(4));
        int64_t cout = 1 + int64_t(rng.below(4));
        int64_t k = 1 + int64_t(rng.below(3));
        ops::Conv1dGeom g{1 + int64_t(rng.below(3)), 1 + int64_t(rng.below(3)),
                          int64_t(rng.below(3))};
        int64_t span = (k - 1) * g.dilation + 1;
        int64_t t = span + int64_t(rng.below(12));
        if (t + 2 * g.padding < span) continue;
        Tensor x = rand_tensor(rng, {cin, t});
        Tensor w = rand_tensor(rng, {cout, cin, k});
        Tensor b = rand_tensor(rng, {cout});
        CAPTURE(trial);
        check_close(ops::conv1d(x, w, nullptr, g), conv1d_oracle(x, w, nullptr, g));
        check_close(ops::conv1d(x, w, &b, g), conv1d_oracle(x, w, &b, g));
        CHECK(ops::conv1d(x, w, nullptr, g).dim(1) == ops::conv1d_out_len(t, k, g));
    }
}

TEST_CASE("conv1d geometry errors") {
    CHECK_THROWS_AS(ops::conv1d_out_len(2, 5, {1, 1, 0}), ConfigError);
    CHECK_THROWS_AS(ops::conv1d_out_len(5, 3, {0, 1, 0}), ConfigError);
    CHECK(ops::conv1d_out_len(10, 3, {1, 1, 1}) == 10);
    CHECK(ops::conv1d_out_len(98, 5, {2, 1, 2}) == 49);
    CHECK(ops::conv1d_out_len(10, 3, {1, 2, 2}) == 10);
}

TEST_CASE("conv2d matches brute-force enumeration") {
    Rng rng(11);
    for (int trial = 0; trial < 6; ++trial) {
        int64_t cin = 1 + int64_t(rng.below(3));
        int64_t cout = 1 + int64_t(rng.below(3));
        int64_t k = 1 + 2 * int64_t(rng.below(2)); // 1 or 3
        ops::Conv2dGeom g{1 + int64_t(rng.below(2)), 1, (k - 1) / 2, (k - 1) / 2};
        int64_t f = k + int64_t(rng.below(6));
        int64_t t = k + int64_t(rng.below(6));
        Tensor x = rand_tensor(rng, {cin, f, t});
        Tensor w = rand_tensor(rng, {cout, cin, k, k});
        Tensor b = rand_tensor(rng, {cout});
        CAPTURE(trial);
        check_close(ops::conv2d(x, w, nullptr, g), conv2d_oracle(x, w, nullptr, g));
        check_close(ops::conv2d(x, w, &b, g), conv2d_oracle(x, w, &b, g));
    }
}

TEST_CASE("linear matches hand matmul in both ranks") {
    Tensor w({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b({2}, {0.5f, -0.5f});
    Tensor x({3}, {1, 0, -1});
    Tensor y = ops::linear(x, w, &b);
    CHECK(y.dim(0) == 2);
    CHECK(y[0] == doctest::Approx(1 - 3 + 0.5));
    CHECK(y[1] == doctest::Approx(4 - 6 - 0.5));

    Tensor xb({2, 3}, {1, 0, -1, 2, 1, 0});
    Tensor yb = ops::linear(xb, w, nullptr);
    CHECK(yb.same_shape(Tensor({2, 2})));
    CHECK(yb.at(1, 0) == doctest::Approx(2 * 1 + 1 * 2));
    CHECK(yb.at(1, 1) == doctest::Approx(2 * 4 + 1 * 5));
}

TEST_CASE("bn_train normalizes per channel with biased variance") {
    Rng rng(3);
    Tensor x = rand_tensor(rng, {3, 50});
    Tensor gamma = Tensor::full({3}, 1.0f);
    Tensor beta({3});
    Tensor mean({3}), var({3});
    Tensor y = ops::bn_train(x, gamma, beta, 1e-5f, mean, var);
    for (int64_t c = 0; c < 3; ++c) {
        double m = 0, v = 0;
        for (int64_t i = 0; i < 50; ++i) m += x.at(c, i);
        m /= 50;
        for (int64_t i = 0; i < 50; ++i) v += (x.at(c, i) - m) * (x.at(c, i) - m);
        v /= 50; // biased
        CHECK(double(mean[c]) == doctest::Approx(m).epsilon(1e-5));
        CHECK(double(var[c]) == doctest::Approx(v).epsilon(1e-4));
        double ym = 0, yv = 0;
        for (int64_t i = 0; i < 50; ++i) ym += y.at(c, i);
        ym /= 50;
        for (int64_t i = 0; i < 50; ++i) yv += (y.at(c, i) - ym) * (y.at(c, i) - ym);
        yv /= 50;
        CHECK(ym == doctest::Approx(0.0).scale(1.0).epsilon(1e-5));
        CHECK(yv == doctest::Approx(1.0).epsilon(1e-2));
    }
    // gamma/beta are affine on the normalized values
    Tensor g2 = Tensor::full({3}, 2.0f);
    Tensor b2 = Tensor::full({3}, 0.25f);
    Tensor y2 = ops::bn_train(x, g2, b2, 1e-5f, mean, var);
    for (int64_t i = 0; i < y.numel(); ++i)
        CHECK(double(y2[i]) == doctest::Approx(2.0 * double(y[i]) + 0.25).epsilon(1e-5));
}

TEST_CASE("bn_infer applies fixed statistics and rejects negative variance") {
    Tensor x({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor gamma({2}, {1.0f, 2.0f});
    Tensor beta({2}, {0.0f, 1.0f});
    Tensor rmean({2}, {2.0f, 5.0f});
    Tensor rvar({2}, {4.0f, 1.0f});
    Tensor y = ops::bn_infer(x, gamma, beta, rmean, rvar, 0.0f);
    CHECK(y.at(0, 0) == doctest::Approx((1.0 - 2.0) / 2.0));
    CHECK(y.at(1, 2) == doctest::Approx(2.0 * (6.0 - 5.0) / 1.0 + 1.0));

    Tensor xr({2}, {1.0f, 2.0f});
    Tensor yr = ops::bn_infer(xr, gamma, beta, rmean, rvar, 0.0f);
    CHECK(yr.dim(0) == 2);
    CHECK(yr[1] == doctest::Approx(2.0 * (2.0 - 5.0) + 1.0));

    Tensor bad({2}, {1.0f, -0.5f});
    try {
        ops::bn_infer(x, gamma, beta, rmean, bad, 0.0f);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("channel") != std::string::npos);
    }
}

TEST_CASE("relu and sigmoid pointwise values") {
    Tensor x({5}, {-2.0f, -0.5f, 0.0f, 0.5f, 2.0f});
    Tensor r = ops::relu(x);
    CHECK(r[0] == 0.0f);
    CHECK(r[1] == 0.0f);
    CHECK(r[2] == 0.0f);
    CHECK(r[3] == 0.5f);
    CHECK(r[4] == 2.0f);
    Tensor s = ops::sigmoid(x);
    CHECK(s[2] == doctest::Approx(0.5));
    for (int64_t i = 0; i < 5; ++i) {
        CHECK(s[i] > 0.0f);
        CHECK(s[i] < 1.0f);
        CHECK(double(s[i]) == doctest::Approx(1.0 / (1.0 + std::exp(-double(x[i])))).epsilon(1e-6));
    }
    CHECK(double(s[0]) == doctest::Approx(1.0 - double(s[4])).epsilon(1e-6));
}

TEST_CASE("stats_pool mean and std") {
    // one channel, frames {1,3}: mean 2, biased std 1
    Tensor x({1, 2}, {1.0f, 3.0f});
    Tensor y = ops::stats_pool(x, 0.0f);
    CHECK(y.dim(0) == 2);
    CHECK(y[0] == doctest::Approx(2.0));
    CHECK(y[1] == doctest::Approx(1.0));

    // zero variance channel: std = sqrt(eps)
    Tensor c = Tensor::full({1, 4}, 3.0f);
    Tensor yc = ops::stats_pool(c, 1e-4f);
    CHECK(yc[0] == doctest::Approx(3.0));
    CHECK(yc[1] == doctest::Approx(0.01).epsilon(1e-3));
}

TEST_CASE("segment pooling boundaries and reconstruction") {
    CHECK(ops::segment_count(100, 100) == 1);
    CHECK(ops::segment_count(250, 100) == 3);
    CHECK(ops::segment_count(1, 100) == 1);
    CHECK(ops::segment_count(200, 100) == 2);

    Rng rng(5);
    Tensor x = rand_tensor(rng, {4, 250});
    Tensor seg = ops::segment_mean(x, 100);
    CHECK(seg.dim(1) == 3);
    // segments are [0,100), [100,200), [200,250)
    for (int64_t c = 0; c < 4; ++c) {
        double s0 = 0, s1 = 0, s2 = 0;
        for (int64_t i = 0; i < 100; ++i) s0 += x.at(c, i);
        for (int64_t i = 100; i < 200; ++i) s1 += x.at(c, i);
        for (int64_t i = 200; i < 250; ++i) s2 += x.at(c, i);
        CHECK(double(seg.at(c, 0)) == doctest::Approx(s0 / 100).epsilon(1e-5));
        CHECK(double(seg.at(c, 1)) == doctest::Approx(s1 / 100).epsilon(1e-5));
        CHECK(double(seg.at(c, 2)) == doctest::Approx(s2 / 50).epsilon(1e-5));
    }

    // length-weighted segment means reconstruct the global mean
    Tensor gm = ops::global_mean(x);
    for (int64_t c = 0; c < 4; ++c) {
        double w = (100.0 * seg.at(c, 0) + 100.0 * seg.at(c, 1) + 50.0 * seg.at(c, 2)) / 250.0;
        CHECK(w == doctest::Approx(double(gm[c])).epsilon(1e-5));
    }

    // T == seg_len: segment pooling equals global pooling
    Tensor x1 = rand_tensor(rng, {3, 100});
    Tensor seg1 = ops::segment_mean(x1, 100);
    Tensor gm1 = ops::global_mean(x1);
    CHECK(seg1.dim(1) == 1);
    for (int64_t c = 0; c < 3; ++c)
        CHECK(double(seg1.at(c, 0)) == doctest::Approx(double(gm1[c])).epsilon(1e-6));

    // expand fills each frame with its segment's column
    Tensor exp = ops::expand_segments(seg, 100, 250);
    CHECK(exp.same_shape(x));
    CHECK(exp.at(2, 0) == seg.at(2, 0));
    CHECK(exp.at(2, 99) == seg.at(2, 0));
    CHECK(exp.at(2, 100) == seg.at(2, 1));
    CHECK(exp.at(2, 249) == seg.at(2, 2));
}

TEST_CASE("elementwise and shape helpers") {
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor b({2, 2}, {5, 6, 7, 8});
    Tensor s = ops::add(a, b);
    CHECK(s[3] == 12.0f);
    Tensor m = ops::mul(a, b);
    CHECK(m[2] == 21.0f);

    Tensor c = ops::concat0(a, b);
    CHECK(c.dim(0) == 4);
    CHECK(c.at(3, 1) == 8.0f);

    Tensor t = ops::transpose2d(a);
    CHECK(t.at(0, 1) == 3.0f);
    Tensor tt = ops::transpose2d(t);
    for (int64_t i = 0; i < 4; ++i) CHECK(tt[i] == a[i]);

    Tensor v({2}, {10.0f, 20.0f});
    Tensor ac = ops::add_col(a, v);
    CHECK(ac.at(0, 1) == 12.0f);
    CHECK(ac.at(1, 0) == 23.0f);

    Tensor col0({2}, {1.0f, 2.0f});
    Tensor col1({2}, {3.0f, 4.0f});
    Tensor st = ops::stack_cols({&col0, &col1});
    CHECK(st.same_shape(Tensor({2, 2})));
    CHECK(st.at(0, 1) == 3.0f);
    CHECK(st.at(1, 0) == 2.0f);

    CHECK(ops::scale(a, 0.5f)[3] == 2.0f);
    CHECK(ops::sum_all(a)[0] == 10.0f);
    CHECK(ops::global_mean(a)[1] == doctest::Approx(3.5));
}
