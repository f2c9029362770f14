#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "camforge/error.hpp"
#include "camforge/model.hpp"
#include "camforge/rng.hpp"
#include "camforge/training.hpp"

#include "fd_util.hpp"

using namespace camforge;

namespace {

Tensor rand2d(uint64_t seed, int64_t r, int64_t c, float lo = -1.0f, float hi = 1.0f) {
    Rng rng(seed);
    Tensor t({r, c});
    for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(lo, hi);
    return t;
}

// test-side double-precision cosine between row bi of a and row wi of b
double row_cosine(const Tensor& a, int64_t ai, const Tensor& b, int64_t bi) {
    const int64_t d = a.dim(1);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int64_t k = 0; k < d; ++k) {
        double x = a.at(ai, k), y = b.at(bi, k);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// plain softmax cross-entropy over given logits, mean over rows
double ce_oracle(const std::vector<std::vector<double>>& logits,
                 const std::vector<int64_t>& labels) {
    double total = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        double mx = logits[i][0];
        for (double v : logits[i]) mx = std::max(mx, v);
        double lse = 0.0;
        for (double v : logits[i]) lse += std::exp(v - mx);
        total += std::log(lse) + mx - logits[i][size_t(labels[i])];
    }
    return total / double(logits.size());
}

std::vector<ToySample> make_toy_data(int64_t frames, int per_class = 2) {
    // two well-separated synthetic classes: low rows hot vs high rows hot
    std::vector<ToySample> data;
    for (int c = 0; c < 2; ++c) {
        for (int k = 0; k < per_class; ++k) {
            Rng rng(uint64_t(100 * c + k + 1));
            Tensor f({80, frames});
            for (int64_t m = 0; m < 80; ++m) {
                float base = ((c == 0) == (m < 40)) ? 1.5f : -1.5f;
                for (int64_t t = 0; t < frames; ++t)
                    f.at(m, t) = base + rng.uniform(-0.3f, 0.3f);
            }
            data.push_back({f, c});
        }
    }
    return data;
}

} // namespace

TEST_CASE("aam config validation") {
    AamConfig cfg;
    cfg.num_classes = 4;
    CHECK_NOTHROW(cfg.validate());

    cfg.margin = -0.1f;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.margin = 1.6f; // >= pi/2
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = AamConfig{};
    cfg.num_classes = 4;
    cfg.scale = 0.0f;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = AamConfig{};
    cfg.num_classes = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("aligned embedding gets logit s*cos(m)") {
    AamConfig cfg;
    cfg.num_classes = 4;
    Tensor weights = rand2d(3, 4, 5);
    Tensor emb({1, 5});
    // batch of one, pointing exactly along class 2's weight row
    std::memcpy(emb.data(), weights.data() + 2 * 5, 5 * sizeof(float));

    Tensor logits = aam_logits(emb, {2}, weights, cfg);
    REQUIRE(logits.shape() == std::vector<int64_t>{1, 4});
    CHECK(logits.at(0, 2) == doctest::Approx(32.0 * std::cos(0.2)).epsilon(1e-4));
    for (int64_t j = 0; j < 4; ++j) {
        if (j == 2) continue;
        CHECK(logits.at(0, j) ==
              doctest::Approx(32.0 * row_cosine(emb, 0, weights, j)).epsilon(1e-5));
    }
}

TEST_CASE("zero margin with unit scale is plain cosine cross-entropy") {
    AamConfig cfg;
    cfg.margin = 0.0f;
    cfg.scale = 1.0f;
    cfg.num_classes = 5;
    Tensor emb = rand2d(11, 3, 8);
    Tensor weights = rand2d(12, 5, 8);
    std::vector<int64_t> labels = {4, 0, 2};

    Var loss = aam_softmax_loss(nullptr, make_input(emb), labels, make_input(weights), cfg);

    std::vector<std::vector<double>> logits(3, std::vector<double>(5));
    for (int64_t i = 0; i < 3; ++i)
        for (int64_t j = 0; j < 5; ++j) logits[size_t(i)][size_t(j)] = row_cosine(emb, i, weights, j);
    CHECK(loss.value()[0] == doctest::Approx(ce_oracle(logits, labels)).epsilon(1e-6));
}

TEST_CASE("margin only makes correctly classified samples harder") {
    Tensor emb = rand2d(21, 4, 6);
    Tensor weights = rand2d(22, 3, 6);
    // label each sample with its nearest class so the margin penalizes it
    std::vector<int64_t> labels;
    for (int64_t i = 0; i < 4; ++i) {
        int64_t best = 0;
        for (int64_t j = 1; j < 3; ++j)
            if (row_cosine(emb, i, weights, j) > row_cosine(emb, i, weights, best)) best = j;
        labels.push_back(best);
    }
    AamConfig with, without;
    with.num_classes = without.num_classes = 3;
    without.margin = 0.0f;
    float lm = aam_softmax_loss(nullptr, make_input(emb), labels, make_input(weights), with)
                   .value()[0];
    float l0 = aam_softmax_loss(nullptr, make_input(emb), labels, make_input(weights), without)
                   .value()[0];
    CHECK(lm >= l0 - 1e-7f);
}

TEST_CASE("aam rejects malformed inputs") {
    AamConfig cfg;
    cfg.num_classes = 4;
    Tensor emb = rand2d(1, 2, 5);
    Tensor weights = rand2d(2, 4, 5);

    CHECK_THROWS_AS(aam_logits(emb, {0, 5}, weights, cfg), InputError); // label out of range
    CHECK_THROWS_AS(aam_logits(emb, {0, -1}, weights, cfg), InputError);
    CHECK_THROWS_AS(aam_logits(emb, {0}, weights, cfg), ConfigError); // label count
    CHECK_THROWS_AS(aam_logits(rand2d(1, 2, 6), {0, 1}, weights, cfg), ConfigError); // dim
    cfg.num_classes = 5; // disagrees with weights rows
    CHECK_THROWS_AS(aam_logits(emb, {0, 1}, weights, cfg), ConfigError);
    CHECK_THROWS_AS(
        aam_softmax_loss(nullptr, Var(), {0}, make_input(weights), AamConfig{0.2f, 32.0f, 4}),
        UsageError);
}

TEST_CASE("aam loss gradients match finite differences") {
    AamConfig cfg;
    cfg.num_classes = 4;
    auto forward = [&](Tape* tape, const std::vector<Var>& in) {
        return aam_softmax_loss(tape, in[0], {1, 3, 0}, in[1], cfg);
    };
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(900 + seed);
        std::vector<Tensor> inputs = {fdcheck::rand_tensor(rng, {3, 5}),
                                      fdcheck::rand_tensor(rng, {4, 5})};
        CHECK(fdcheck::rel_err(forward, inputs, 7000 + seed) < 1e-3);
    }
}

TEST_CASE("aam loss gradients survive the flipped-target branch") {
    // embedding pointed against its class weight: theta + m past pi
    AamConfig cfg;
    cfg.num_classes = 3;
    Rng rng(41);
    Tensor weights = fdcheck::rand_tensor(rng, {3, 6});
    Tensor emb({2, 6});
    for (int64_t k = 0; k < 6; ++k) {
        emb.at(0, k) = -weights.at(0, k) + 0.02f * rng.uniform(-1.0f, 1.0f);
        emb.at(1, k) = -weights.at(2, k) + 0.02f * rng.uniform(-1.0f, 1.0f);
    }
    // confirm both rows actually take the fallback: cos < -cos(m)
    REQUIRE(row_cosine(emb, 0, weights, 0) < -std::cos(0.2));
    REQUIRE(row_cosine(emb, 1, weights, 2) < -std::cos(0.2));

    auto forward = [&](Tape* tape, const std::vector<Var>& in) {
        return aam_softmax_loss(tape, in[0], {0, 2}, in[1], cfg);
    };
    for (uint64_t seed = 0; seed < 20; ++seed)
        CHECK(fdcheck::rel_err(forward, {emb, weights}, 7100 + seed) < 1e-3);
}

TEST_CASE("lr schedule ramps then follows a cosine") {
    ScheduleConfig cfg;
    cfg.lr_max = 0.1f;
    cfg.lr_min = 1e-4f;
    cfg.warmup_steps = 10;
    cfg.total_steps = 100;

    CHECK(lr_schedule(0, cfg) == 0.0f);
    CHECK(lr_schedule(5, cfg) == doctest::Approx(0.05));
    CHECK(lr_schedule(10, cfg) == doctest::Approx(0.1)); // continuous at the junction
    CHECK(lr_schedule(11, cfg) < 0.1f);
    CHECK(lr_schedule(55, cfg) == doctest::Approx(0.05005)); // cosine midpoint
    CHECK(lr_schedule(100, cfg) == doctest::Approx(1e-4));

    // strictly decreasing after warmup
    float prev = lr_schedule(10, cfg);
    for (int64_t s = 11; s <= 100; ++s) {
        float lr = lr_schedule(s, cfg);
        CHECK(lr < prev);
        prev = lr;
    }

    CHECK_THROWS_AS(lr_schedule(-1, cfg), InputError);
    CHECK_THROWS_AS(lr_schedule(101, cfg), InputError);

    ScheduleConfig no_warm;
    no_warm.warmup_steps = 0;
    no_warm.total_steps = 10;
    CHECK(lr_schedule(0, no_warm) == no_warm.lr_max);

    ScheduleConfig bad = cfg;
    bad.lr_min = 0.2f; // above lr_max
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.total_steps = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.warmup_steps = 100; // == total
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("sgd optimizer follows the momentum recurrence") {
    ParameterStore store;
    Parameter& p = store.add("w", {3}, InitSpec::zeros());

    SUBCASE("zero gradient and zero decay leave weights alone") {
        p.value.data()[0] = 1.0f;
        p.value.data()[1] = -2.0f;
        p.value.data()[2] = 0.5f;
        SgdOptimizer opt({&p}, 0.9f, 0.0f);
        opt.step(0.1f);
        CHECK(p.value[0] == 1.0f);
        CHECK(p.value[1] == -2.0f);
        CHECK(p.value[2] == 0.5f);
    }

    SUBCASE("pure decay shrinks weights by lr*wd") {
        p.value.data()[0] = 2.0f;
        SgdOptimizer opt({&p}, 0.0f, 0.01f);
        opt.step(0.1f);
        CHECK(p.value[0] == doctest::Approx(2.0f * (1.0f - 0.1f * 0.01f)));
    }

    SUBCASE("two steps of constant gradient accumulate 2.9x") {
        p.value.data()[0] = 1.0f;
        SgdOptimizer opt({&p}, 0.9f, 0.0f);
        const float g = 0.4f, lr = 0.01f;
        p.grad.data()[0] = g;
        opt.step(lr);
        CHECK(p.grad[0] == 0.0f); // consumed
        CHECK(p.value[0] == doctest::Approx(1.0f - lr * g));
        p.grad.data()[0] = g;
        opt.step(lr);
        // v1 = g, v2 = 0.9 g + g, total displacement lr*(1 + 1.9)*g
        CHECK(p.value[0] == doctest::Approx(1.0f - lr * 2.9f * g));
    }

    SUBCASE("null parameter is rejected") {
        CHECK_THROWS_AS(SgdOptimizer({nullptr}), UsageError);
    }
}

TEST_CASE("toy fit input validation") {
    Model m = build_model("tiny", 17);
    ScheduleConfig sched;
    sched.total_steps = 10;
    ToyFitOptions opts;
    opts.crop_frames = 20;

    auto data = make_toy_data(20);
    CHECK_THROWS_AS(toy_fit(m, data, sched, 11, opts), ConfigError); // steps > schedule
    CHECK_THROWS_AS(toy_fit(m, data, sched, 0, opts), ConfigError);
    CHECK_THROWS_AS(toy_fit(m, {}, sched, 5, opts), ConfigError);

    // one class only
    auto one_class = data;
    for (auto& s : one_class) s.label = 0;
    CHECK_THROWS_AS(toy_fit(m, one_class, sched, 5, opts), ConfigError);

    // a class with a single sample
    auto thin = data;
    thin.pop_back();
    CHECK_THROWS_WITH_AS(toy_fit(m, thin, sched, 5, opts), doctest::Contains("class"),
                         ConfigError);

    // feature dim mismatch
    auto bad_dim = data;
    bad_dim[0].features = rand2d(1, 40, 20);
    CHECK_THROWS_AS(toy_fit(m, bad_dim, sched, 5, opts), ConfigError);

    // sample shorter than the model minimum
    auto short_sample = data;
    short_sample[0].features = rand2d(1, 80, 2);
    CHECK_THROWS_AS(toy_fit(m, short_sample, sched, 5, opts), InputError);

    // crop below the model minimum
    ToyFitOptions tight = opts;
    tight.crop_frames = 2;
    CHECK_THROWS_AS(toy_fit(m, data, sched, 5, tight), ConfigError);

    // negative label
    auto neg = data;
    neg[0].label = -1;
    CHECK_THROWS_AS(toy_fit(m, neg, sched, 5, opts), InputError);
}

TEST_CASE("zero learning rate freezes the loss trace") {
    Model m = build_model("tiny", 17);
    ScheduleConfig sched;
    sched.lr_max = 0.0f;
    sched.lr_min = 0.0f;
    sched.total_steps = 10;
    ToyFitOptions opts;
    opts.crop_frames = 20; // matches sample length: no crop jitter

    auto result = toy_fit(m, make_toy_data(20), sched, 5, opts);
    REQUIRE(result.loss_trace.size() == 5);
    for (float l : result.loss_trace) CHECK(l == result.loss_trace[0]);
    CHECK(result.num_classes == 2);
}

TEST_CASE("toy fit is seed deterministic") {
    ScheduleConfig sched;
    sched.lr_max = 0.05f;
    sched.lr_min = 1e-4f;
    sched.warmup_steps = 2;
    sched.total_steps = 40;
    ToyFitOptions opts;
    opts.crop_frames = 20;

    auto data = make_toy_data(24); // longer than crop: random crops in play
    Model a = build_model("tiny", 17);
    Model b = build_model("tiny", 17);
    auto ra = toy_fit(a, data, sched, 8, opts);
    auto rb = toy_fit(b, data, sched, 8, opts);
    CHECK(ra.loss_trace == rb.loss_trace);
    CHECK(ra.train_accuracy == rb.train_accuracy);
}

TEST_CASE("a few steps of sgd reduce the toy loss") {
    ScheduleConfig sched;
    sched.lr_max = 1e-3f;
    sched.lr_min = 1e-3f;
    sched.warmup_steps = 0;
    sched.total_steps = 10;
    ToyFitOptions opts;
    opts.crop_frames = 20;

    Model m = build_model("tiny", 17);
    auto r = toy_fit(m, make_toy_data(20), sched, 2, opts);
    CHECK(r.loss_trace[1] < r.loss_trace[0]);
}

TEST_CASE("toy training overfits a separable set") {
    ScheduleConfig sched;
    sched.lr_max = 0.1f;
    sched.lr_min = 1e-4f;
    sched.warmup_steps = 5;
    sched.total_steps = 40;
    ToyFitOptions opts;
    opts.crop_frames = 20;

    Model m = build_model("tiny", 17);
    auto r = toy_fit(m, make_toy_data(20), sched, 40, opts);
    CHECK(r.loss_trace.back() < 0.5f * r.loss_trace.front());
    CHECK(r.train_accuracy == 1.0);
}
