#pragma once

#include <cstdint>
#include <vector>

#include "camforge/autograd.hpp"
#include "camforge/model.hpp"

namespace camforge {

struct AamConfig {
    float margin = 0.2f;
    float scale = 32.0f;
    int64_t num_classes = 0;

    void validate() const; // 0 <= margin < pi/2, scale > 0, num_classes >= 2
};

// Margined cosine logits: s*cos(theta) per class, s*cos(theta+m) for the
// target class, with the standard fallback cos(theta) - m*sin(m) once
// theta + m would pass pi. Exposed for inspection and tests; the loss uses
// the same computation.
Tensor aam_logits(const Tensor& embeddings, const std::vector<int64_t>& labels,
                  const Tensor& class_weights, const AamConfig& cfg);

// Mean cross-entropy over the margined logits. embeddings [B,D] and
// class_weights [N,D] are differentiable; labels out of [0,N) raise
// InputError.
Var aam_softmax_loss(Tape* tape, const Var& embeddings, const std::vector<int64_t>& labels,
                     const Var& class_weights, const AamConfig& cfg);

struct ScheduleConfig {
    float lr_max = 0.1f;
    float lr_min = 1e-4f;
    int64_t warmup_steps = 0;
    int64_t total_steps = 1;

    void validate() const;
};

// Linear ramp 0 -> lr_max over warmup_steps, then cosine descent to lr_min at
// total_steps. Continuous at the junction.
float lr_schedule(int64_t step, const ScheduleConfig& cfg);

// v <- momentum*v + (grad + weight_decay*w); w <- w - lr*v; grads zeroed.
class SgdOptimizer {
public:
    SgdOptimizer(std::vector<Parameter*> params, float momentum = 0.9f,
                 float weight_decay = 1e-4f);

    void step(float lr);

private:
    std::vector<Parameter*> params_;
    std::vector<Tensor> velocity_;
    float momentum_;
    float weight_decay_;
};

struct ToySample {
    Tensor features; // [feat_dim, T]
    int64_t label = 0;
};

struct ToyFitOptions {
    uint64_t seed = 17;
    int64_t crop_frames = 298; // 3 s of audio at 100 frames/s
    float margin = 0.2f;
    float scale = 32.0f;
    float momentum = 0.9f;
    float weight_decay = 1e-4f;
};

struct ToyFitResult {
    std::vector<float> loss_trace; // one entry per step
    double train_accuracy = 0.0;   // cosine nearest-class-weight over full inputs
    int64_t num_classes = 0;
};

// Full-batch SGD for `steps` steps. Inputs longer than crop_frames are
// randomly cropped each step (seeded); needs >= 2 classes with >= 2 samples
// each.
ToyFitResult toy_fit(Model& model, const std::vector<ToySample>& data,
                     const ScheduleConfig& schedule, int64_t steps,
                     const ToyFitOptions& opts = {});

} // namespace camforge
