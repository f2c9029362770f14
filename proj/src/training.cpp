#include "camforge/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <string>

#include "camforge/error.hpp"
#include "camforge/rng.hpp"
#include "camforge/var_ops.hpp"

namespace camforge {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct AamForward {
    int64_t batch = 0, classes = 0, dim = 0;
    std::vector<double> emb_norm;    // [B]
    std::vector<double> weight_norm; // [N]
    std::vector<double> cosine;      // [B*N]
    std::vector<double> target_phi;  // [B], margined target cosine
    std::vector<char> easy_branch;   // [B], 1 when the fallback was taken
    std::vector<double> prob;        // [B*N], softmax of the scaled logits
    double loss = 0.0;
};

void check_aam_shapes(const Tensor& emb, const std::vector<int64_t>& labels,
                      const Tensor& weights, const AamConfig& cfg) {
    cfg.validate();
    if (emb.ndim() != 2) throw ConfigError("embeddings must be [batch, dim], got " + emb.shape_str());
    if (weights.ndim() != 2) throw ConfigError("class weights must be [classes, dim], got " + weights.shape_str());
    if (emb.dim(1) != weights.dim(1))
        throw ConfigError("embedding dim " + std::to_string(emb.dim(1)) +
                          " does not match class weight dim " + std::to_string(weights.dim(1)));
    if (cfg.num_classes != weights.dim(0))
        throw ConfigError("num_classes " + std::to_string(cfg.num_classes) +
                          " does not match class weight rows " + std::to_string(weights.dim(0)));
    if (static_cast<int64_t>(labels.size()) != emb.dim(0))
        throw ConfigError("got " + std::to_string(labels.size()) + " labels for batch " +
                          std::to_string(emb.dim(0)));
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= weights.dim(0))
            throw InputError("label " + std::to_string(labels[i]) + " at position " +
                             std::to_string(i) + " outside [0, " + std::to_string(weights.dim(0)) + ")");
    }
}

AamForward aam_forward(const Tensor& emb, const std::vector<int64_t>& labels,
                       const Tensor& weights, const AamConfig& cfg) {
    AamForward f;
    f.batch = emb.dim(0);
    f.classes = weights.dim(0);
    f.dim = emb.dim(1);
    const int64_t b_n = f.batch, n_n = f.classes, d_n = f.dim;

    f.emb_norm.resize(b_n);
    for (int64_t b = 0; b < b_n; ++b) {
        double s = 0.0;
        for (int64_t d = 0; d < d_n; ++d) {
            double v = emb.data()[b * d_n + d];
            s += v * v;
        }
        f.emb_norm[b] = std::max(std::sqrt(s), 1e-12);
    }
    f.weight_norm.resize(n_n);
    for (int64_t n = 0; n < n_n; ++n) {
        double s = 0.0;
        for (int64_t d = 0; d < d_n; ++d) {
            double v = weights.data()[n * d_n + d];
            s += v * v;
        }
        f.weight_norm[n] = std::max(std::sqrt(s), 1e-12);
    }

    f.cosine.resize(b_n * n_n);
    for (int64_t b = 0; b < b_n; ++b) {
        for (int64_t n = 0; n < n_n; ++n) {
            double dot = 0.0;
            for (int64_t d = 0; d < d_n; ++d)
                dot += double(emb.data()[b * d_n + d]) * double(weights.data()[n * d_n + d]);
            double c = dot / (f.emb_norm[b] * f.weight_norm[n]);
            f.cosine[b * n_n + n] = std::clamp(c, -1.0, 1.0);
        }
    }

    const double cos_m = std::cos(double(cfg.margin));
    const double sin_m = std::sin(double(cfg.margin));
    f.target_phi.resize(b_n);
    f.easy_branch.assign(b_n, 0);
    for (int64_t b = 0; b < b_n; ++b) {
        double cy = f.cosine[b * n_n + labels[b]];
        if (cy > -cos_m) {
            double sy = std::sqrt(std::max(1.0 - cy * cy, 0.0));
            f.target_phi[b] = cy * cos_m - sy * sin_m;
        } else {
            f.target_phi[b] = cy - double(cfg.margin) * sin_m;
            f.easy_branch[b] = 1;
        }
    }

    const double scale = double(cfg.scale);
    f.prob.resize(b_n * n_n);
    double total = 0.0;
    std::vector<double> z(n_n);
    for (int64_t b = 0; b < b_n; ++b) {
        for (int64_t n = 0; n < n_n; ++n)
            z[n] = scale * (n == labels[b] ? f.target_phi[b] : f.cosine[b * n_n + n]);
        double zmax = *std::max_element(z.begin(), z.end());
        double denom = 0.0;
        for (int64_t n = 0; n < n_n; ++n) denom += std::exp(z[n] - zmax);
        for (int64_t n = 0; n < n_n; ++n) f.prob[b * n_n + n] = std::exp(z[n] - zmax) / denom;
        total += std::log(denom) + zmax - z[labels[b]];
    }
    f.loss = total / double(b_n);
    return f;
}

} // namespace

void AamConfig::validate() const {
    if (!(margin >= 0.0f) || !(margin < float(kPi) / 2.0f))
        throw ConfigError("margin must be in [0, pi/2), got " + std::to_string(margin));
    if (!(scale > 0.0f)) throw ConfigError("scale must be positive, got " + std::to_string(scale));
    if (num_classes < 2) throw ConfigError("need at least 2 classes, got " + std::to_string(num_classes));
}

Tensor aam_logits(const Tensor& embeddings, const std::vector<int64_t>& labels,
                  const Tensor& class_weights, const AamConfig& cfg) {
    check_aam_shapes(embeddings, labels, class_weights, cfg);
    AamForward f = aam_forward(embeddings, labels, class_weights, cfg);
    Tensor out({f.batch, f.classes});
    for (int64_t b = 0; b < f.batch; ++b)
        for (int64_t n = 0; n < f.classes; ++n)
            out.at(b, n) = float(double(cfg.scale) *
                                 (n == labels[b] ? f.target_phi[b] : f.cosine[b * f.classes + n]));
    return out;
}

Var aam_softmax_loss(Tape* tape, const Var& embeddings, const std::vector<int64_t>& labels,
                     const Var& class_weights, const AamConfig& cfg) {
    if (!embeddings.defined() || !class_weights.defined())
        throw UsageError("aam_softmax_loss needs defined embeddings and class weights");
    check_aam_shapes(embeddings.value(), labels, class_weights.value(), cfg);
    AamForward f = aam_forward(embeddings.value(), labels, class_weights.value(), cfg);

    Tensor loss_value = Tensor::scalar(float(f.loss));
    ensure_finite(loss_value, "aam_softmax_loss");
    auto node = std::make_shared<Node>();
    node->value_storage = std::move(loss_value);
    if (tape) {
        NodePtr pe = embeddings.node();
        NodePtr pw = class_weights.node();
        Node* raw = node.get();
        std::vector<int64_t> y = labels;
        const double cos_m = std::cos(double(cfg.margin));
        const double sin_m = std::sin(double(cfg.margin));
        const double scale = double(cfg.scale);
        node->backward = [pe, pw, raw, y, fwd = std::move(f), cos_m, sin_m, scale]() {
            const double g0 = raw->grad[0];
            const int64_t b_n = fwd.batch, n_n = fwd.classes, d_n = fwd.dim;
            const Tensor& e = pe->value();
            const Tensor& w = pw->value();
            Tensor ge(e.shape());
            Tensor gw(w.shape());
            for (int64_t b = 0; b < b_n; ++b) {
                const double ne = fwd.emb_norm[b];
                for (int64_t n = 0; n < n_n; ++n) {
                    double gz = g0 * (fwd.prob[b * n_n + n] - (n == y[b] ? 1.0 : 0.0)) / double(b_n);
                    double c = fwd.cosine[b * n_n + n];
                    double dphi = 1.0;
                    if (n == y[b] && !fwd.easy_branch[b]) {
                        double sy = std::sqrt(std::max(1.0 - c * c, 1e-12));
                        dphi = cos_m + sin_m * c / sy;
                    }
                    double gc = gz * scale * dphi;
                    if (gc == 0.0) continue;
                    const double nw = fwd.weight_norm[n];
                    for (int64_t d = 0; d < d_n; ++d) {
                        double ev = e.data()[b * d_n + d];
                        double wv = w.data()[n * d_n + d];
                        ge.data()[b * d_n + d] += float(gc * (wv / nw - c * ev / ne) / ne);
                        gw.data()[n * d_n + d] += float(gc * (ev / ne - c * wv / nw) / nw);
                    }
                }
            }
            pe->add_grad(ge);
            pw->add_grad(gw);
        };
        tape->record(node);
    }
    return Var(std::move(node));
}

void ScheduleConfig::validate() const {
    if (!(lr_min >= 0.0f) || !(lr_max >= lr_min))
        throw ConfigError("need 0 <= lr_min <= lr_max, got lr_min=" + std::to_string(lr_min) +
                          " lr_max=" + std::to_string(lr_max));
    if (total_steps < 1) throw ConfigError("total_steps must be >= 1, got " + std::to_string(total_steps));
    if (warmup_steps < 0 || warmup_steps >= total_steps)
        throw ConfigError("need 0 <= warmup_steps < total_steps, got warmup_steps=" +
                          std::to_string(warmup_steps) + " total_steps=" + std::to_string(total_steps));
}

float lr_schedule(int64_t step, const ScheduleConfig& cfg) {
    cfg.validate();
    if (step < 0 || step > cfg.total_steps)
        throw InputError("schedule step " + std::to_string(step) + " outside [0, " +
                         std::to_string(cfg.total_steps) + "]");
    if (step <= cfg.warmup_steps) {
        if (cfg.warmup_steps == 0) return cfg.lr_max;
        return cfg.lr_max * float(double(step) / double(cfg.warmup_steps));
    }
    double progress = double(step - cfg.warmup_steps) / double(cfg.total_steps - cfg.warmup_steps);
    return float(double(cfg.lr_min) +
                 0.5 * (double(cfg.lr_max) - double(cfg.lr_min)) * (1.0 + std::cos(kPi * progress)));
}

SgdOptimizer::SgdOptimizer(std::vector<Parameter*> params, float momentum, float weight_decay)
    : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
    velocity_.reserve(params_.size());
    for (const Parameter* p : params_) {
        if (!p) throw UsageError("null parameter handed to the optimizer");
        velocity_.emplace_back(p->value.shape());
    }
}

void SgdOptimizer::step(float lr) {
    for (size_t i = 0; i < params_.size(); ++i) {
        Parameter& p = *params_[i];
        Tensor& v = velocity_[i];
        const int64_t n = p.value.numel();
        for (int64_t j = 0; j < n; ++j) {
            float g = p.grad[j] + weight_decay_ * p.value[j];
            v[j] = momentum_ * v[j] + g;
            p.value[j] -= lr * v[j];
        }
        std::memset(p.grad.data(), 0, size_t(n) * sizeof(float));
        ensure_finite(p.value, "sgd_step");
    }
}

namespace {

Tensor crop_or_copy(const Tensor& feats, int64_t crop_frames, Rng& rng) {
    const int64_t bins = feats.dim(0), frames = feats.dim(1);
    if (crop_frames <= 0 || frames <= crop_frames) return feats;
    int64_t off = int64_t(rng.below(uint64_t(frames - crop_frames + 1)));
    Tensor out({bins, crop_frames});
    for (int64_t f = 0; f < bins; ++f)
        std::memcpy(&out.at(f, 0), feats.data() + f * frames + off,
                    size_t(crop_frames) * sizeof(float));
    return out;
}

} // namespace

ToyFitResult toy_fit(Model& model, const std::vector<ToySample>& data,
                     const ScheduleConfig& schedule, int64_t steps, const ToyFitOptions& opts) {
    schedule.validate();
    if (steps < 1) throw ConfigError("need at least 1 step, got " + std::to_string(steps));
    if (steps > schedule.total_steps)
        throw ConfigError("steps " + std::to_string(steps) + " exceed schedule total_steps " +
                          std::to_string(schedule.total_steps));
    if (data.empty()) throw ConfigError("empty training set");
    const int64_t min_frames = model.config().min_input_frames();
    if (opts.crop_frames > 0 && opts.crop_frames < min_frames)
        throw ConfigError("crop of " + std::to_string(opts.crop_frames) + " frames is below the " +
                          std::to_string(min_frames) + " the preset needs");

    std::map<int64_t, int64_t> class_counts;
    for (size_t i = 0; i < data.size(); ++i) {
        const ToySample& s = data[i];
        if (s.label < 0)
            throw InputError("sample " + std::to_string(i) + " has negative label " +
                             std::to_string(s.label));
        if (s.features.ndim() != 2 || s.features.dim(0) != model.config().feat_dim)
            throw ConfigError("sample " + std::to_string(i) + " features " + s.features.shape_str() +
                              " do not match feat_dim " + std::to_string(model.config().feat_dim));
        if (s.features.dim(1) < min_frames)
            throw InputError("sample " + std::to_string(i) + " has " +
                             std::to_string(s.features.dim(1)) + " frames; preset " +
                             model.config().name + " requires at least " + std::to_string(min_frames));
        class_counts[s.label]++;
    }
    int64_t num_classes = class_counts.rbegin()->first + 1;
    if (int64_t(class_counts.size()) < 2)
        throw ConfigError("training needs at least 2 classes, got " +
                          std::to_string(class_counts.size()));
    for (int64_t c = 0; c < num_classes; ++c) {
        auto it = class_counts.find(c);
        int64_t count = it == class_counts.end() ? 0 : it->second;
        if (count < 2)
            throw ConfigError("class " + std::to_string(c) + " has " + std::to_string(count) +
                              " samples; at least 2 required");
    }

    AamConfig aam;
    aam.margin = opts.margin;
    aam.scale = opts.scale;
    aam.num_classes = num_classes;
    aam.validate();

    const int64_t emb_dim = model.config().embedding_dim;
    Parameter class_weights;
    class_weights.name = "classifier.w";
    class_weights.value = Tensor({num_classes, emb_dim});
    class_weights.grad = Tensor({num_classes, emb_dim});
    class_weights.init = InitSpec::kaiming(emb_dim);
    {
        Rng wrng(opts.seed ^ 0x9e3779b97f4a7c15ULL);
        float bound = std::sqrt(6.0f / float(emb_dim));
        for (int64_t i = 0; i < class_weights.value.numel(); ++i)
            class_weights.value[i] = float(wrng.uniform(-bound, bound));
    }

    std::vector<Parameter*> trainable;
    for (const auto& p : model.store().params()) trainable.push_back(p.get());
    trainable.push_back(&class_weights);
    SgdOptimizer opt(trainable, opts.momentum, opts.weight_decay);

    Rng crop_rng(opts.seed);
    ToyFitResult result;
    result.num_classes = num_classes;
    result.loss_trace.reserve(size_t(steps));

    std::vector<int64_t> labels;
    labels.reserve(data.size());
    for (const ToySample& s : data) labels.push_back(s.label);

    for (int64_t step = 1; step <= steps; ++step) {
        Tape tape;
        std::vector<Var> embs;
        embs.reserve(data.size());
        for (const ToySample& s : data) {
            Var x = make_input(crop_or_copy(s.features, opts.crop_frames, crop_rng));
            Var pre = model.forward_to_pre_embedding(&tape, x, true);
            embs.push_back(pre);
        }
        // Head batchnorm over the whole batch: stack [D] columns into [D,B].
        Var stacked = vop::stack_cols(&tape, embs);
        Var normed = model.head_bn_train(&tape, stacked);
        Var batch = vop::transpose2d(&tape, normed); // [B,D]
        Var cw = make_leaf(class_weights);
        Var loss = aam_softmax_loss(&tape, batch, labels, cw, aam);
        result.loss_trace.push_back(loss.value()[0]);
        tape.backward(loss);
        opt.step(lr_schedule(step, schedule));
    }

    // Training accuracy through the same pathway the loss saw (train-mode
    // batch statistics), on the full uncropped inputs: nearest class weight
    // by cosine.
    std::vector<Var> full_embs;
    full_embs.reserve(data.size());
    for (const ToySample& s : data)
        full_embs.push_back(model.forward_to_pre_embedding(nullptr, make_input(s.features), true));
    Var stacked = vop::stack_cols(nullptr, full_embs);
    const Tensor batch = vop::transpose2d(nullptr, model.head_bn_train(nullptr, stacked)).value();

    int64_t correct = 0;
    for (size_t i = 0; i < data.size(); ++i) {
        double best = -2.0;
        int64_t best_class = -1;
        double ne = 0.0;
        for (int64_t d = 0; d < emb_dim; ++d) {
            double v = batch.at(int64_t(i), d);
            ne += v * v;
        }
        ne = std::max(std::sqrt(ne), 1e-12);
        for (int64_t c = 0; c < num_classes; ++c) {
            double dot = 0.0, nw = 0.0;
            for (int64_t d = 0; d < emb_dim; ++d) {
                double wv = class_weights.value.at(c, d);
                dot += double(batch.at(int64_t(i), d)) * wv;
                nw += wv * wv;
            }
            double cosv = dot / (ne * std::max(std::sqrt(nw), 1e-12));
            if (cosv > best) {
                best = cosv;
                best_class = c;
            }
        }
        if (best_class == data[i].label) ++correct;
    }
    result.train_accuracy = double(correct) / double(data.size());
    return result;
}

} // namespace camforge
