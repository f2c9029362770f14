#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "camforge/autograd.hpp"
#include "camforge/params.hpp"
#include "camforge/var_ops.hpp"

namespace camforge {

// ---------------------------------------------------------------------------
// configuration

struct FcmSpec {
    bool enabled = false;
    int64_t channels = 32;
    std::vector<int64_t> freq_strides = {1, 2, 2, 2};
    int64_t kernel = 3;
};

struct InputTdnnSpec {
    int64_t out_channels = 128;
    int64_t kernel = 5;
    int64_t stride = 2;
};

struct BlockSpec {
    int64_t num_layers = 0;
    int64_t growth = 32;      // channels appended per layer
    int64_t bottleneck = 128; // width of the per-layer 1x1 squeeze
    int64_t kernel = 3;
    int64_t dilation = 1;
};

// Declarative architecture description. Presets fill it; a key=value config
// file can override any field.
struct ModelConfig {
    std::string name = "custom";
    int64_t feat_dim = 80;
    FcmSpec fcm;
    InputTdnnSpec input_tdnn;
    std::vector<BlockSpec> blocks;
    double transition_compression = 0.5;
    bool use_cam = true;
    int64_t cam_hidden = 64;
    int64_t segment_length = 100;
    int64_t embedding_dim = 512;

    void validate() const;

    // Channel count entering the first dense block.
    int64_t backbone_input_channels() const;
    // Smallest T the full pipeline accepts (pooling needs >= 2 frames).
    int64_t min_input_frames() const;

    static ModelConfig preset(const std::string& name);
    static const std::vector<std::string>& preset_names();

    // Flat `key = value` text, '#' comments.
    static ModelConfig from_file(const std::string& path);
    std::string to_text() const;
};

// ---------------------------------------------------------------------------
// modules (views over ParameterStore-owned tensors)

struct BatchNorm {
    Parameter* gamma = nullptr;
    Parameter* beta = nullptr;
    Buffer* running_mean = nullptr;
    Buffer* running_var = nullptr;
    float eps = 1e-5f;
    float momentum = 0.1f;

    // Training mode normalizes with batch statistics over dim 1 and updates
    // the running buffers; inference mode uses the buffers and never writes.
    Var forward(Tape* tape, const Var& x, bool train) const;
};

struct Conv1dModule {
    Parameter* w = nullptr;
    Parameter* b = nullptr; // optional
    ops::Conv1dGeom geom;

    Var forward(Tape* tape, const Var& x) const;
};

struct Conv2dModule {
    Parameter* w = nullptr;
    Parameter* b = nullptr;
    ops::Conv2dGeom geom;

    Var forward(Tape* tape, const Var& x) const;
};

struct CamParams {
    Parameter* w1 = nullptr; // [H, C, 1]
    Parameter* b1 = nullptr; // [H]
    Parameter* w2 = nullptr; // [C', H, 1]
    Parameter* b2 = nullptr; // [C']
};

// One densely connected layer: bottleneck FNN, TDNN conv, optional
// context-aware masking, concatenation with the input stream.
struct DenseLayer {
    BatchNorm bn1;
    Conv1dModule fnn; // 1x1 to bottleneck
    BatchNorm bn2;
    Conv1dModule tdnn; // kernel-3 dilated conv to growth channels
    bool use_cam = false;
    CamParams cam;
    int64_t segment_length = 100;

    // [C,T] -> [C+k,T]
    Var forward(Tape* tape, const Var& x, bool train) const;
};

struct Transition {
    BatchNorm bn;
    Conv1dModule conv; // 1x1 compression

    Var forward(Tape* tape, const Var& x, bool train) const;
};

struct FcmBlock {
    Conv2dModule conv1;
    BatchNorm bn1;
    Conv2dModule conv2;
    BatchNorm bn2;
    bool projected = false; // strided shortcut
    Conv2dModule proj;
    BatchNorm proj_bn;
    int64_t freq_stride = 1;

    Var forward(Tape* tape, const Var& x, bool train) const;
};

struct Fcm {
    Conv2dModule stem;
    BatchNorm stem_bn;
    std::vector<FcmBlock> blocks;
    int64_t out_channels = 0; // channels * (feat_dim / 8)

    // [80,T] -> [out_channels,T]
    Var forward(Tape* tape, const Var& x, bool train) const;
};

struct Head {
    Parameter* linear_w = nullptr; // [embedding_dim, 2C]
    BatchNorm bn;
};

// ---------------------------------------------------------------------------

class Model {
public:
    Model(ModelConfig cfg, uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    ParameterStore& store() { return store_; }
    const ParameterStore& store() const { return store_; }

    // Frame-level pipeline down to the pre-batchnorm embedding vector [D].
    // Training mode uses batch statistics in every batchnorm and updates
    // running buffers; the head batchnorm is NOT applied here (training
    // stacks a batch first, inference normalizes the single vector).
    Var forward_to_pre_embedding(Tape* tape, const Var& features, bool train) const;

    // Full inference: features [feat_dim, T] -> embedding [D], inference-mode
    // batchnorm everywhere. Throws InputError when T is below the minimum.
    Tensor extract_embedding(const Tensor& features) const;

    // Head batchnorm over a [D,B] stack of pre-embeddings (training path).
    Var head_bn_train(Tape* tape, const Var& stacked) const;

    // module tree, exposed for the complexity walker and tests
    Fcm fcm;
    Conv1dModule input_conv;
    BatchNorm input_bn;
    std::vector<std::vector<DenseLayer>> blocks;
    std::vector<Transition> transitions;
    BatchNorm out_bn;
    Head head;

private:
    ModelConfig cfg_;
    ParameterStore store_;
};

Model build_model(const std::string& preset, uint64_t seed);

} // namespace camforge
