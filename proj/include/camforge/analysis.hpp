#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "camforge/model.hpp"

namespace camforge {

struct LayerRow {
    std::string name;
    int64_t param_count = 0;
    int64_t macs = 0;
    int64_t flops = 0;
};

struct ComplexityReport {
    std::vector<LayerRow> rows;
    int64_t total_params = 0;
    int64_t total_macs = 0;
    int64_t total_flops = 0;
    double input_seconds = 0.0;
    int64_t input_frames = 0;
    std::string flop_convention;
};

// Trainable parameter elements grouped per layer; batchnorm running stats are
// buffers, not parameters, and are not counted.
ComplexityReport count_params(const Model& model);

// Multiplies for one application of a layer. Padded taps count as real
// multiplies, mirroring a kernel that never branches at the edges.
int64_t conv1d_macs(int64_t out_channels, int64_t in_channels, int64_t kernel, int64_t out_len);
int64_t conv2d_macs(int64_t out_channels, int64_t in_channels, int64_t kernel_h, int64_t kernel_w,
                    int64_t out_h, int64_t out_w);
int64_t linear_macs(int64_t out_dim, int64_t in_dim, int64_t batch = 1);

// Params plus analytic MACs/FLOPs at the given input length. Convention:
// flops = 2*macs plus one add per bias element, batchnorm 2 flops/element,
// activations and mean pooling 1 flop/element, statistics pooling 3, padded
// taps counted.
ComplexityReport count_flops(const Model& model, int64_t input_frames);

// Frame count the default feature front-end produces for a duration.
int64_t frames_for_seconds(double seconds);

std::string format_human(const ComplexityReport& report);
// One row per line: name<TAB>params<TAB>macs<TAB>flops, then a total line.
std::string format_machine(const ComplexityReport& report);

struct RtfOptions {
    int repeats = 5;
    bool include_features = false;
    uint64_t seed = 17;
    // Monotonic seconds; injectable for tests. Null uses a steady clock.
    std::function<double()> clock;
};

struct RtfResult {
    double rtf = 0.0;
    double median_wall = 0.0;
    double min_wall = 0.0;
    double max_wall = 0.0;
    double audio_seconds = 0.0;
    int threads = 1;
    std::vector<double> walls;
};

// Median forward wall time over `repeats` timed runs (after one warmup run)
// divided by the audio duration. Single-threaded by construction.
RtfResult benchmark_rtf(const Model& model, double audio_seconds, const RtfOptions& opts = {});

} // namespace camforge
