#pragma once

#include <cstdint>
#include <vector>

#include "camforge/tensor.hpp"
#include "camforge/wav.hpp"

namespace camforge {

// Log mel filterbank extraction. Fields are exposed so the frontend can be
// matched to external feature pipelines; defaults give 80-dim features at
// 100 frames/second. No dither, no pre-emphasis, no mean normalization, so
// extraction is fully deterministic.
struct FbankConfig {
    int sample_rate = 16000;
    int frame_length = 400; // samples (25 ms)
    int frame_shift = 160;  // samples (10 ms)
    int fft_size = 512;     // power of two, >= frame_length
    int num_mels = 80;
    double low_hz = 20.0;
    double high_hz = 7600.0;
    double log_floor = 1e-10; // applied to mel power before the natural log

    void validate() const;

    // Frames produced for n samples: 1 + floor((n - frame_length) / frame_shift).
    int64_t num_frames(int64_t num_samples) const;
};

// Hamming-windowed power spectrum -> triangular mel filters (HTK mel scale)
// -> natural log. Returns [num_mels, T]. Signals shorter than one frame
// raise InputError.
Tensor fbank(const std::vector<float>& samples, const FbankConfig& cfg);

inline Tensor fbank(const Audio& a, const FbankConfig& cfg) { return fbank(a.samples, cfg); }

// Mel scale helpers (HTK convention).
double hz_to_mel(double hz);
double mel_to_hz(double mel);

} // namespace camforge
