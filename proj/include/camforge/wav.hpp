#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace camforge {

// 16 kHz mono 16-bit PCM audio, samples scaled to [-1, 1).
struct Audio {
    std::vector<float> samples;
    int sample_rate = 16000;

    double seconds() const {
        return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
    }
};

// Reads a RIFF/WAVE file. Structural problems (bad magic, truncated chunks,
// missing fmt/data) raise FormatError; a well-formed file with the wrong
// sample format (not mono, not 16 kHz, not 16-bit PCM) raises InputError.
Audio read_wav(const std::string& path);

// Writes mono 16-bit PCM; samples are clamped to [-1, 1).
void write_wav(const std::string& path, const std::vector<float>& samples, int sample_rate);

} // namespace camforge
