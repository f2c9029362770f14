#include "camforge/fbank.hpp"

#include <cmath>
#include <complex>
#include <string>

#include "camforge/error.hpp"

namespace camforge {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

void FbankConfig::validate() const {
    if (sample_rate < 1) throw ConfigError("fbank: sample rate must be positive");
    if (frame_length < 2 || frame_shift < 1)
        throw ConfigError("fbank: frame length/shift out of range");
    if (fft_size < frame_length)
        throw ConfigError("fbank: fft size " + std::to_string(fft_size) +
                          " smaller than frame length " + std::to_string(frame_length));
    if ((fft_size & (fft_size - 1)) != 0 || fft_size < 2)
        throw ConfigError("fbank: fft size must be a power of two");
    if (num_mels < 1) throw ConfigError("fbank: need at least one mel bin");
    if (!(low_hz >= 0.0) || !(high_hz > low_hz) || high_hz > sample_rate / 2.0)
        throw ConfigError("fbank: mel band [" + std::to_string(low_hz) + ", " +
                          std::to_string(high_hz) + "] invalid for sample rate " +
                          std::to_string(sample_rate));
    if (!(log_floor > 0.0)) throw ConfigError("fbank: log floor must be positive");
}

int64_t FbankConfig::num_frames(int64_t num_samples) const {
    if (num_samples < frame_length) return 0;
    return 1 + (num_samples - frame_length) / frame_shift;
}

namespace {

// Iterative radix-2 FFT, in place over interleaved complex doubles.
void fft_radix2(std::vector<std::complex<double>>& a) {
    size_t n = a.size();
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        double ang = -2.0 * M_PI / static_cast<double>(len);
        std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                std::complex<double> u = a[i + k];
                std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

} // namespace

Tensor fbank(const std::vector<float>& samples, const FbankConfig& cfg) {
    cfg.validate();
    int64_t n = static_cast<int64_t>(samples.size());
    int64_t t = cfg.num_frames(n);
    if (t < 1)
        throw InputError("audio too short for one frame: " + std::to_string(n) + " samples, " +
                         std::to_string(cfg.frame_length) + " required");

    int bins = cfg.fft_size / 2 + 1;
    std::vector<double> window(cfg.frame_length);
    for (int i = 0; i < cfg.frame_length; ++i)
        window[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (cfg.frame_length - 1));

    // Triangular filters on num_mels+2 equally spaced mel points.
    double mel_lo = hz_to_mel(cfg.low_hz), mel_hi = hz_to_mel(cfg.high_hz);
    std::vector<double> mel_pts(cfg.num_mels + 2);
    for (int i = 0; i < cfg.num_mels + 2; ++i)
        mel_pts[i] = mel_lo + (mel_hi - mel_lo) * i / (cfg.num_mels + 1);
    std::vector<double> bin_hz(bins);
    for (int k = 0; k < bins; ++k)
        bin_hz[k] = static_cast<double>(k) * cfg.sample_rate / cfg.fft_size;
    // weights[m] holds (first_bin, coefficients)
    std::vector<std::pair<int, std::vector<double>>> filters(cfg.num_mels);
    for (int m = 0; m < cfg.num_mels; ++m) {
        double lo = mel_to_hz(mel_pts[m]), mid = mel_to_hz(mel_pts[m + 1]),
               hi = mel_to_hz(mel_pts[m + 2]);
        int first = -1;
        std::vector<double> w;
        for (int k = 0; k < bins; ++k) {
            double f = bin_hz[k];
            double v = 0.0;
            if (f > lo && f < hi) v = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
            if (v > 0.0) {
                if (first < 0) first = k;
                w.push_back(v);
            } else if (first >= 0) {
                break;
            }
        }
        if (first < 0) first = 0;
        filters[m] = {first, std::move(w)};
    }

    Tensor out({cfg.num_mels, t});
    std::vector<std::complex<double>> buf(cfg.fft_size);
    std::vector<double> power(bins);
    for (int64_t fr = 0; fr < t; ++fr) {
        const float* src = samples.data() + fr * cfg.frame_shift;
        for (int i = 0; i < cfg.frame_length; ++i)
            buf[i] = std::complex<double>(static_cast<double>(src[i]) * window[i], 0.0);
        for (int i = cfg.frame_length; i < cfg.fft_size; ++i) buf[i] = 0.0;
        fft_radix2(buf);
        for (int k = 0; k < bins; ++k) power[k] = std::norm(buf[k]);
        for (int m = 0; m < cfg.num_mels; ++m) {
            const auto& [first, w] = filters[m];
            double acc = 0.0;
            for (size_t i = 0; i < w.size(); ++i) acc += w[i] * power[first + i];
            if (acc < cfg.log_floor) acc = cfg.log_floor;
            out.at(m, fr) = static_cast<float>(std::log(acc));
        }
    }
    return out;
}

} // namespace camforge
