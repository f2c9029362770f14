#include "camforge/wav.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "camforge/error.hpp"

namespace camforge {

namespace {

uint32_t read_u32(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t read_u16(const uint8_t* p) {
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

} // namespace

Audio read_wav(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw FormatError(path + " is not a RIFF/WAVE file");

    bool have_fmt = false;
    uint16_t audio_format = 0, channels = 0, bits = 0;
    uint32_t sample_rate = 0;
    const uint8_t* data = nullptr;
    uint32_t data_len = 0;

    size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const uint8_t* hdr = bytes.data() + pos;
        uint32_t chunk_len = read_u32(hdr + 4);
        size_t body = pos + 8;
        if (body + chunk_len > bytes.size())
            throw FormatError(path + ": chunk at offset " + std::to_string(pos) +
                              " extends past end of file");
        if (std::memcmp(hdr, "fmt ", 4) == 0) {
            if (chunk_len < 16) throw FormatError(path + ": fmt chunk too short");
            audio_format = read_u16(bytes.data() + body);
            channels = read_u16(bytes.data() + body + 2);
            sample_rate = read_u32(bytes.data() + body + 4);
            bits = read_u16(bytes.data() + body + 14);
            have_fmt = true;
        } else if (std::memcmp(hdr, "data", 4) == 0) {
            data = bytes.data() + body;
            data_len = chunk_len;
        }
        pos = body + chunk_len + (chunk_len & 1);
    }
    if (!have_fmt) throw FormatError(path + ": missing fmt chunk");
    if (!data) throw FormatError(path + ": missing data chunk");

    if (audio_format != 1)
        throw InputError(path + ": compression code " + std::to_string(audio_format) +
                         " is not linear PCM");
    if (channels != 1)
        throw InputError(path + ": expected mono audio, got " + std::to_string(channels) +
                         " channels");
    if (sample_rate != 16000)
        throw InputError(path + ": expected 16000 Hz, got " + std::to_string(sample_rate));
    if (bits != 16)
        throw InputError(path + ": expected 16-bit samples, got " + std::to_string(bits));
    if (data_len % 2 != 0) throw FormatError(path + ": data chunk has odd byte length");

    Audio a;
    a.sample_rate = static_cast<int>(sample_rate);
    a.samples.resize(data_len / 2);
    for (size_t i = 0; i < a.samples.size(); ++i) {
        int16_t s = static_cast<int16_t>(read_u16(data + 2 * i));
        a.samples[i] = static_cast<float>(s) / 32768.0f;
    }
    return a;
}

void write_wav(const std::string& path, const std::vector<float>& samples, int sample_rate) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for writing");
    uint32_t data_len = static_cast<uint32_t>(samples.size() * 2);
    uint32_t riff_len = 36 + data_len;
    uint32_t byte_rate = static_cast<uint32_t>(sample_rate) * 2;

    auto put_u32 = [&](uint32_t v) {
        char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 24)};
        f.write(b, 4);
    };
    auto put_u16 = [&](uint16_t v) {
        char b[2] = {static_cast<char>(v), static_cast<char>(v >> 8)};
        f.write(b, 2);
    };

    f.write("RIFF", 4);
    put_u32(riff_len);
    f.write("WAVE", 4);
    f.write("fmt ", 4);
    put_u32(16);
    put_u16(1); // PCM
    put_u16(1); // mono
    put_u32(static_cast<uint32_t>(sample_rate));
    put_u32(byte_rate);
    put_u16(2);  // block align
    put_u16(16); // bits
    f.write("data", 4);
    put_u32(data_len);
    for (float s : samples) {
        float c = std::min(std::max(s, -1.0f), 32767.0f / 32768.0f);
        int16_t v = static_cast<int16_t>(std::lrintf(c * 32768.0f));
        put_u16(static_cast<uint16_t>(v));
    }
    if (!f) throw IoError("short write to " + path);
}

} // namespace camforge
