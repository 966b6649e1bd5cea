#pragma once

// Mono audio buffers and the 16-bit PCM WAV container.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace voxclass {

struct AudioSignal {
    std::vector<double> samples;  // nominally in [-1, 1]
    double sample_rate = 48000.0;

    double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

inline void validate(const AudioSignal& signal) {
    if (!(signal.sample_rate > 0.0))
        throw RangeError("sample rate must be positive");
    for (double s : signal.samples)
        if (!std::isfinite(s))
            throw RangeError("audio contains non-finite samples");
}

namespace detail {

inline std::uint16_t read_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint32_t read_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline void put_tag(std::vector<std::uint8_t>& out, const char (&tag)[5]) {
    out.insert(out.end(), tag, tag + 4);
}

}  // namespace detail

inline constexpr std::uint16_t kWaveFormatPcm = 0x0001;
inline constexpr std::uint16_t kWaveFormatExtensible = 0xFFFE;

inline double pcm16_to_amplitude(std::int16_t v) { return static_cast<double>(v) / 32768.0; }

inline std::int16_t amplitude_to_pcm16(double a) {
    const double scaled = std::round(a * 32768.0);
    return static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
}

/// Decode a RIFF/WAVE byte buffer holding 16-bit integer PCM.
///
/// Mono is decoded as-is; for stereo only channel 0 is kept. Unknown chunks
/// (LIST, fact, ...) are skipped. A data chunk whose declared size runs past
/// the end of the buffer is truncated to the whole frames present.
inline AudioSignal decode_wav(std::span<const std::uint8_t> bytes) {
    using detail::read_u16;
    using detail::read_u32;

    if (bytes.size() < 12)
        throw FormatError("WAV: truncated RIFF header");
    if (std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw FormatError("WAV: missing RIFF/WAVE signature");

    std::size_t pos = 12;
    bool have_fmt = false;
    std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
    std::uint32_t rate = 0;
    const std::uint8_t* data = nullptr;
    std::size_t data_size = 0;

    while (pos + 8 <= bytes.size()) {
        const std::uint8_t* chunk = bytes.data() + pos;
        const std::uint32_t size = read_u32(chunk + 4);
        const std::size_t body = pos + 8;
        const std::size_t available = bytes.size() - body;

        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (size < 16 || available < 16)
                throw FormatError("WAV: truncated fmt chunk");
            format = read_u16(chunk + 8);
            channels = read_u16(chunk + 10);
            rate = read_u32(chunk + 12);
            block_align = read_u16(chunk + 20);
            bits = read_u16(chunk + 22);
            if (format == kWaveFormatExtensible && size >= 40 && available >= 40) {
                // The first two bytes of the sub-format GUID carry the real tag.
                format = read_u16(chunk + 8 + 24);
            }
            have_fmt = true;
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            data = chunk + 8;
            data_size = std::min<std::size_t>(size, available);
            break;
        }
        pos = body + size + (size & 1u);
    }

    if (!have_fmt)
        throw FormatError("WAV: no fmt chunk");
    if (data == nullptr)
        throw FormatError("WAV: no data chunk");
    if (format != kWaveFormatPcm)
        throw UnsupportedError("WAV: only integer PCM is supported (format tag " +
                               std::to_string(format) + ")");
    if (channels == 0)
        throw FormatError("WAV: zero channels");
    if (channels > 2)
        throw UnsupportedError("WAV: more than two channels");
    if (bits != 16)
        throw UnsupportedError("WAV: only 16-bit samples are supported");
    if (rate == 0)
        throw FormatError("WAV: zero sample rate");
    if (block_align != channels * 2)
        throw FormatError("WAV: inconsistent block alignment");

    AudioSignal out;
    out.sample_rate = static_cast<double>(rate);
    const std::size_t frames = data_size / block_align;
    out.samples.resize(frames);
    for (std::size_t i = 0; i < frames; ++i) {
        const auto raw = static_cast<std::int16_t>(read_u16(data + i * block_align));
        out.samples[i] = pcm16_to_amplitude(raw);
    }
    return out;
}

/// Encode as mono 16-bit PCM WAV; samples are clipped to the PCM range.
inline std::vector<std::uint8_t> encode_wav(const AudioSignal& signal) {
    using namespace detail;
    const auto rate = static_cast<std::uint32_t>(std::lround(signal.sample_rate));
    const auto data_bytes = static_cast<std::uint32_t>(signal.samples.size() * 2);

    std::vector<std::uint8_t> out;
    out.reserve(44 + data_bytes);
    put_tag(out, "RIFF");
    put_u32(out, 36 + data_bytes);
    put_tag(out, "WAVE");
    put_tag(out, "fmt ");
    put_u32(out, 16);
    put_u16(out, kWaveFormatPcm);
    put_u16(out, 1);
    put_u32(out, rate);
    put_u32(out, rate * 2);
    put_u16(out, 2);
    put_u16(out, 16);
    put_tag(out, "data");
    put_u32(out, data_bytes);
    for (double s : signal.samples)
        put_u16(out, static_cast<std::uint16_t>(amplitude_to_pcm16(s)));
    return out;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline AudioSignal read_wav(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    try {
        return decode_wav(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

inline void write_wav(const std::filesystem::path& path, const AudioSignal& signal) {
    const auto bytes = encode_wav(signal);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw IoError("short write to " + path.string());
}

}  // namespace voxclass
