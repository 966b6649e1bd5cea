#include <gtest/gtest.h>

#include <cstring>
#include <vector>

#include "support.hpp"

using namespace voxclass;

namespace {

std::vector<std::uint8_t> wav_bytes(std::uint16_t format, std::uint16_t channels, std::uint32_t rate,
                                    std::uint16_t bits, const std::vector<std::int16_t>& interleaved,
                                    bool extra_chunk = false) {
    std::vector<std::uint8_t> out;
    auto u16 = [&](std::uint16_t v) {
        out.push_back(v & 0xff);
        out.push_back(v >> 8);
    };
    auto u32 = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i)
            out.push_back((v >> (8 * i)) & 0xff);
    };
    auto tag = [&](const char* t) { out.insert(out.end(), t, t + 4); };
    tag("RIFF");
    u32(0);
    tag("WAVE");
    if (extra_chunk) {
        tag("LIST");
        u32(5);
        out.insert(out.end(), {'a', 'b', 'c', 'd', 'e', 0});  // odd size + pad byte
    }
    tag("fmt ");
    u32(16);
    u16(format);
    u16(channels);
    u32(rate);
    u32(rate * channels * bits / 8);
    u16(static_cast<std::uint16_t>(channels * bits / 8));
    u16(bits);
    tag("data");
    u32(static_cast<std::uint32_t>(interleaved.size() * 2));
    for (auto s : interleaved)
        u16(static_cast<std::uint16_t>(s));
    return out;
}

}  // namespace

TEST(Audio, RoundTripIsExactForPcmValues) {
    AudioSignal a;
    a.sample_rate = 48000;
    for (int v : {0, 1, -1, 32767, -32768, 1234, -4321})
        a.samples.push_back(v / 32768.0);
    const auto b = decode_wav(encode_wav(a));
    EXPECT_EQ(b.sample_rate, 48000.0);
    EXPECT_EQ(a.samples, b.samples);
}

TEST(Audio, ClipsOutOfRange) {
    EXPECT_EQ(amplitude_to_pcm16(2.0), 32767);
    EXPECT_EQ(amplitude_to_pcm16(-2.0), -32768);
    EXPECT_EQ(amplitude_to_pcm16(0.5), 16384);
}

TEST(Audio, StereoKeepsChannelZero) {
    const auto bytes = wav_bytes(1, 2, 44100, 16, {100, -5, 200, -6, 300, -7});
    const auto a = decode_wav(bytes);
    ASSERT_EQ(a.samples.size(), 3u);
    EXPECT_DOUBLE_EQ(a.samples[2], 300 / 32768.0);
    EXPECT_EQ(a.sample_rate, 44100.0);
}

TEST(Audio, SkipsUnknownChunks) {
    const auto a = decode_wav(wav_bytes(1, 1, 48000, 16, {1, 2, 3}, true));
    ASSERT_EQ(a.samples.size(), 3u);
    EXPECT_DOUBLE_EQ(a.samples[1], 2 / 32768.0);
}

TEST(Audio, Errors) {
    std::vector<std::uint8_t> tiny = {'R', 'I', 'F', 'F'};
    EXPECT_THROW(decode_wav(tiny), FormatError);
    auto bad = wav_bytes(1, 1, 48000, 16, {1});
    bad[8] = 'X';
    EXPECT_THROW(decode_wav(bad), FormatError);
    EXPECT_THROW(decode_wav(wav_bytes(3, 1, 48000, 16, {1})), UnsupportedError);   // float
    EXPECT_THROW(decode_wav(wav_bytes(1, 1, 48000, 8, {1})), UnsupportedError);    // 8-bit
    EXPECT_THROW(decode_wav(wav_bytes(1, 4, 48000, 16, {1, 1, 1, 1})), UnsupportedError);
    auto no_data = wav_bytes(1, 1, 48000, 16, {});
    no_data.resize(no_data.size() - 8);
    EXPECT_THROW(decode_wav(no_data), FormatError);
}

TEST(Audio, FileRoundTrip) {
    const auto dir = vt::scratch_dir("audio");
    const auto a = vt::sine(440, 0.2);
    write_wav(dir / "x.wav", a);
    const auto b = read_wav(dir / "x.wav");
    ASSERT_EQ(a.samples.size(), b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i)
        ASSERT_NEAR(a.samples[i], b.samples[i], 1.0 / 32768.0);
    EXPECT_THROW(read_wav(dir / "missing.wav"), IoError);
}
