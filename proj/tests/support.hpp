#pragma once

// Small fixtures shared by the unit tests.

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "voxclass/voxclass.hpp"

namespace vt {

using namespace voxclass;

inline AudioSignal sine(double hz, double seconds, double rate = 48000.0, double amp = 0.5, double phase = 0.0) {
    AudioSignal a;
    a.sample_rate = rate;
    a.samples.resize(static_cast<std::size_t>(std::llround(seconds * rate)));
    for (std::size_t i = 0; i < a.samples.size(); ++i)
        a.samples[i] = amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / rate + phase);
    return a;
}

/// Log spectrum that is flat except for the listed (grid index, log offset) bumps.
inline LogSpectrum flat_spectrum(const LogGrid& grid, double base = -10.0) {
    LogSpectrum s;
    s.grid = grid;
    s.log_intensities.assign(grid.n_points, base);
    return s;
}

/// Two-class training data: class c gets mean offset `shift * c` at `bin`
/// and independent unit noise everywhere.
inline std::vector<LogSpectrum> noisy_spectra(const LogGrid& grid, std::size_t n, std::size_t bin, double offset,
                                              voxclass::Rng& rng) {
    std::vector<LogSpectrum> out;
    for (std::size_t i = 0; i < n; ++i) {
        auto s = flat_spectrum(grid, 0.0);
        for (double& v : s.log_intensities)
            v = rng.normal();
        s.log_intensities[bin] += offset;
        out.push_back(std::move(s));
    }
    return out;
}

/// Spectral corpus built directly from log spectra, bypassing audio.
/// `make(subject_index, gender, choral, scale, segment)` returns one segment.
template <typename Make>
SpectralCorpus spectral_corpus(const LogGrid& grid, std::size_t per_group, std::size_t segments, Make&& make,
                               std::size_t scales = kScaleCount) {
    SpectralCorpus sc;
    sc.config.grid = grid;
    std::size_t idx = 0;
    for (Gender g : {Gender::male, Gender::female}) {
        for (Choral c : {Choral::singer, Choral::non_singer}) {
            for (std::size_t i = 0; i < per_group; ++i, ++idx) {
                SubjectSpectra s;
                s.id = subject_id(idx);
                s.gender = g;
                s.choral = c;
                for (std::size_t k = 0; k < scales; ++k) {
                    TakeSpectra t;
                    t.scale = k;
                    for (std::size_t m = 0; m < segments; ++m)
                        t.segments.push_back(make(idx, g, c, k, m));
                    s.takes.push_back(std::move(t));
                }
                sc.subjects.push_back(std::move(s));
            }
        }
    }
    return sc;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("voxclass_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace vt
