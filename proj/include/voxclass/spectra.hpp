#pragma once

// From raw audio to normalized, log-frequency resampled power spectra.
//
// Pipeline per recording: cut into non-overlapping pieces of length delta,
// keep the loudest few (by RMS), take a windowed FFT of each, accumulate the
// power into fixed-width frequency bins, normalize every spectrum to unit
// mass, and resample log-intensity onto a grid uniform in log10(frequency).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "audio.hpp"
#include "error.hpp"

namespace voxclass {

enum class Window { hann, rectangular };
enum class SpectrumKind { power, amplitude };

inline std::string_view to_string(Window w) { return w == Window::hann ? "hann" : "rectangular"; }
inline std::string_view to_string(SpectrumKind k) { return k == SpectrumKind::power ? "power" : "amplitude"; }

inline Window parse_window(std::string_view s) {
    if (s == "hann") return Window::hann;
    if (s == "rectangular") return Window::rectangular;
    throw ConfigError("unknown window '" + std::string(s) + "'");
}

inline SpectrumKind parse_spectrum_kind(std::string_view s) {
    if (s == "power") return SpectrumKind::power;
    if (s == "amplitude") return SpectrumKind::amplitude;
    throw ConfigError("unknown spectrum kind '" + std::string(s) + "'");
}

/// Grid uniform in log10(frequency / Hz).
struct LogGrid {
    std::size_t n_points = 2000;
    double log_f_lo = std::log10(50.0);
    double log_f_hi = std::log10(20000.0);

    double step() const { return n_points > 1 ? (log_f_hi - log_f_lo) / static_cast<double>(n_points - 1) : 0.0; }
    double log_frequency(std::size_t i) const { return log_f_lo + step() * static_cast<double>(i); }
    double frequency_hz(std::size_t i) const { return std::pow(10.0, log_frequency(i)); }

    /// Nearest grid index to a frequency, clamped to the grid.
    std::size_t nearest_index(double hz) const {
        const double pos = (std::log10(hz) - log_f_lo) / step();
        const double clamped = std::clamp(std::round(pos), 0.0, static_cast<double>(n_points - 1));
        return static_cast<std::size_t>(clamped);
    }

    bool operator==(const LogGrid&) const = default;
};

struct SpectralConfig {
    double delta = 0.1;              // segment length, seconds
    std::size_t top_segments = 10;   // loudest pieces kept per recording
    double f_min = 0.0;
    double f_max = 20000.0;
    double bin_width = 10.0;
    Window window = Window::hann;
    SpectrumKind kind = SpectrumKind::power;
    double floor_ratio = 1e-12;      // zero-power floor relative to the peak bin
    LogGrid grid{};

    std::size_t n_bins() const { return static_cast<std::size_t>(std::llround((f_max - f_min) / bin_width)); }

    bool operator==(const SpectralConfig&) const = default;
};

struct Segment {
    std::vector<double> samples;
    double sample_rate = 0.0;
    double duration = 0.0;
    double rms_intensity = 0.0;
    std::size_t start = 0;  // offset of the first sample in the source signal
};

/// Un-normalized binned spectrum. Bin k is centred on f_min + k * bin_width.
struct RawSpectrum {
    std::vector<double> intensities;
    double bin_width = 10.0;
    double f_min = 0.0;
    double f_max = 20000.0;

    double bin_frequency(std::size_t k) const { return f_min + bin_width * static_cast<double>(k); }
};

/// Spectrum with sum(intensities) * bin_width == 1.
struct PowerSpectrum {
    std::vector<double> intensities;
    double bin_width = 10.0;
    double f_min = 0.0;
    double f_max = 20000.0;

    double bin_frequency(std::size_t k) const { return f_min + bin_width * static_cast<double>(k); }
};

struct LogSpectrum {
    LogGrid grid;
    std::vector<double> log_intensities;  // natural log of normalized intensity

    std::size_t n_points() const { return log_intensities.size(); }

    std::vector<double> log_frequencies() const {
        std::vector<double> out(grid.n_points);
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = grid.log_frequency(i);
        return out;
    }
};

inline double rms(std::span<const double> xs) {
    if (xs.empty())
        return 0.0;
    double acc = 0.0;
    for (double x : xs)
        acc += x * x;
    return std::sqrt(acc / static_cast<double>(xs.size()));
}

/// Cut the signal into consecutive, non-overlapping pieces of `delta` seconds.
/// A trailing remainder shorter than delta is discarded.
inline std::vector<Segment> segment(const AudioSignal& signal, double delta) {
    if (!(delta > 0.0))
        throw RangeError("segment length must be positive");
    if (!(signal.sample_rate > 0.0))
        throw RangeError("sample rate must be positive");
    const auto length = static_cast<std::size_t>(std::llround(delta * signal.sample_rate));
    if (length == 0)
        throw RangeError("segment length is shorter than one sample");
    const std::size_t count = signal.samples.size() / length;
    if (count == 0)
        throw InsufficientAudioError("audio of " + std::to_string(signal.samples.size()) +
                                     " samples is shorter than one segment of " + std::to_string(length));

    std::vector<Segment> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Segment s;
        const auto first = signal.samples.begin() + static_cast<std::ptrdiff_t>(i * length);
        s.samples.assign(first, first + static_cast<std::ptrdiff_t>(length));
        s.sample_rate = signal.sample_rate;
        s.duration = static_cast<double>(length) / signal.sample_rate;
        s.rms_intensity = rms(s.samples);
        s.start = i * length;
        out.push_back(std::move(s));
    }
    return out;
}

/// The `n` loudest segments by RMS, returned in their original temporal order.
/// Equal RMS prefers the earlier segment. Fewer than `n` inputs returns all.
inline std::vector<Segment> select_top_segments(std::span<const Segment> segments, std::size_t n) {
    if (n == 0)
        throw RangeError("must keep at least one segment");
    if (segments.empty())
        throw InsufficientAudioError("no segments to select from");

    std::vector<std::size_t> order(segments.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return segments[a].rms_intensity > segments[b].rms_intensity;
    });
    order.resize(std::min(n, order.size()));
    std::sort(order.begin(), order.end());

    std::vector<Segment> out;
    out.reserve(order.size());
    for (std::size_t i : order)
        out.push_back(segments[i]);
    return out;
}

/// Windowed FFT binned onto a fixed grid. Holds FFT plans and the window, so
/// reuse one instance per thread when analysing many segments.
class SpectrumAnalyzer {
public:
    explicit SpectrumAnalyzer(Window window = Window::hann, SpectrumKind kind = SpectrumKind::power)
        : window_kind_(window), kind_(kind) {
        fft_.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    }

    RawSpectrum operator()(const Segment& seg, double f_min, double f_max, double bin_width) {
        if (seg.samples.empty())
            throw InsufficientAudioError("empty segment");
        if (!(bin_width > 0.0))
            throw RangeError("bin width must be positive");
        if (!(f_min >= 0.0 && f_min < f_max))
            throw RangeError("frequency range must satisfy 0 <= f_min < f_max");
        if (f_max > seg.sample_rate / 2.0 + 1e-9)
            throw RangeError("f_max " + std::to_string(f_max) + " Hz is above the Nyquist frequency " +
                             std::to_string(seg.sample_rate / 2.0) + " Hz");

        const std::size_t n = seg.samples.size();
        prepare_window(n);
        buffer_.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            buffer_[i] = seg.samples[i] * window_[i];
        fft_.fwd(spectrum_, buffer_);

        RawSpectrum out;
        out.bin_width = bin_width;
        out.f_min = f_min;
        out.f_max = f_max;
        const auto n_bins = static_cast<std::size_t>(std::llround((f_max - f_min) / bin_width));
        out.intensities.assign(n_bins, 0.0);

        const double resolution = seg.sample_rate / static_cast<double>(n);
        for (std::size_t m = 0; m < spectrum_.size(); ++m) {
            const double f = resolution * static_cast<double>(m);
            const double pos = std::round((f - f_min) / bin_width);
            if (pos < 0.0 || pos >= static_cast<double>(n_bins))
                continue;
            const double mag2 = std::norm(spectrum_[m]);
            out.intensities[static_cast<std::size_t>(pos)] +=
                kind_ == SpectrumKind::power ? mag2 : std::sqrt(mag2);
        }
        return out;
    }

private:
    void prepare_window(std::size_t n) {
        if (window_.size() == n)
            return;
        window_.assign(n, 1.0);
        if (window_kind_ == Window::hann) {
            for (std::size_t i = 0; i < n; ++i)
                window_[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                                  static_cast<double>(n));
        }
    }

    Window window_kind_;
    SpectrumKind kind_;
    Eigen::FFT<double> fft_;
    std::vector<double> window_;
    std::vector<double> buffer_;
    std::vector<std::complex<double>> spectrum_;
};

inline RawSpectrum power_spectrum(const Segment& seg, double f_min = 0.0, double f_max = 20000.0,
                                  double bin_width = 10.0, Window window = Window::hann,
                                  SpectrumKind kind = SpectrumKind::power) {
    SpectrumAnalyzer analyzer(window, kind);
    return analyzer(seg, f_min, f_max, bin_width);
}

inline bool is_silent(const RawSpectrum& raw) {
    return std::none_of(raw.intensities.begin(), raw.intensities.end(), [](double v) { return v > 0.0; });
}

/// Divide by the spectrum's integral so that sum(I) * bin_width == 1.
inline PowerSpectrum normalize(const RawSpectrum& raw) {
    double mass = 0.0;
    for (double v : raw.intensities) {
        if (v < 0.0 || !std::isfinite(v))
            throw RangeError("spectrum has negative or non-finite intensities");
        mass += v;
    }
    mass *= raw.bin_width;
    if (!(mass > 0.0))
        throw SilenceError("spectrum has no energy");

    PowerSpectrum out;
    out.bin_width = raw.bin_width;
    out.f_min = raw.f_min;
    out.f_max = raw.f_max;
    out.intensities.resize(raw.intensities.size());
    for (std::size_t k = 0; k < raw.intensities.size(); ++k)
        out.intensities[k] = raw.intensities[k] / mass;
    return out;
}

/// Resample log(I) onto a log10-frequency grid by linear interpolation
/// between the two bracketing bins. Bins are floored at floor_ratio times
/// the peak bin before the log so silence inside the band stays finite.
inline LogSpectrum log_resample(const PowerSpectrum& spec, const LogGrid& grid, double floor_ratio = 1e-12) {
    const std::size_t n = spec.intensities.size();
    if (n < 2)
        throw RangeError("spectrum needs at least two bins");
    if (grid.n_points < 2)
        throw RangeError("log grid needs at least two points");
    if (!(grid.log_f_lo < grid.log_f_hi))
        throw RangeError("log grid bounds must be increasing");
    if (std::pow(10.0, grid.log_f_lo) < spec.f_min + spec.bin_width - 1e-9)
        throw RangeError("log grid starts inside the lowest bin");
    if (std::pow(10.0, grid.log_f_hi) > spec.f_max + 1e-9)
        throw RangeError("log grid extends beyond the spectrum");

    const double peak = *std::max_element(spec.intensities.begin(), spec.intensities.end());
    if (!(peak > 0.0))
        throw SilenceError("spectrum has no energy");
    const double floor = peak * floor_ratio;

    std::vector<double> log_bins(n);
    for (std::size_t k = 0; k < n; ++k)
        log_bins[k] = std::log(std::max(spec.intensities[k], floor));

    LogSpectrum out;
    out.grid = grid;
    out.log_intensities.resize(grid.n_points);
    const double last = static_cast<double>(n - 1);
    for (std::size_t i = 0; i < grid.n_points; ++i) {
        double pos = (grid.frequency_hz(i) - spec.f_min) / spec.bin_width;
        const double snapped = std::round(pos);
        if (std::abs(pos - snapped) < 1e-9)
            pos = snapped;
        if (pos >= last) {
            out.log_intensities[i] = log_bins[n - 1];
            continue;
        }
        const auto k = static_cast<std::size_t>(std::floor(pos));
        const double t = pos - static_cast<double>(k);
        out.log_intensities[i] = t == 0.0 ? log_bins[k] : (1.0 - t) * log_bins[k] + t * log_bins[k + 1];
    }
    return out;
}

/// Full per-recording pipeline: the loudest `top_segments` pieces, each
/// turned into a LogSpectrum, in temporal order. Silent pieces are dropped;
/// a recording with no audible piece raises SilenceError.
inline std::vector<LogSpectrum> analyze_recording(const AudioSignal& signal, const SpectralConfig& config,
                                                  SpectrumAnalyzer* analyzer = nullptr) {
    SpectrumAnalyzer local(config.window, config.kind);
    SpectrumAnalyzer& fft = analyzer != nullptr ? *analyzer : local;

    const auto pieces = segment(signal, config.delta);
    const auto top = select_top_segments(pieces, config.top_segments);
    std::vector<LogSpectrum> out;
    out.reserve(top.size());
    for (const Segment& seg : top) {
        const RawSpectrum raw = fft(seg, config.f_min, config.f_max, config.bin_width);
        if (is_silent(raw))
            continue;
        out.push_back(log_resample(normalize(raw), config.grid, config.floor_ratio));
    }
    if (out.empty())
        throw SilenceError("recording is silent");
    return out;
}

/// Single-piece pipeline used for streamed chunks: no segmentation or
/// top-n selection, the whole buffer is one segment.
inline LogSpectrum analyze_chunk(std::span<const double> samples, double sample_rate, const SpectralConfig& config,
                                 SpectrumAnalyzer& analyzer) {
    Segment seg;
    seg.samples.assign(samples.begin(), samples.end());
    seg.sample_rate = sample_rate;
    seg.duration = static_cast<double>(samples.size()) / sample_rate;
    seg.rms_intensity = rms(samples);
    const RawSpectrum raw = analyzer(seg, config.f_min, config.f_max, config.bin_width);
    return log_resample(normalize(raw), config.grid, config.floor_ratio);
}

inline void write_spectrum_csv(std::ostream& out, const PowerSpectrum& spec) {
    out << "frequency_hz,intensity\n";
    out.precision(17);
    for (std::size_t k = 0; k < spec.intensities.size(); ++k)
        out << spec.bin_frequency(k) << ',' << spec.intensities[k] << '\n';
}

}  // namespace voxclass
