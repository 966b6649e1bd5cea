#pragma once

// Synthetic sung-vowel corpus.
//
// A take is a harmonic series on the sung note's fundamental with power
// falling as k^-decay, shaped by Gaussian (in log power) resonance bumps,
// plus broadband noise shaped by the same resonances. The class structure
// is carried entirely by the bumps and the register:
//   - men sing one octave below women and carry a low chest resonance;
//   - both genders have the usual /a/ vowel formants (F1-F3);
//   - male choir singers add a resonance near 3 kHz, female choir singers
//     one near 10 kHz; non-singers have neither.
// Everything else (tilt, pitch error, noise level, formant positions) is
// drawn per subject from the same distribution for every class.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <unsupported/Eigen/FFT>

#include "audio.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "tasks.hpp"

namespace voxclass {

inline constexpr int kGeneratorVersion = 1;

struct FormantBump {
    double center_hz = 0.0;
    double bandwidth_hz = 100.0;  // standard deviation of the bump
    double gain = 1.0;            // power multiplier at the centre

    bool operator==(const FormantBump&) const = default;
};

struct VoiceProfile {
    double fundamental_hz = 220.0;
    std::size_t n_harmonics = 0;  // 0: every harmonic below 20 kHz and 0.45 fs
    double harmonic_decay = 2.0;
    std::vector<FormantBump> formant_bumps;
    double jitter = 0.0;          // relative std of the take's pitch error
    double noise_floor = 0.0;     // noise power relative to harmonic power
    Gender gender = Gender::male;
    Choral choral = Choral::non_singer;
    double attack_s = 0.12;
    double release_s = 0.10;
    double drift_depth = 0.1;     // slow loudness wobble, relative
    double drift_hz = 0.7;
};

inline void validate(const VoiceProfile& p) {
    if (!(p.fundamental_hz > 0.0))
        throw RangeError("fundamental must be positive");
    if (!(p.jitter >= 0.0 && p.jitter < 1.0))
        throw RangeError("jitter must lie in [0, 1)");
    if (!(p.noise_floor >= 0.0 && p.noise_floor < 1.0))
        throw RangeError("noise floor must lie in [0, 1)");
    for (const auto& b : p.formant_bumps)
        if (!(b.gain >= 0.0) || !(b.bandwidth_hz > 0.0))
            throw RangeError("formant bump needs gain >= 0 and bandwidth > 0");
}

/// Equal-tempered C major, do..do, A4 = 440 Hz. Women C4-C5, men an octave lower.
inline std::array<double, kScaleCount> scale_fundamentals(Gender gender) {
    constexpr std::array<int, kScaleCount> semitones_above_c4 = {0, 2, 4, 5, 7, 9, 11, 12};
    std::array<double, kScaleCount> out{};
    const double octave = gender == Gender::female ? 1.0 : 0.5;
    for (std::size_t i = 0; i < kScaleCount; ++i)
        out[i] = octave * 440.0 * std::pow(2.0, static_cast<double>(semitones_above_c4[i] - 9) / 12.0);
    return out;
}

/// Power multiplier of the resonance bumps at frequency f.
inline double resonance_gain(const std::vector<FormantBump>& bumps, double f) {
    double log_gain = 0.0;
    for (const auto& b : bumps) {
        if (b.gain <= 0.0)
            return 0.0;
        const double u = (f - b.center_hz) / b.bandwidth_hz;
        log_gain += std::log(b.gain) * std::exp(-0.5 * u * u);
    }
    return std::exp(log_gain);
}

inline AudioSignal generate_take(const VoiceProfile& profile, double duration, double sample_rate, std::uint64_t seed) {
    validate(profile);
    if (!(sample_rate > 0.0) || !(duration > 0.0))
        throw RangeError("duration and sample rate must be positive");
    const auto n = static_cast<std::size_t>(std::llround(duration * sample_rate));
    Rng rng(seed);

    const double f0 = profile.fundamental_hz * (1.0 + profile.jitter * rng.normal());
    const double top = std::min(20000.0, 0.45 * sample_rate);
    const std::size_t harmonics =
        profile.n_harmonics != 0 ? profile.n_harmonics : static_cast<std::size_t>(std::max(1.0, std::floor(top / f0)));

    std::vector<double> signal(n, 0.0);
    double harmonic_power = 0.0;
    for (std::size_t k = 1; k <= harmonics; ++k) {
        const double fk = static_cast<double>(k) * f0;
        const double phase = 2.0 * std::numbers::pi * rng.uniform();
        if (fk >= sample_rate / 2.0)
            continue;
        const double power = std::pow(static_cast<double>(k), -profile.harmonic_decay) *
                             resonance_gain(profile.formant_bumps, fk);
        if (!(power > 0.0))
            continue;
        harmonic_power += power;
        const double amp = std::sqrt(2.0 * power);
        // Phasor recurrence, renormalized periodically against drift.
        const std::complex<double> step = std::polar(1.0, 2.0 * std::numbers::pi * fk / sample_rate);
        std::complex<double> z = std::polar(1.0, phase);
        for (std::size_t i = 0; i < n; ++i) {
            signal[i] += amp * z.imag();
            z *= step;
            if ((i & 1023u) == 1023u)
                z /= std::abs(z);
        }
    }

    const double drift_phase = 2.0 * std::numbers::pi * rng.uniform();

    if (profile.noise_floor > 0.0 && n > 1) {
        std::vector<double> white(n);
        for (double& v : white)
            v = rng.normal();
        Eigen::FFT<double> fft;
        fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
        std::vector<std::complex<double>> spec;
        fft.fwd(spec, white);
        for (std::size_t m = 0; m < spec.size(); ++m) {
            const double f = sample_rate * static_cast<double>(m) / static_cast<double>(n);
            const double shape = resonance_gain(profile.formant_bumps, f) / (1.0 + f / 1000.0);
            spec[m] *= std::sqrt(shape);
        }
        std::vector<double> shaped;
        fft.inv(shaped, spec, static_cast<Eigen::Index>(n));
        double ms = 0.0;
        for (double v : shaped)
            ms += v * v;
        ms /= static_cast<double>(n);
        const double reference = harmonic_power > 0.0 ? harmonic_power : 1.0;
        if (ms > 0.0) {
            const double scale = std::sqrt(profile.noise_floor * reference / ms);
            for (std::size_t i = 0; i < n; ++i)
                signal[i] += scale * shaped[i];
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / sample_rate;
        double env = 1.0;
        if (profile.attack_s > 0.0 && t < profile.attack_s)
            env *= 0.5 - 0.5 * std::cos(std::numbers::pi * t / profile.attack_s);
        const double remaining = duration - t;
        if (profile.release_s > 0.0 && remaining < profile.release_s)
            env *= 0.5 - 0.5 * std::cos(std::numbers::pi * std::max(0.0, remaining) / profile.release_s);
        env *= 1.0 + profile.drift_depth * std::sin(2.0 * std::numbers::pi * profile.drift_hz * t + drift_phase);
        signal[i] *= env;
    }

    double peak = 0.0;
    for (double v : signal)
        peak = std::max(peak, std::abs(v));
    if (peak > 0.0)
        for (double& v : signal)
            v *= 0.9 / peak;

    AudioSignal out;
    out.samples = std::move(signal);
    out.sample_rate = sample_rate;
    return out;
}

/// Composition and per-subject variation of a synthetic corpus.
/// Default counts: 11 male and 12 female choir singers, 14 male and 13
/// female non-singers.
struct CorpusSpec {
    std::size_t male_singers = 11;
    std::size_t female_singers = 12;
    std::size_t male_non_singers = 14;
    std::size_t female_non_singers = 13;
    std::size_t takes_per_scale = 1;
    double duration = 1.5;
    double sample_rate = 48000.0;

    double decay_min = 1.6, decay_max = 2.4;
    double jitter_min = 0.002, jitter_max = 0.010;
    double noise_min = 0.01, noise_max = 0.05;  // log-uniform

    double chest_hz = 170.0, chest_bandwidth = 70.0, chest_gain = 45.0;  // men only
    double male_formant_hz = 3000.0, male_formant_bandwidth = 250.0, male_formant_gain = 150.0;
    double female_formant_hz = 10000.0, female_formant_bandwidth = 700.0, female_formant_gain = 150.0;
    double formant_gain_spread = 2.2;  // log-sd of the singer resonance gain across subjects
};

inline nlohmann::json to_json(const CorpusSpec& s) {
    return {{"male_singers", s.male_singers},
            {"female_singers", s.female_singers},
            {"male_non_singers", s.male_non_singers},
            {"female_non_singers", s.female_non_singers},
            {"takes_per_scale", s.takes_per_scale},
            {"duration", s.duration},
            {"sample_rate", s.sample_rate},
            {"decay", {s.decay_min, s.decay_max}},
            {"jitter", {s.jitter_min, s.jitter_max}},
            {"noise", {s.noise_min, s.noise_max}},
            {"chest", {s.chest_hz, s.chest_bandwidth, s.chest_gain}},
            {"male_formant", {s.male_formant_hz, s.male_formant_bandwidth, s.male_formant_gain}},
            {"female_formant", {s.female_formant_hz, s.female_formant_bandwidth, s.female_formant_gain}},
            {"formant_gain_spread", s.formant_gain_spread}};
}

/// Voice of one subject, minus the note: fundamental is filled per take.
inline VoiceProfile draw_subject_profile(const CorpusSpec& spec, Gender gender, Choral choral, std::uint64_t seed) {
    Rng rng(seed);
    VoiceProfile p;
    p.gender = gender;
    p.choral = choral;
    p.harmonic_decay = rng.uniform(spec.decay_min, spec.decay_max);
    p.jitter = rng.uniform(spec.jitter_min, spec.jitter_max);
    p.noise_floor = std::exp(rng.uniform(std::log(spec.noise_min), std::log(spec.noise_max)));

    const bool male = gender == Gender::male;

    // /a/ vowel formants, same for both sexes, jittered per subject.
    const double f1 = 790.0 * (1.0 + 0.05 * rng.normal());
    const double f2 = 1150.0 * (1.0 + 0.05 * rng.normal());
    const double f3 = 2620.0 * (1.0 + 0.04 * rng.normal());
    p.formant_bumps.push_back({f1, 90.0, 8.0});
    p.formant_bumps.push_back({f2, 110.0, 5.0});
    p.formant_bumps.push_back({f3, 160.0, 2.0});
    if (male)
        p.formant_bumps.push_back({spec.chest_hz, spec.chest_bandwidth, spec.chest_gain});

    const double gain_draw = std::exp(spec.formant_gain_spread * rng.normal());
    const double centre_draw = rng.normal();
    if (choral == Choral::singer) {
        if (male)
            p.formant_bumps.push_back({spec.male_formant_hz * (1.0 + 0.03 * centre_draw), spec.male_formant_bandwidth,
                                       spec.male_formant_gain * gain_draw});
        else
            p.formant_bumps.push_back({spec.female_formant_hz * (1.0 + 0.03 * centre_draw),
                                       spec.female_formant_bandwidth, spec.female_formant_gain * gain_draw});
    }
    return p;
}

inline std::string subject_id(std::size_t index) {
    std::string digits = std::to_string(index + 1);
    return "subj" + std::string(digits.size() < 3 ? 3 - digits.size() : 0, '0') + digits;
}

inline std::uint64_t take_seed(std::uint64_t corpus_seed, const std::string& subject, std::size_t scale, std::size_t take) {
    return derive_seed(corpus_seed, subject, scale, take);
}

/// Deterministic corpus: same (spec, seed) gives bit-identical audio.
inline Corpus generate_corpus(const CorpusSpec& spec, std::uint64_t seed) {
    struct Group {
        std::size_t count;
        Gender gender;
        Choral choral;
    };
    const std::array<Group, 4> groups = {Group{spec.male_singers, Gender::male, Choral::singer},
                                         Group{spec.female_singers, Gender::female, Choral::singer},
                                         Group{spec.male_non_singers, Gender::male, Choral::non_singer},
                                         Group{spec.female_non_singers, Gender::female, Choral::non_singer}};
    Corpus corpus;
    std::vector<VoiceProfile> profiles;
    for (const auto& g : groups) {
        for (std::size_t i = 0; i < g.count; ++i) {
            Subject s;
            s.id = subject_id(corpus.subjects.size());
            s.gender = g.gender;
            s.choral = g.choral;
            profiles.push_back(draw_subject_profile(spec, g.gender, g.choral, derive_seed(seed, "subject", s.id)));
            corpus.subjects.push_back(std::move(s));
        }
    }

    struct Job {
        std::size_t subject, scale, take;
    };
    std::vector<Job> jobs;
    for (std::size_t s = 0; s < corpus.subjects.size(); ++s) {
        corpus.subjects[s].takes.resize(kScaleCount * spec.takes_per_scale);
        for (std::size_t sc = 0; sc < kScaleCount; ++sc)
            for (std::size_t t = 0; t < spec.takes_per_scale; ++t)
                jobs.push_back({s, sc, t});
    }
    parallel_blocks(jobs.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t k = b; k < e; ++k) {
            const Job& job = jobs[k];
            Subject& subj = corpus.subjects[job.subject];
            VoiceProfile profile = profiles[job.subject];
            profile.fundamental_hz = scale_fundamentals(subj.gender)[job.scale];
            Take& take = subj.takes[job.scale * spec.takes_per_scale + job.take];
            take.scale = job.scale;
            take.seed = take_seed(seed, subj.id, job.scale, job.take);
            take.path = subj.id + "/" + std::string(kScaleNames[job.scale]) +
                        (spec.takes_per_scale > 1 ? "_" + std::to_string(job.take) : "") + ".wav";
            take.audio = generate_take(profile, spec.duration, spec.sample_rate, *take.seed);
            // Snap to the 16-bit grid so the in-memory corpus equals its WAV files.
            for (double& v : take.audio.samples)
                v = pcm16_to_amplitude(amplitude_to_pcm16(v));
        }
    });

    nlohmann::json prov = {{"generator", "voxclass-synth"},
                           {"generator_version", kGeneratorVersion},
                           {"seed", seed},
                           {"spec", to_json(spec)}};
    corpus.provenance = prov.dump();
    return corpus;
}

}  // namespace voxclass
