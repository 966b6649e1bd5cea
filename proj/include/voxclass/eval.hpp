#pragma once

// Subject-level cross-validation of the whole pipeline.
//
// Every fold splits SUBJECTS, never takes: all of a subject's recordings
// sit on one side. Frequency selection and model fitting see only the
// training subjects. A test recording is classified by averaging the
// per-segment posteriors of its loudest segments and taking the MAP class;
// fold accuracy is the fraction of test recordings classified correctly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "corpus.hpp"
#include "error.hpp"
#include "frequency_set.hpp"
#include "gda.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "riskopt.hpp"
#include "spectra.hpp"
#include "tasks.hpp"

namespace voxclass {

// ---------------------------------------------------------------------------
// Spectral view of a corpus

struct TakeSpectra {
    std::size_t scale = 0;
    std::vector<LogSpectrum> segments;  // loudest segments, temporal order
};

struct SubjectSpectra {
    std::string id;
    Gender gender = Gender::male;
    Choral choral = Choral::singer;
    std::vector<TakeSpectra> takes;

    int label(Task task, std::size_t scale) const {
        switch (task) {
            case Task::scale: return static_cast<int>(scale);
            case Task::gender: return static_cast<int>(gender);
            case Task::choral: return static_cast<int>(choral);
            case Task::joint: return joint_index(gender, choral);
        }
        return 0;
    }
};

struct SpectralCorpus {
    SpectralConfig config;
    std::vector<SubjectSpectra> subjects;
};

inline SpectralCorpus analyze_corpus(const Corpus& corpus, const SpectralConfig& config) {
    SpectralCorpus out;
    out.config = config;
    out.subjects.resize(corpus.subjects.size());
    parallel_blocks(corpus.subjects.size(), [&](std::size_t b, std::size_t e) {
        SpectrumAnalyzer analyzer(config.window, config.kind);
        for (std::size_t i = b; i < e; ++i) {
            const Subject& s = corpus.subjects[i];
            SubjectSpectra& dst = out.subjects[i];
            dst.id = s.id;
            dst.gender = s.gender;
            dst.choral = s.choral;
            for (const Take& t : s.takes) {
                try {
                    dst.takes.push_back({t.scale, analyze_recording(t.audio, config, &analyzer)});
                } catch (const SilenceError& err) {
                    throw SilenceError(t.path + ": " + err.what());
                } catch (const InsufficientAudioError& err) {
                    throw InsufficientAudioError(t.path + ": " + err.what());
                }
            }
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Fold layout

enum class Population { all, singers, male, female };

inline std::string_view to_string(Population p) {
    switch (p) {
        case Population::all: return "all";
        case Population::singers: return "singers";
        case Population::male: return "male";
        case Population::female: return "female";
    }
    return "?";
}

inline Population parse_population(std::string_view s) {
    if (s == "all") return Population::all;
    if (s == "singers") return Population::singers;
    if (s == "male") return Population::male;
    if (s == "female") return Population::female;
    throw ConfigError("unknown population '" + std::string(s) + "'");
}

inline bool in_population(const SubjectSpectra& s, Population p) {
    switch (p) {
        case Population::all: return true;
        case Population::singers: return s.choral == Choral::singer;
        case Population::male: return s.gender == Gender::male;
        case Population::female: return s.gender == Gender::female;
    }
    return false;
}

/// Which subject attribute balances the test draw.
enum class Stratify { none, gender, choral, joint };

struct FoldSpec {
    Task task = Task::gender;
    Population population = Population::all;
    Stratify stratify = Stratify::gender;
    std::vector<std::size_t> n_test_per_stratum = {5, 5};
    std::size_t n_repeats = 20;
    std::uint64_t seed = 1;
};

/// Test draws used for each experiment: 5 of the 23 singers for the scale
/// task, 5 + 5 per class for gender and choral status, 3 + 3 within one
/// gender, and 3 per joint class for the four-way label.
inline FoldSpec default_fold(Task task, Population population = Population::all, std::uint64_t seed = 1,
                             std::size_t repeats = 20) {
    FoldSpec f;
    f.task = task;
    f.population = population;
    f.seed = seed;
    f.n_repeats = repeats;
    switch (task) {
        case Task::scale:
            if (population == Population::all)
                f.population = Population::singers;
            f.stratify = Stratify::none;
            f.n_test_per_stratum = {5};
            break;
        case Task::gender:
            f.stratify = Stratify::gender;
            f.n_test_per_stratum = {5, 5};
            break;
        case Task::choral:
            f.stratify = Stratify::choral;
            f.n_test_per_stratum = population == Population::all ? std::vector<std::size_t>{5, 5}
                                                                 : std::vector<std::size_t>{3, 3};
            break;
        case Task::joint:
            f.stratify = Stratify::joint;
            f.n_test_per_stratum = {3, 3, 3, 3};
            break;
    }
    return f;
}

struct Split {
    std::vector<std::size_t> train;  // indices into SpectralCorpus::subjects
    std::vector<std::size_t> test;
};

namespace detail {

inline std::size_t stratum_count(Stratify s) {
    switch (s) {
        case Stratify::none: return 1;
        case Stratify::gender: return 2;
        case Stratify::choral: return 2;
        case Stratify::joint: return 4;
    }
    return 1;
}

inline std::size_t stratum_of(Stratify s, Gender g, Choral c) {
    switch (s) {
        case Stratify::none: return 0;
        case Stratify::gender: return static_cast<std::size_t>(g);
        case Stratify::choral: return static_cast<std::size_t>(c);
        case Stratify::joint: return static_cast<std::size_t>(joint_index(g, c));
    }
    return 0;
}

}  // namespace detail

/// Per-subject labels as seen by one fold; differs from the corpus only
/// when labels are shuffled for a permutation test.
struct SubjectLabels {
    std::vector<Gender> gender;
    std::vector<Choral> choral;
    std::vector<std::vector<std::size_t>> scales;  // per take
};

inline SubjectLabels true_labels(const SpectralCorpus& corpus) {
    SubjectLabels l;
    for (const auto& s : corpus.subjects) {
        l.gender.push_back(s.gender);
        l.choral.push_back(s.choral);
        std::vector<std::size_t> sc;
        for (const auto& t : s.takes)
            sc.push_back(t.scale);
        l.scales.push_back(std::move(sc));
    }
    return l;
}

inline int label_of(const SubjectLabels& l, Task task, std::size_t subject, std::size_t take) {
    switch (task) {
        case Task::scale: return static_cast<int>(l.scales[subject][take]);
        case Task::gender: return static_cast<int>(l.gender[subject]);
        case Task::choral: return static_cast<int>(l.choral[subject]);
        case Task::joint: return joint_index(l.gender[subject], l.choral[subject]);
    }
    return 0;
}

/// Permute labels among the subjects in `members` (and scale labels among
/// each subject's takes).
inline SubjectLabels shuffled_labels(const SpectralCorpus& corpus, std::span<const std::size_t> members, Rng& rng) {
    SubjectLabels l = true_labels(corpus);
    std::vector<std::pair<Gender, Choral>> attrs;
    for (std::size_t i : members)
        attrs.emplace_back(l.gender[i], l.choral[i]);
    rng.shuffle(std::span(attrs));
    for (std::size_t k = 0; k < members.size(); ++k) {
        l.gender[members[k]] = attrs[k].first;
        l.choral[members[k]] = attrs[k].second;
        rng.shuffle(std::span(l.scales[members[k]]));
    }
    return l;
}

inline std::vector<std::size_t> population_members(const SpectralCorpus& corpus, Population p) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < corpus.subjects.size(); ++i)
        if (in_population(corpus.subjects[i], p))
            out.push_back(i);
    return out;
}

/// Random stratified subject split for repeat `repeat` of the fold spec.
inline Split make_split(const SpectralCorpus& corpus, const FoldSpec& fold, std::size_t repeat,
                        const SubjectLabels& labels) {
    const std::size_t n_strata = detail::stratum_count(fold.stratify);
    if (fold.n_test_per_stratum.size() != n_strata)
        throw ConfigError("fold spec lists " + std::to_string(fold.n_test_per_stratum.size()) +
                          " test counts for " + std::to_string(n_strata) + " strata");
    std::vector<std::vector<std::size_t>> strata(n_strata);
    for (std::size_t i : population_members(corpus, fold.population))
        strata[detail::stratum_of(fold.stratify, labels.gender[i], labels.choral[i])].push_back(i);

    Rng rng(derive_seed(fold.seed, "split", repeat));
    Split split;
    for (std::size_t s = 0; s < n_strata; ++s) {
        auto& members = strata[s];
        if (fold.n_test_per_stratum[s] >= members.size())
            throw ConfigError("fold asks for " + std::to_string(fold.n_test_per_stratum[s]) +
                              " test subjects from a stratum of " + std::to_string(members.size()));
        rng.shuffle(std::span(members));
        split.test.insert(split.test.end(), members.begin(),
                          members.begin() + static_cast<std::ptrdiff_t>(fold.n_test_per_stratum[s]));
        split.train.insert(split.train.end(), members.begin() + static_cast<std::ptrdiff_t>(fold.n_test_per_stratum[s]),
                           members.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

inline void validate(const FoldSpec& fold, const SpectralCorpus& corpus) {
    (void)make_split(corpus, fold, 0, true_labels(corpus));
}

// ---------------------------------------------------------------------------
// Configuration and reports

enum class SelectionMode { optimized, random };

inline std::string_view to_string(SelectionMode m) { return m == SelectionMode::optimized ? "optimized" : "random"; }

inline SelectionMode parse_selection_mode(std::string_view s) {
    if (s == "optimized") return SelectionMode::optimized;
    if (s == "random") return SelectionMode::random;
    throw ConfigError("unknown selection mode '" + std::string(s) + "'");
}

enum class Aggregation { mean_posterior, vote };

struct EvalConfig {
    SelectConfig select{};
    FeatureScale feature_scale = FeatureScale::log;
    Aggregation aggregation = Aggregation::mean_posterior;
    bool shuffle_labels = false;  // permutation test
};

inline nlohmann::json to_json(const SpectralConfig& c) {
    return {{"delta", c.delta},
            {"top_segments", c.top_segments},
            {"f_min", c.f_min},
            {"f_max", c.f_max},
            {"bin_width", c.bin_width},
            {"window", to_string(c.window)},
            {"kind", to_string(c.kind)},
            {"floor_ratio", c.floor_ratio},
            {"grid", {{"n_points", c.grid.n_points}, {"log_f_lo", c.grid.log_f_lo}, {"log_f_hi", c.grid.log_f_hi}}}};
}

inline SpectralConfig spectral_config_from_json(const nlohmann::json& j) {
    SpectralConfig c;
    c.delta = j.at("delta").get<double>();
    c.top_segments = j.at("top_segments").get<std::size_t>();
    c.f_min = j.at("f_min").get<double>();
    c.f_max = j.at("f_max").get<double>();
    c.bin_width = j.at("bin_width").get<double>();
    c.window = parse_window(j.at("window").get<std::string>());
    c.kind = parse_spectrum_kind(j.at("kind").get<std::string>());
    c.floor_ratio = j.at("floor_ratio").get<double>();
    const auto& g = j.at("grid");
    c.grid.n_points = g.at("n_points").get<std::size_t>();
    c.grid.log_f_lo = g.at("log_f_lo").get<double>();
    c.grid.log_f_hi = g.at("log_f_hi").get<double>();
    return c;
}

inline nlohmann::json to_json(const SelectConfig& c) {
    return {{"mc_samples", c.mc_samples}, {"seed", c.seed},         {"tol", c.tol},
            {"max_passes", c.max_passes}, {"restarts", c.restarts}, {"stride", c.stride},
            {"mode", to_string(c.mode)},  {"ridge_relative", c.ridge_relative}};
}

inline nlohmann::json to_json(const FoldSpec& f) {
    return {{"task", to_string(f.task)},
            {"population", to_string(f.population)},
            {"n_test_per_stratum", f.n_test_per_stratum},
            {"n_repeats", f.n_repeats},
            {"seed", f.seed}};
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << v;
    return os.str();
}

struct PerformanceReport {
    Task task = Task::gender;
    Population population = Population::all;
    std::size_t d = 0;
    SelectionMode mode = SelectionMode::optimized;
    std::string variant;  // ordering or duration, when applicable
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;  // sample standard deviation over folds
    std::vector<double> fold_accuracies;
    std::vector<std::vector<FrequencySet>> frequency_sets;  // per fold, one per model
    std::size_t skipped_folds = 0;
    std::string fingerprint;

    std::size_t n_folds() const { return fold_accuracies.size(); }
};

inline void summarize(PerformanceReport& r) {
    const std::size_t n = r.fold_accuracies.size();
    r.mean_accuracy = n ? std::accumulate(r.fold_accuracies.begin(), r.fold_accuracies.end(), 0.0) / static_cast<double>(n) : 0.0;
    double ss = 0.0;
    for (double a : r.fold_accuracies)
        ss += (a - r.mean_accuracy) * (a - r.mean_accuracy);
    r.std_accuracy = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
}

// ---------------------------------------------------------------------------
// Training and classification helpers

/// Training set of all segments of the given subjects, labelled for `task`.
/// `keep` optionally restricts subjects further (e.g. by true first-stage label).
template <typename Keep>
TrainingSet build_training_set(const SpectralCorpus& corpus, std::span<const std::size_t> subjects, Task task,
                               const SubjectLabels& labels, FeatureScale scale, Keep&& keep) {
    std::vector<LogSpectrum> spectra;
    std::vector<int> y;
    for (std::size_t s : subjects) {
        if (!keep(s))
            continue;
        const auto& subj = corpus.subjects[s];
        for (std::size_t t = 0; t < subj.takes.size(); ++t) {
            const int label = label_of(labels, task, s, t);
            for (const auto& seg : subj.takes[t].segments) {
                spectra.push_back(seg);
                y.push_back(label);
            }
        }
    }
    return TrainingSet(corpus.config.grid, spectra, y, task_cardinality(task), scale);
}

inline TrainingSet build_training_set(const SpectralCorpus& corpus, std::span<const std::size_t> subjects, Task task,
                                      const SubjectLabels& labels, FeatureScale scale) {
    return build_training_set(corpus, subjects, task, labels, scale, [](std::size_t) { return true; });
}

struct TrainedModel {
    ClassModel model;
    std::optional<SelectionResult> selection;
};

inline TrainedModel train_model(const TrainingSet& train, Task task, std::size_t d, SelectionMode mode,
                                const EvalConfig& config, std::uint64_t seed) {
    SelectConfig sc = config.select;
    sc.seed = seed;
    std::optional<SelectionResult> sel;
    FrequencySet freqs;
    if (mode == SelectionMode::optimized) {
        sel = select_frequencies(train, d, sc);
        freqs = sel->frequencies;
    } else {
        if (d >= train.min_class_size())
            throw InsufficientDataError("D exceeds the smallest class size");
        freqs = random_frequencies(d, seed, train.grid());
    }
    ModelInfo info;
    info.task = task;
    info.labels = task_labels(task);
    ClassModel model = train.fit_model(freqs, train.ridge(sc.ridge_relative), std::move(info));
    return {std::move(model), std::move(sel)};
}

/// Averaged posterior of a recording over its first `max_segments`
/// segments (0: all of them).
inline Posterior classify_segments(const ClassModel& model, std::span<const LogSpectrum> segments,
                                   std::size_t max_segments = 0, Aggregation agg = Aggregation::mean_posterior) {
    const std::size_t n = max_segments == 0 ? segments.size() : std::min(max_segments, segments.size());
    if (n == 0)
        throw InsufficientDataError("no segments to classify");
    std::vector<Posterior> posts;
    posts.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        posts.push_back(posterior(model, extract_features(segments[i], model.info().frequencies, model.info().feature_scale)));
    if (agg == Aggregation::mean_posterior)
        return average_posteriors(posts);
    std::vector<double> votes(model.n_classes(), 0.0);
    for (const auto& p : posts)
        votes[map_class(p)] += 1.0 / static_cast<double>(n);
    return Posterior{std::move(votes)};
}

inline std::size_t segments_for_duration(double duration, double delta) {
    if (!(duration >= delta - 1e-9))
        throw ConfigError("analysis duration " + std::to_string(duration) + " s is shorter than one segment");
    return static_cast<std::size_t>(std::ceil(duration / delta - 1e-9));
}

inline std::string fingerprint_of(const nlohmann::json& j) { return hex64(fnv1a64(j.dump())); }

// ---------------------------------------------------------------------------
// Cross-validation

namespace detail {

inline nlohmann::json run_fingerprint(const SpectralCorpus& corpus, const FoldSpec& fold, std::size_t d,
                                      std::string_view what, const EvalConfig& config) {
    return {{"what", what},
            {"fold", to_json(fold)},
            {"d", d},
            {"spectral", to_json(corpus.config)},
            {"select", to_json(config.select)},
            {"feature_scale", to_string(config.feature_scale)},
            {"aggregation", config.aggregation == Aggregation::mean_posterior ? "mean_posterior" : "vote"},
            {"shuffle_labels", config.shuffle_labels},
            {"subjects", corpus.subjects.size()}};
}

inline SubjectLabels fold_labels(const SpectralCorpus& corpus, const FoldSpec& fold, std::size_t repeat,
                                 const EvalConfig& config) {
    if (!config.shuffle_labels)
        return true_labels(corpus);
    Rng rng(derive_seed(fold.seed, "shuffle", repeat));
    const auto members = population_members(corpus, fold.population);
    return shuffled_labels(corpus, members, rng);
}

/// Accuracies at several segment budgets for one fitted model.
inline std::vector<double> score_split(const SpectralCorpus& corpus, const ClassModel& model, Task task,
                                       std::span<const std::size_t> test, const SubjectLabels& labels,
                                       std::span<const std::size_t> budgets, Aggregation agg) {
    std::vector<double> correct(budgets.size(), 0.0);
    std::size_t total = 0;
    for (std::size_t s : test) {
        const auto& subj = corpus.subjects[s];
        for (std::size_t t = 0; t < subj.takes.size(); ++t) {
            const int truth = label_of(labels, task, s, t);
            for (std::size_t b = 0; b < budgets.size(); ++b) {
                const auto post = classify_segments(model, subj.takes[t].segments, budgets[b], agg);
                if (static_cast<int>(map_class(post)) == truth)
                    correct[b] += 1.0;
            }
            ++total;
        }
    }
    for (double& c : correct)
        c = total ? c / static_cast<double>(total) : 0.0;
    return correct;
}

}  // namespace detail

/// Cross-validated accuracy at one segment budget per entry of `budgets`
/// (0 = all segments). Models are selected and fitted once per fold.
inline std::vector<PerformanceReport> cross_validate_budgets(const SpectralCorpus& corpus, const FoldSpec& fold,
                                                             std::size_t d, SelectionMode mode,
                                                             std::span<const std::size_t> budgets,
                                                             const EvalConfig& config = {}) {
    if (d == 0)
        throw ConfigError("D must be at least 1");
    validate(fold, corpus);
    const auto fp = fingerprint_of(detail::run_fingerprint(corpus, fold, d, to_string(mode), config));
    std::vector<PerformanceReport> reports(budgets.size());
    for (auto& r : reports) {
        r.task = fold.task;
        r.population = fold.population;
        r.d = d;
        r.mode = mode;
        r.fingerprint = fp;
    }
    for (std::size_t rep = 0; rep < fold.n_repeats; ++rep) {
        const SubjectLabels labels = detail::fold_labels(corpus, fold, rep, config);
        const Split split = make_split(corpus, fold, rep, labels);
        const TrainingSet train = build_training_set(corpus, split.train, fold.task, labels, config.feature_scale);
        const auto trained = train_model(train, fold.task, d, mode, config, derive_seed(fold.seed, "model", rep));
        const auto acc = detail::score_split(corpus, trained.model, fold.task, split.test, labels, budgets,
                                             config.aggregation);
        for (std::size_t b = 0; b < budgets.size(); ++b) {
            reports[b].fold_accuracies.push_back(acc[b]);
            reports[b].frequency_sets.push_back({trained.model.info().frequencies});
        }
    }
    for (auto& r : reports)
        summarize(r);
    return reports;
}

inline PerformanceReport cross_validate(const SpectralCorpus& corpus, const FoldSpec& fold, std::size_t d,
                                        SelectionMode mode, const EvalConfig& config = {}) {
    const std::size_t all[] = {0};
    return cross_validate_budgets(corpus, fold, d, mode, all, config).front();
}

/// Accuracy against analysis duration: for total duration T only the first
/// ceil(T / delta) loudest segments of each test recording are averaged.
inline std::vector<PerformanceReport> duration_sweep(const SpectralCorpus& corpus, const FoldSpec& fold, std::size_t d,
                                                     std::span<const double> durations, const EvalConfig& config = {},
                                                     SelectionMode mode = SelectionMode::optimized) {
    std::vector<std::size_t> budgets;
    for (double t : durations)
        budgets.push_back(segments_for_duration(t, corpus.config.delta));
    auto reports = cross_validate_budgets(corpus, fold, d, mode, budgets, config);
    for (std::size_t i = 0; i < reports.size(); ++i) {
        std::ostringstream os;
        os << durations[i];
        reports[i].variant = os.str();
    }
    return reports;
}

// ---------------------------------------------------------------------------
// Joint gender x choral inference

enum class Ordering { independent, sn_then_mf, mf_then_sn, simultaneous };

inline std::string_view to_string(Ordering o) {
    switch (o) {
        case Ordering::independent: return "independent";
        case Ordering::sn_then_mf: return "sn-mf";
        case Ordering::mf_then_sn: return "mf-sn";
        case Ordering::simultaneous: return "joint";
    }
    return "?";
}

inline Ordering parse_ordering(std::string_view s) {
    if (s == "independent") return Ordering::independent;
    if (s == "sn-mf" || s == "sn_then_mf") return Ordering::sn_then_mf;
    if (s == "mf-sn" || s == "mf_then_sn") return Ordering::mf_then_sn;
    if (s == "joint" || s == "simultaneous") return Ordering::simultaneous;
    throw ConfigError("unknown ordering '" + std::string(s) + "'");
}

/// Accuracy on the four-way (gender, choral) label under one of four
/// factorizations. Sequential orderings train the second stage on the TRUE
/// first-stage label of training subjects and apply the model matching the
/// INFERRED first-stage label at test time.
inline PerformanceReport infer_joint(const SpectralCorpus& corpus, const FoldSpec& fold, std::size_t d,
                                     Ordering ordering, const EvalConfig& config = {},
                                     SelectionMode mode = SelectionMode::optimized) {
    if (d == 0)
        throw ConfigError("D must be at least 1");
    validate(fold, corpus);
    PerformanceReport report;
    report.task = Task::joint;
    report.population = fold.population;
    report.d = d;
    report.mode = mode;
    report.variant = std::string(to_string(ordering));
    report.fingerprint = fingerprint_of(detail::run_fingerprint(corpus, fold, d, report.variant, config));

    for (std::size_t rep = 0; rep < fold.n_repeats; ++rep) {
        const SubjectLabels labels = detail::fold_labels(corpus, fold, rep, config);
        const Split split = make_split(corpus, fold, rep, labels);
        const std::uint64_t seed = derive_seed(fold.seed, "model", rep);
        auto train_on = [&](Task task, auto keep, std::string_view tag) {
            const TrainingSet ts = build_training_set(corpus, split.train, task, labels, config.feature_scale, keep);
            return train_model(ts, task, d, mode, config, derive_seed(seed, tag)).model;
        };
        auto everyone = [](std::size_t) { return true; };

        std::vector<ClassModel> models;
        try {
            switch (ordering) {
                case Ordering::independent:
                    models.push_back(train_on(Task::gender, everyone, "gender"));
                    models.push_back(train_on(Task::choral, everyone, "choral"));
                    break;
                case Ordering::simultaneous:
                    models.push_back(train_on(Task::joint, everyone, "joint"));
                    break;
                case Ordering::sn_then_mf:
                    models.push_back(train_on(Task::choral, everyone, "choral"));
                    for (Choral c : {Choral::singer, Choral::non_singer})
                        models.push_back(train_on(Task::gender, [&](std::size_t s) { return labels.choral[s] == c; },
                                                  c == Choral::singer ? "gender|S" : "gender|N"));
                    break;
                case Ordering::mf_then_sn:
                    models.push_back(train_on(Task::gender, everyone, "gender"));
                    for (Gender g : {Gender::male, Gender::female})
                        models.push_back(train_on(Task::choral, [&](std::size_t s) { return labels.gender[s] == g; },
                                                  g == Gender::male ? "choral|M" : "choral|F"));
                    break;
            }
        } catch (const InsufficientDataError&) {
            ++report.skipped_folds;
            continue;
        }

        std::size_t correct = 0, total = 0;
        for (std::size_t s : split.test) {
            const auto& subj = corpus.subjects[s];
            const int truth = joint_index(labels.gender[s], labels.choral[s]);
            for (const auto& take : subj.takes) {
                auto map_of = [&](const ClassModel& m) {
                    return map_class(classify_segments(m, take.segments, 0, config.aggregation));
                };
                int predicted = 0;
                switch (ordering) {
                    case Ordering::independent:
                        predicted = joint_index(static_cast<Gender>(map_of(models[0])),
                                                static_cast<Choral>(map_of(models[1])));
                        break;
                    case Ordering::simultaneous:
                        predicted = static_cast<int>(map_of(models[0]));
                        break;
                    case Ordering::sn_then_mf: {
                        const auto c = map_of(models[0]);
                        const auto g = map_of(models[1 + c]);
                        predicted = joint_index(static_cast<Gender>(g), static_cast<Choral>(c));
                        break;
                    }
                    case Ordering::mf_then_sn: {
                        const auto g = map_of(models[0]);
                        const auto c = map_of(models[1 + g]);
                        predicted = joint_index(static_cast<Gender>(g), static_cast<Choral>(c));
                        break;
                    }
                }
                correct += predicted == truth ? 1 : 0;
                ++total;
            }
        }
        report.fold_accuracies.push_back(total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0);
        std::vector<FrequencySet> sets;
        for (const auto& m : models)
            sets.push_back(m.info().frequencies);
        report.frequency_sets.push_back(std::move(sets));
    }
    summarize(report);
    return report;
}

// ---------------------------------------------------------------------------
// Correlation with external ratings

/// Mean P(singer | x) per subject over every recording of that subject
/// while it was held out. Subjects never drawn into a test set are absent.
inline std::map<std::string, double> cross_validated_singer_probability(const SpectralCorpus& corpus,
                                                                         const FoldSpec& fold, std::size_t d,
                                                                         const EvalConfig& config = {}) {
    if (fold.task != Task::choral)
        throw ConfigError("singer probabilities need a choral-task fold");
    validate(fold, corpus);
    std::map<std::string, std::pair<double, std::size_t>> acc;
    const SubjectLabels labels = true_labels(corpus);
    for (std::size_t rep = 0; rep < fold.n_repeats; ++rep) {
        const Split split = make_split(corpus, fold, rep, labels);
        const TrainingSet train = build_training_set(corpus, split.train, Task::choral, labels, config.feature_scale);
        const auto trained = train_model(train, Task::choral, d, SelectionMode::optimized, config,
                                         derive_seed(fold.seed, "model", rep));
        for (std::size_t s : split.test) {
            auto& slot = acc[corpus.subjects[s].id];
            for (const auto& take : corpus.subjects[s].takes) {
                slot.first += classify_segments(trained.model, take.segments, 0, config.aggregation)
                                  .probs[static_cast<std::size_t>(Choral::singer)];
                ++slot.second;
            }
        }
    }
    std::map<std::string, double> out;
    for (const auto& [id, v] : acc)
        out[id] = v.first / static_cast<double>(v.second);
    return out;
}

struct Correlation {
    double pearson = 0.0;
    double spearman = 0.0;
    std::size_t n = 0;
};

namespace detail {

inline double pearson(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0)
        return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

/// Ranks starting at 1, ties sharing their average rank.
inline std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]])
            ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace detail

/// Pearson and Spearman correlation between per-subject posteriors and
/// external scores. Both inputs must cover exactly the same subjects.
inline Correlation correlate_scores(const std::map<std::string, double>& posteriors,
                                    const std::map<std::string, double>& scores) {
    std::vector<std::string> missing;
    for (const auto& [id, _] : posteriors)
        if (!scores.contains(id))
            missing.push_back(id);
    for (const auto& [id, _] : scores)
        if (!posteriors.contains(id))
            missing.push_back(id);
    if (!missing.empty()) {
        std::string msg = "subject ids differ between posteriors and scores:";
        for (std::size_t i = 0; i < std::min<std::size_t>(missing.size(), 5); ++i)
            msg += " " + missing[i];
        throw JoinError(msg);
    }
    if (posteriors.size() < 3)
        throw InsufficientDataError("correlation needs at least 3 subjects");
    std::vector<double> x, y;
    for (const auto& [id, p] : posteriors) {
        x.push_back(p);
        y.push_back(scores.at(id));
    }
    Correlation c;
    c.n = x.size();
    c.pearson = detail::pearson(x, y);
    const auto rx = detail::average_ranks(x);
    const auto ry = detail::average_ranks(y);
    c.spearman = detail::pearson(rx, ry);
    return c;
}

/// `subject_id,score` lines; an optional header line and '#' comments allowed.
inline std::map<std::string, double> parse_scores(std::istream& in) {
    std::map<std::string, double> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view text = detail::trim(line);
        if (text.empty() || text.front() == '#')
            continue;
        if (line_no == 1 && text == "subject_id,score")
            continue;
        const auto fields = detail::split_csv_line(text);
        if (fields.size() != 2 || fields[0].empty())
            throw FormatError("score line " + std::to_string(line_no) + ": expected subject_id,score");
        double v = 0.0;
        try {
            std::size_t used = 0;
            v = std::stod(fields[1], &used);
            if (used != fields[1].size())
                throw FormatError("trailing characters");
        } catch (const std::exception&) {
            throw FormatError("score line " + std::to_string(line_no) + ": bad number '" + fields[1] + "'");
        }
        if (!out.emplace(fields[0], v).second)
            throw FormatError("score line " + std::to_string(line_no) + ": duplicate subject " + fields[0]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV output

inline void write_report_header(std::ostream& out, bool with_variant = false) {
    out << "task,D,mode,mean,std,n_folds";
    if (with_variant)
        out << ",variant";
    out << '\n';
}

inline void write_report_row(std::ostream& out, const PerformanceReport& r, bool with_variant = false) {
    std::ostringstream row;
    row.precision(17);
    row << to_string(r.task);
    if (r.population != Population::all && !(r.task == Task::scale && r.population == Population::singers))
        row << ':' << to_string(r.population);
    row << ',' << r.d << ',' << to_string(r.mode) << ',' << r.mean_accuracy << ',' << r.std_accuracy << ','
        << r.n_folds();
    if (with_variant)
        row << ',' << r.variant;
    out << row.str() << '\n';
}

}  // namespace voxclass
