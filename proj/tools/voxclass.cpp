// voxclass: synthesize corpora, train models, classify recordings and run
// the cross-validation experiments.
//
// Exit codes: 0 ok, 1 usage, 2 I/O or format, 3 data or model.
// VOXCLASS_LOG=quiet|info|debug controls stderr chatter (default info).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "voxclass/voxclass.hpp"

namespace fs = std::filesystem;
using namespace voxclass;
using nlohmann::json;

namespace {

enum class Verbosity { quiet, info, debug };

Verbosity verbosity() {
    const char* v = std::getenv("VOXCLASS_LOG");
    if (v == nullptr)
        return Verbosity::info;
    const std::string s(v);
    if (s == "quiet" || s == "0")
        return Verbosity::quiet;
    if (s == "debug" || s == "2")
        return Verbosity::debug;
    return Verbosity::info;
}

void info(const std::string& msg) {
    if (verbosity() != Verbosity::quiet)
        std::cerr << msg << '\n';
}

void debug(const std::string& msg) {
    if (verbosity() == Verbosity::debug)
        std::cerr << msg << '\n';
}

// "3", "1..8", "1,2,4" or mixtures like "1..3,8"
std::vector<std::size_t> parse_d_list(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string part;
    auto number = [&](const std::string& s) -> std::size_t {
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != s.size())
            throw CLI::ValidationError("--d", "bad dimension '" + s + "'");
        return static_cast<std::size_t>(v);
    };
    while (std::getline(ss, part, ',')) {
        const auto dots = part.find("..");
        if (dots == std::string::npos) {
            out.push_back(number(part));
        } else {
            const std::size_t lo = number(part.substr(0, dots));
            const std::size_t hi = number(part.substr(dots + 2));
            if (hi < lo)
                throw CLI::ValidationError("--d", "empty range '" + part + "'");
            for (std::size_t d = lo; d <= hi; ++d)
                out.push_back(d);
        }
    }
    if (out.empty())
        throw CLI::ValidationError("--d", "no dimensions given");
    for (std::size_t d : out)
        if (d == 0)
            throw CLI::ValidationError("--d", "D must be at least 1");
    return out;
}

std::vector<double> parse_durations(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(part, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != part.size() || !(v > 0.0))
            throw CLI::ValidationError("--durations", "bad duration '" + part + "'");
        out.push_back(v);
    }
    if (out.empty())
        throw CLI::ValidationError("--durations", "no durations given");
    return out;
}

void check_parent_exists(const fs::path& out) {
    const fs::path parent = out.parent_path().empty() ? fs::path(".") : out.parent_path();
    if (!fs::is_directory(parent))
        throw IoError("output directory " + parent.string() + " does not exist");
}

void check_input_file(const fs::path& in) {
    if (!fs::is_regular_file(in))
        throw IoError("cannot read " + in.string());
}

std::ofstream open_output(const fs::path& out) {
    check_parent_exists(out);
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    if (!f)
        throw IoError("cannot write " + out.string());
    return f;
}

struct Common {
    std::string manifest;
    std::string task = "gender";
    std::string population = "all";
    std::string d_text = "2";
    std::uint64_t seed = 1;
    std::string out;
    std::size_t mc_samples = 2000;
    double epsilon = 1e-6;
    std::size_t restarts = 3;
    std::size_t max_passes = 10;
    std::size_t stride = 1;
    std::string risk = "monte_carlo";
    std::string feature_scale = "log";
};

void add_selector_flags(CLI::App* cmd, Common& c) {
    cmd->add_option("--seed", c.seed, "Root seed for every random stream")->capture_default_str();
    cmd->add_option("--mc-samples", c.mc_samples, "Monte Carlo draws per risk estimate")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--epsilon", c.epsilon, "Covariance ridge, relative to the mean within-class variance")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    cmd->add_option("--restarts", c.restarts, "Selector restarts")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--max-passes", c.max_passes, "Coordinate-descent passes per restart")->capture_default_str();
    cmd->add_option("--stride", c.stride, "Coarse scan stride (1 = exhaustive)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--risk", c.risk, "Risk estimator")
        ->check(CLI::IsMember({"monte_carlo", "empirical"}))
        ->capture_default_str();
    cmd->add_option("--feature-scale", c.feature_scale, "Feature scale")
        ->check(CLI::IsMember({"log", "linear"}))
        ->capture_default_str();
}

EvalConfig eval_config(const Common& c) {
    EvalConfig e;
    e.select.seed = c.seed;
    e.select.mc_samples = c.mc_samples;
    e.select.ridge_relative = c.epsilon;
    e.select.restarts = c.restarts;
    e.select.max_passes = c.max_passes;
    e.select.stride = c.stride;
    e.select.mode = parse_risk_mode(c.risk);
    e.feature_scale = parse_feature_scale(c.feature_scale);
    return e;
}

SpectralCorpus load_spectral(const std::string& manifest) {
    check_input_file(manifest);
    const Corpus corpus = load_corpus(manifest);
    info("loaded " + std::to_string(corpus.subjects.size()) + " subjects, " + std::to_string(corpus.take_count()) +
         " recordings");
    return analyze_corpus(corpus, SpectralConfig{});
}

// ---------------------------------------------------------------------------

int cmd_synth(const fs::path& out_dir, std::uint64_t seed, const CorpusSpec& spec) {
    const fs::path parent = out_dir.parent_path().empty() ? fs::path(".") : out_dir.parent_path();
    if (!fs::is_directory(parent))
        throw IoError("parent directory " + parent.string() + " does not exist");
    const Corpus corpus = generate_corpus(spec, seed);
    const fs::path manifest = write_corpus(out_dir, corpus);
    std::cout << "subjects=" << corpus.subjects.size() << " recordings=" << corpus.take_count()
              << " manifest=" << manifest.string() << '\n';
    return 0;
}

int cmd_train(const Common& c, const std::string& freq_out) {
    const std::size_t d = parse_d_list(c.d_text).front();
    if (parse_d_list(c.d_text).size() != 1)
        throw CLI::ValidationError("--d", "train takes a single D");
    const Task task = parse_task(c.task);
    const Population population = parse_population(c.population);
    const fs::path model_path = c.out.empty() ? fs::path(std::string(to_string(task)) + ".model.json") : fs::path(c.out);
    fs::path freq_path = freq_out;
    if (freq_path.empty()) {
        freq_path = model_path;
        std::string stem = model_path.filename().string();
        const std::string suffix = ".model.json";
        if (stem.size() > suffix.size() && stem.ends_with(suffix))
            stem.resize(stem.size() - suffix.size());
        else
            stem = model_path.stem().string();
        freq_path.replace_filename(stem + ".frequencies.csv");
    }
    check_parent_exists(model_path);
    check_parent_exists(freq_path);

    const SpectralCorpus corpus = load_spectral(c.manifest);
    const TrainedModel trained = train_task(corpus, task, population, d, eval_config(c));
    save_model(model_path, trained.model);
    auto f = open_output(freq_path);
    f << "# config: " << trained.model.info().config << '\n';
    write_selection_csv(f, *trained.selection);
    if (!f)
        throw IoError("short write to " + freq_path.string());

    std::cout << "task=" << to_string(task) << " D=" << d << " risk=" << trained.selection->risk.risk
              << " frequencies_hz=";
    const auto hz = trained.model.info().frequencies.frequencies_hz();
    for (std::size_t i = 0; i < hz.size(); ++i)
        std::cout << (i ? ";" : "") << hz[i];
    std::cout << " model=" << model_path.string() << '\n';
    return 0;
}

int cmd_classify(const std::string& model_path, const std::vector<std::string>& files) {
    check_input_file(model_path);
    const ClassModel model = load_model(model_path);
    SpectrumAnalyzer analyzer(model.info().spectral.window, model.info().spectral.kind);
    int status = 0;
    for (const auto& path : files) {
        json rec = {{"path", path}, {"task", to_string(model.info().task)}};
        try {
            const AudioSignal audio = read_wav(path);
            const auto segments = analyze_recording(audio, model.info().spectral, &analyzer);
            const Posterior post = classify_segments(model, segments);
            json probs = json::object();
            for (std::size_t k = 0; k < post.probs.size(); ++k)
                probs[model.info().labels[k]] = post.probs[k];
            rec["probabilities"] = probs;
            rec["label"] = model.info().labels[map_class(post)];
            rec["segments"] = segments.size();
        } catch (const SilenceError& e) {
            rec["error"] = "silence";
            rec["message"] = e.what();
            status = std::max(status, 3);
        } catch (const IoError& e) {
            rec["error"] = "io";
            rec["message"] = e.what();
            status = std::max(status, 2);
        } catch (const FormatError& e) {
            rec["error"] = "format";
            rec["message"] = e.what();
            status = std::max(status, 2);
        } catch (const UnsupportedError& e) {
            rec["error"] = "unsupported";
            rec["message"] = e.what();
            status = std::max(status, 2);
        } catch (const Error& e) {
            rec["error"] = "data";
            rec["message"] = e.what();
            status = std::max(status, 3);
        }
        std::cout << rec.dump() << '\n';
    }
    return status;
}

struct EvaluateArgs {
    std::string mode = "optimized";
    std::string ordering;
    std::string durations;
    std::size_t folds = 20;
    std::string aggregation = "mean";
    bool shuffle = false;
};

int cmd_evaluate(const Common& c, const EvaluateArgs& a) {
    const auto ds = parse_d_list(c.d_text);
    const Task task = parse_task(c.task);
    Population population = parse_population(c.population);
    std::vector<SelectionMode> modes;
    if (a.mode == "both")
        modes = {SelectionMode::optimized, SelectionMode::random};
    else
        modes = {parse_selection_mode(a.mode)};
    std::optional<Ordering> ordering;
    if (!a.ordering.empty()) {
        ordering = parse_ordering(a.ordering);
        if (task != Task::joint)
            throw CLI::ValidationError("--ordering", "orderings apply to --task joint only");
    }
    std::vector<double> durations;
    if (!a.durations.empty())
        durations = parse_durations(a.durations);
    if (ordering && !durations.empty())
        throw CLI::ValidationError("--durations", "cannot combine --ordering and --durations");
    if (a.folds == 0)
        throw CLI::ValidationError("--folds", "need at least one fold");

    std::optional<std::ofstream> file;
    if (!c.out.empty())
        file = open_output(c.out);
    std::ostream& out = file ? static_cast<std::ostream&>(*file) : std::cout;

    const SpectralCorpus corpus = load_spectral(c.manifest);
    EvalConfig cfg = eval_config(c);
    cfg.aggregation = a.aggregation == "vote" ? Aggregation::vote : Aggregation::mean_posterior;
    cfg.shuffle_labels = a.shuffle;
    const FoldSpec fold = default_fold(task, population, c.seed, a.folds);
    validate(fold, corpus);

    const bool with_variant = ordering.has_value() || !durations.empty();
    const json effective = {{"command", "evaluate"},
                            {"task", c.task},
                            {"population", to_string(fold.population)},
                            {"d", ds},
                            {"mode", a.mode},
                            {"ordering", a.ordering},
                            {"durations", durations},
                            {"fold", to_json(fold)},
                            {"select", to_json(cfg.select)},
                            {"feature_scale", to_string(cfg.feature_scale)},
                            {"aggregation", a.aggregation},
                            {"shuffle_labels", a.shuffle},
                            {"spectral", to_json(corpus.config)}};
    out << "# config: " << effective.dump() << '\n';
    write_report_header(out, with_variant);
    for (std::size_t d : ds) {
        for (SelectionMode mode : modes) {
            std::vector<PerformanceReport> reports;
            if (ordering)
                reports.push_back(infer_joint(corpus, fold, d, *ordering, cfg, mode));
            else if (!durations.empty())
                reports = duration_sweep(corpus, fold, d, durations, cfg, mode);
            else
                reports.push_back(cross_validate(corpus, fold, d, mode, cfg));
            for (const auto& r : reports) {
                write_report_row(out, r, with_variant);
                if (r.skipped_folds > 0)
                    info("D=" + std::to_string(d) + ": skipped " + std::to_string(r.skipped_folds) + " folds");
            }
            out.flush();
            debug("done D=" + std::to_string(d) + " mode=" + std::string(to_string(mode)));
        }
    }
    if (file && !*file)
        throw IoError("short write to " + c.out);
    return 0;
}

int cmd_correlate(const Common& c, const std::string& scores_path, std::size_t folds) {
    const std::size_t d = parse_d_list(c.d_text).front();
    check_input_file(scores_path);
    std::ifstream in(scores_path);
    const auto scores = parse_scores(in);
    std::optional<std::ofstream> file;
    if (!c.out.empty())
        file = open_output(c.out);

    const SpectralCorpus corpus = load_spectral(c.manifest);
    const EvalConfig cfg = eval_config(c);
    const FoldSpec fold = default_fold(Task::choral, parse_population(c.population), c.seed, folds);
    const auto probs = cross_validated_singer_probability(corpus, fold, d, cfg);
    const Correlation r = correlate_scores(probs, scores);

    if (file) {
        const json effective = {{"command", "correlate"}, {"d", d}, {"fold", to_json(fold)}, {"select", to_json(cfg.select)}};
        *file << "# config: " << effective.dump() << '\n';
        *file << "subject_id,p_singer,score\n";
        file->precision(17);
        for (const auto& [id, p] : probs)
            *file << id << ',' << p << ',' << scores.at(id) << '\n';
    }
    std::cout << "n=" << r.n << " pearson=" << r.pearson << " spearman=" << r.spearman << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Voice-quality classification from probe frequencies"};
    app.require_subcommand(1);

    Common common;
    CorpusSpec spec;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic labelled corpus");
    synth->add_option("--out", synth_out, "Corpus directory")->required();
    synth->add_option("--seed", common.seed, "Corpus seed")->capture_default_str();
    synth->add_option("--duration", spec.duration, "Seconds per recording")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    synth->add_option("--takes", spec.takes_per_scale, "Recordings per scale and subject")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    std::string freq_out;
    auto* train = app.add_subcommand("train", "Select frequencies and fit a model on a whole corpus");
    train->add_option("--manifest", common.manifest, "Corpus manifest")->required();
    train->add_option("--task", common.task, "Task")
        ->check(CLI::IsMember({"scale", "gender", "choral", "joint"}))
        ->capture_default_str();
    train->add_option("--population", common.population, "Subject subset")
        ->check(CLI::IsMember({"all", "singers", "male", "female"}))
        ->capture_default_str();
    train->add_option("--d", common.d_text, "Number of probe frequencies")->capture_default_str();
    train->add_option("--out", common.out, "Model file (default TASK.model.json)");
    train->add_option("--frequencies-out", freq_out, "Selected-frequency CSV (default next to the model)");
    add_selector_flags(train, common);

    std::string model_path;
    std::vector<std::string> wavs;
    auto* classify = app.add_subcommand("classify", "Classify WAV files with a trained model");
    classify->add_option("--model", model_path, "Model file")->required();
    classify->add_option("files", wavs, "WAV files")->required();

    EvaluateArgs eval_args;
    auto* evaluate = app.add_subcommand("evaluate", "Cross-validated accuracy tables (CSV)");
    evaluate->add_option("--manifest", common.manifest, "Corpus manifest")->required();
    evaluate->add_option("--task", common.task, "Task")
        ->check(CLI::IsMember({"scale", "gender", "choral", "joint"}))
        ->capture_default_str();
    evaluate->add_option("--population", common.population, "Subject subset")
        ->check(CLI::IsMember({"all", "singers", "male", "female"}))
        ->capture_default_str();
    evaluate->add_option("--d", common.d_text, "D values: 3, 1..8 or 1,2,4")->capture_default_str();
    evaluate->add_option("--mode", eval_args.mode, "Frequency choice")
        ->check(CLI::IsMember({"optimized", "random", "both"}))
        ->capture_default_str();
    evaluate->add_option("--ordering", eval_args.ordering, "Joint-inference ordering")
        ->check(CLI::IsMember({"independent", "sn-mf", "mf-sn", "joint"}));
    evaluate->add_option("--durations", eval_args.durations, "Analysis durations in seconds, comma separated");
    evaluate->add_option("--folds", eval_args.folds, "Random subject splits")->capture_default_str();
    evaluate->add_option("--aggregation", eval_args.aggregation, "Per-recording aggregation")
        ->check(CLI::IsMember({"mean", "vote"}))
        ->capture_default_str();
    evaluate->add_flag("--shuffle-labels", eval_args.shuffle, "Permutation test: shuffle subject labels per fold");
    evaluate->add_option("--out", common.out, "CSV output (default stdout)");
    add_selector_flags(evaluate, common);

    std::string scores_path;
    std::size_t corr_folds = 20;
    auto* correlate = app.add_subcommand("correlate", "Correlate held-out P(singer) with external ratings");
    correlate->add_option("--manifest", common.manifest, "Corpus manifest")->required();
    correlate->add_option("--scores", scores_path, "subject_id,score file")->required();
    correlate->add_option("--population", common.population, "Subject subset")
        ->check(CLI::IsMember({"all", "male", "female"}))
        ->capture_default_str();
    correlate->add_option("--d", common.d_text, "Number of probe frequencies")->capture_default_str();
    correlate->add_option("--folds", corr_folds, "Random subject splits")->capture_default_str();
    correlate->add_option("--out", common.out, "Per-subject CSV");
    add_selector_flags(correlate, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*synth)
            return cmd_synth(synth_out, common.seed, spec);
        if (*train)
            return cmd_train(common, freq_out);
        if (*classify)
            return cmd_classify(model_path, wavs);
        if (*evaluate)
            return cmd_evaluate(common, eval_args);
        if (*correlate)
            return cmd_correlate(common, scores_path, corr_folds);
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << '\n';
        return 2;
    } catch (const UnsupportedError& e) {
        std::cerr << "unsupported input: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 3;
    }
    return 1;
}
