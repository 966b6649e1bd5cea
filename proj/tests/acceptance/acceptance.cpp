// Acceptance run: one PASS/FAIL line per criterion, detail lines prefixed "  ".
// Exit status is the number of failed criteria (capped at 100).
//
// Synthetic corpus: default composition, seed 1. Cross-validation uses the
// default folds with restarts=1 to keep the whole run near half an hour on
// one core; full-corpus selections use the default selector settings.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "voxclass/voxclass.hpp"

using namespace voxclass;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kGdaRelTol = 1e-10;
constexpr double kGdaSeconds = 10;
constexpr double kPhiTol = 0.01;
constexpr std::size_t kPhiSamples = 100000;
constexpr double kPhiSeconds = 5;
constexpr double kSelectorSeconds = 60;
constexpr double kHarmonicTol = 0.03;
constexpr std::size_t kHarmonicMin = 6;
constexpr double kScaleSeconds = 600;
constexpr double kGenderMin = 0.95;
constexpr double kLowHz = 500;
constexpr std::size_t kFolds = 20;
constexpr double kDurationTol = 0.05;
constexpr std::size_t kShuffleRepeats = 50;
constexpr double kShuffleSigmas = 3;
constexpr double kAmplitudeTol = 1e-6;

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void verdict(int id, const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << " " << name << ": " << detail << std::endl;
    failures += !ok;
}

void note(const std::string& s) { std::cout << "  " << s << std::endl; }

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os << std::setprecision(prec) << v;
    return os.str();
}

EvalConfig cv_config() {
    EvalConfig c;
    c.select.restarts = 1;
    return c;
}

double brute_density(const GaussianClass& g, const Eigen::VectorXd& x) {
    const auto d = static_cast<double>(x.size());
    const Eigen::VectorXd diff = x - g.mean;
    const double q = diff.dot(g.covariance.inverse() * diff);
    return std::exp(-0.5 * q) / std::sqrt(std::pow(2 * std::numbers::pi, d) * g.covariance.determinant());
}

void criterion1() {
    const auto t0 = Clock::now();
    Rng rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto d = static_cast<Eigen::Index>(1 + rng.below(3));
        const std::size_t c = 2 + rng.below(3);
        std::vector<GaussianClass> cls(c);
        double psum = 0.0;
        for (auto& g : cls) {
            g.mean = Eigen::VectorXd(d);
            for (Eigen::Index i = 0; i < d; ++i)
                g.mean[i] = rng.normal();
            Eigen::MatrixXd a(d, d);
            for (Eigen::Index i = 0; i < d; ++i)
                for (Eigen::Index j = 0; j < d; ++j)
                    a(i, j) = rng.normal();
            g.covariance = a * a.transpose() + 0.2 * Eigen::MatrixXd::Identity(d, d);
            g.prior = rng.uniform(0.1, 1.0);
            psum += g.prior;
        }
        for (auto& g : cls)
            g.prior /= psum;
        const ClassModel m(ModelInfo{}, cls, 0.0);
        Eigen::VectorXd x(d);
        for (Eigen::Index i = 0; i < d; ++i)
            x[i] = rng.normal(0, 1.5);
        std::vector<double> joint(c);
        double z = 0.0;
        for (std::size_t k = 0; k < c; ++k)
            z += joint[k] = cls[k].prior * brute_density(cls[k], x);
        const auto p = posterior(m, x);
        for (std::size_t k = 0; k < c; ++k) {
            const double ref = joint[k] / z;
            if (ref > 1e-300)
                worst = std::max(worst, std::abs(p.probs[k] - ref) / ref);
        }
    }
    const double secs = since(t0);
    verdict(1, "gda-oracle", worst <= kGdaRelTol && secs < kGdaSeconds,
            "max_rel_err=" + fmt(worst, 3) + " (limit " + fmt(kGdaRelTol) + "), " + fmt(secs, 3) + " s (limit " +
                fmt(kGdaSeconds) + ")");
}

void criterion2() {
    const auto t0 = Clock::now();
    std::vector<GaussianClass> cls(2);
    cls[0] = {Eigen::VectorXd::Constant(1, -1.0), Eigen::MatrixXd::Constant(1, 1, 1.0), 0.5};
    cls[1] = {Eigen::VectorXd::Constant(1, 1.0), Eigen::MatrixXd::Constant(1, 1, 1.0), 0.5};
    const ClassModel m(ModelInfo{}, cls, 0.0);
    const auto est = estimate_bayes_risk(m, kPhiSamples, 7);
    const double phi1 = 0.5 * std::erfc(-1.0 / std::numbers::sqrt2);
    const double secs = since(t0);
    verdict(2, "bayes-risk-closed-form", std::abs(est.performance - phi1) <= kPhiTol && secs < kPhiSeconds,
            "1-R=" + fmt(est.performance, 5) + " Phi(1)=" + fmt(phi1, 5) + " (tol " + fmt(kPhiTol) + "), " +
                fmt(secs, 3) + " s");
}

void criterion3() {
    const auto t0 = Clock::now();
    const LogGrid grid;  // full default grid
    Rng rng(33);
    int agree = 0;
    std::string misses;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t bin = rng.below(grid.n_points);
        std::vector<LogSpectrum> spectra;
        std::vector<int> labels;
        for (int c = 0; c < 2; ++c)
            for (int i = 0; i < 40; ++i) {
                LogSpectrum s;
                s.grid = grid;
                s.log_intensities.resize(grid.n_points);
                for (double& v : s.log_intensities)
                    v = rng.normal();
                if (c == 1)
                    s.log_intensities[bin] += 4.0;
                spectra.push_back(std::move(s));
                labels.push_back(c);
            }
        const TrainingSet ts(grid, spectra, labels, 2);
        SelectConfig cfg;
        cfg.mc_samples = 1000;
        cfg.restarts = 1;
        const auto sel = select_frequencies(ts, 1, cfg);
        std::size_t best = 0;
        double best_risk = 2.0;
        for (std::size_t j = 0; j < grid.n_points; ++j) {
            const double r = frequency_set_risk(ts, FrequencySet(grid, {j}), cfg).risk;
            if (r < best_risk) {
                best_risk = r;
                best = j;
            }
        }
        const bool ok = sel.frequencies.indices().front() == bin && best == bin;
        agree += ok;
        if (!ok)
            misses += " bin " + std::to_string(bin) + "->" + std::to_string(sel.frequencies.indices().front()) + "/" +
                      std::to_string(best);
    }
    const double secs = since(t0);
    verdict(3, "selector-exact-d1", agree == 20 && secs < kSelectorSeconds,
            std::to_string(agree) + "/20 placements recovered by selector and scan oracle" + misses + ", " +
                fmt(secs, 3) + " s (limit " + fmt(kSelectorSeconds) + ")");
}

bool near_harmonic(double hz) {
    for (Gender g : {Gender::male, Gender::female})
        for (double f0 : scale_fundamentals(g))
            for (int h = 1; h <= 3; ++h)
                if (std::abs(hz - h * f0) <= kHarmonicTol * h * f0)
                    return true;
    return false;
}

void criterion4(const SpectralCorpus& sc) {
    const auto t0 = Clock::now();
    const auto trained = train_task(sc, Task::scale, Population::singers, 8, EvalConfig{});
    std::size_t hits = 0;
    std::string list;
    for (double hz : trained.model.info().frequencies.frequencies_hz()) {
        const bool h = near_harmonic(hz);
        hits += h;
        list += " " + fmt(hz, 5) + (h ? "*" : "");
    }
    const double secs = since(t0);
    verdict(4, "scale-harmonics", hits >= kHarmonicMin && secs < kScaleSeconds,
            std::to_string(hits) + "/8 within 3% of f0/2f0/3f0 (need " + std::to_string(kHarmonicMin) + "), Hz:" +
                list + ", " + fmt(secs, 3) + " s");
}

struct Row {
    double optimized = 0, random = 0;
};

// Criterion 6 table, reused by 5.
std::map<Task, std::map<std::size_t, Row>> run_optimized_vs_random(const SpectralCorpus& sc) {
    std::map<Task, std::map<std::size_t, Row>> table;
    for (Task task : {Task::gender, Task::choral, Task::joint, Task::scale}) {
        const auto t0 = Clock::now();
        const auto fold = default_fold(task, task == Task::scale ? Population::singers : Population::all, 1, kFolds);
        std::string line = std::string(to_string(task)) + ":";
        for (std::size_t d = 1; d <= 8; ++d) {
            auto& row = table[task][d];
            row.optimized = cross_validate(sc, fold, d, SelectionMode::optimized, cv_config()).mean_accuracy;
            row.random = cross_validate(sc, fold, d, SelectionMode::random, cv_config()).mean_accuracy;
            line += " D" + std::to_string(d) + "=" + fmt(row.optimized, 3) + "/" + fmt(row.random, 3);
        }
        note(line + " (optimized/random, " + fmt(since(t0), 3) + " s)");
    }
    return table;
}

void criterion5(const SpectralCorpus& sc, const std::map<std::size_t, Row>& gender) {
    bool acc_ok = true;
    std::string accs;
    for (std::size_t d = 2; d <= 8; ++d) {
        acc_ok = acc_ok && gender.at(d).optimized >= kGenderMin;
        accs += " " + fmt(gender.at(d).optimized, 3);
    }
    // Full-corpus selections: all below 500 Hz at D=2, most below 500 Hz up to D=8.
    bool low_ok = true;
    std::string sets;
    for (std::size_t d = 2; d <= 8; ++d) {
        const auto hz = train_task(sc, Task::gender, Population::all, d, EvalConfig{}).model.info().frequencies.frequencies_hz();
        std::size_t low = 0;
        for (double f : hz)
            low += f < kLowHz;
        low_ok = low_ok && (d == 2 ? low == hz.size() : 2 * low > hz.size());
        sets += " D" + std::to_string(d) + ":" + std::to_string(low) + "/" + std::to_string(d);
    }
    verdict(5, "gender-near-perfect", acc_ok && low_ok,
            "accuracy D=2..8:" + accs + " (min " + fmt(kGenderMin) + "); below 500 Hz:" + sets);
}

void criterion6(const std::map<Task, std::map<std::size_t, Row>>& table) {
    bool ok = true;
    std::string bad;
    for (const auto& [task, rows] : table)
        for (const auto& [d, row] : rows)
            if (row.optimized < row.random) {
                ok = false;
                bad += " " + std::string(to_string(task)) + "@D" + std::to_string(d);
            }
    verdict(6, "optimized-beats-random", ok,
            "4 tasks x D=1..8, " + std::to_string(kFolds) + " folds" + (bad.empty() ? std::string() : ", violations:" + bad));
}

void criterion7(const SpectralCorpus& sc) {
    auto has = [](const std::vector<double>& hz, double lo, double hi) {
        for (double f : hz)
            if (f >= lo && f <= hi)
                return true;
        return false;
    };
    bool male_ok = false, female_ok = false;
    std::string detail;
    for (std::size_t d = 1; d <= 4; ++d) {
        const auto m = train_task(sc, Task::choral, Population::male, d, EvalConfig{}).model.info().frequencies.frequencies_hz();
        const auto f = train_task(sc, Task::choral, Population::female, d, EvalConfig{}).model.info().frequencies.frequencies_hz();
        male_ok = male_ok || has(m, 2500, 3500);
        female_ok = female_ok || has(f, 8000, 12000);
        detail += " D" + std::to_string(d) + " M[";
        for (double x : m)
            detail += " " + fmt(x, 5);
        detail += "] F[";
        for (double x : f)
            detail += " " + fmt(x, 5);
        detail += "]";
    }
    verdict(7, "formant-capture", male_ok && female_ok,
            std::string("male 2.5-3.5 kHz ") + (male_ok ? "yes" : "no") + ", female 8-12 kHz " +
                (female_ok ? "yes" : "no") + ";" + detail);
}

void criterion8(const SpectralCorpus& sc) {
    const auto fold = default_fold(Task::joint, Population::all, 1, kFolds);
    std::map<Ordering, double> acc;
    std::string detail;
    for (Ordering o : {Ordering::independent, Ordering::sn_then_mf, Ordering::mf_then_sn, Ordering::simultaneous}) {
        const auto r = infer_joint(sc, fold, 4, o, cv_config());
        acc[o] = r.mean_accuracy;
        detail += " " + std::string(to_string(o)) + "=" + fmt(r.mean_accuracy, 3);
        if (r.skipped_folds)
            detail += "(skipped " + std::to_string(r.skipped_folds) + ")";
    }
    const double best_seq = std::max(acc[Ordering::sn_then_mf], acc[Ordering::mf_then_sn]);
    verdict(8, "ordering-comparison", acc[Ordering::simultaneous] <= best_seq, "D=4:" + detail);
}

void criterion9(const SpectralCorpus& sc) {
    bool ok = true;
    std::string detail;
    const std::vector<double> ts = {0.1, 1.0};
    for (Task task : {Task::gender, Task::choral}) {
        const auto fold = default_fold(task, Population::all, 1, kFolds);
        const auto r = duration_sweep(sc, fold, 4, ts, cv_config());
        const double diff = std::abs(r[0].mean_accuracy - r[1].mean_accuracy);
        ok = ok && diff <= kDurationTol;
        detail += " " + std::string(to_string(task)) + " T=0.1:" + fmt(r[0].mean_accuracy, 3) + " T=1:" +
                  fmt(r[1].mean_accuracy, 3) + " |diff|=" + fmt(diff, 3);
    }
    verdict(9, "duration-stability", ok, "D=4," + detail + " (tol " + fmt(kDurationTol) + ")");
}

void criterion10(const SpectralCorpus& sc) {
    bool ok = true;
    std::string detail;
    EvalConfig cfg = cv_config();
    cfg.shuffle_labels = true;
    for (Task task : {Task::gender, Task::choral, Task::joint}) {
        const auto fold = default_fold(task, Population::all, 1, kShuffleRepeats);
        const auto r = cross_validate(sc, fold, 2, SelectionMode::optimized, cfg);
        const double chance = 1.0 / static_cast<double>(task_cardinality(task));
        const double sigma = r.std_accuracy / std::sqrt(static_cast<double>(r.n_folds()));
        const double z = (r.mean_accuracy - chance) / sigma;
        ok = ok && std::abs(z) <= kShuffleSigmas;
        detail += " " + std::string(to_string(task)) + " mean=" + fmt(r.mean_accuracy, 3) + " chance=" + fmt(chance, 3) +
                  " z=" + fmt(z, 3);
    }
    verdict(10, "chance-floor", ok, "D=2, " + std::to_string(kShuffleRepeats) + " shuffled repeats:" + detail);
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string("VOXCLASS_LOG=quiet ") + VOXCLASS_CLI_PATH + " " + args + " > /dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void criterion11() {
    const auto root = fs::temp_directory_path() / "voxclass_acceptance_determinism";
    fs::remove_all(root);
    std::size_t compared = 0, differing = 0;
    int status = 0;
    for (const char* run : {"a", "b"}) {
        const auto dir = root / run;
        fs::create_directories(dir);
        const auto corpus = (dir / "corpus").string();
        const auto manifest = corpus + "/manifest.csv";
        status |= run_cli("synth --out " + corpus + " --seed 3");
        status |= run_cli("train --manifest " + manifest + " --task choral --d 3 --seed 4 --out " +
                          (dir / "choral.model.json").string() + " --frequencies-out " +
                          (dir / "choral.frequencies.csv").string());
        status |= run_cli("evaluate --manifest " + manifest + " --task gender --d 1..3 --mode both --folds 3 --seed 5 --out " +
                          (dir / "gender.csv").string());
    }
    for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
        if (!e.is_regular_file())
            continue;
        const auto rel = fs::relative(e.path(), root / "a");
        ++compared;
        differing += slurp(e.path()) != slurp(root / "b" / rel);
    }
    const bool ok = status == 0 && differing == 0 && compared > 400;
    verdict(11, "cli-determinism", ok,
            std::to_string(compared) + " artifacts compared, " + std::to_string(differing) + " differ, exit status " +
                std::to_string(status));
    fs::remove_all(root);
}

void criterion12(const Corpus& corpus, const SpectralCorpus& sc) {
    EvalConfig cfg;
    cfg.select.restarts = 1;
    std::vector<ClassModel> models;
    for (Task task : {Task::gender, Task::choral, Task::joint, Task::scale})
        models.push_back(train_task(sc, task, task == Task::scale ? Population::singers : Population::all, 4, cfg).model);
    double worst = 0.0;
    std::size_t checked = 0;
    SpectrumAnalyzer analyzer(sc.config.window, sc.config.kind);
    for (std::size_t s = 0; s < corpus.subjects.size(); s += 5) {
        const auto& take = corpus.subjects[s].takes[s % corpus.subjects[s].takes.size()];
        const auto base = analyze_recording(take.audio, sc.config, &analyzer);
        for (double factor : {0.1, 0.5, 2.0}) {
            AudioSignal scaled = take.audio;
            for (double& v : scaled.samples)
                v *= factor;
            const auto segs = analyze_recording(scaled, sc.config, &analyzer);
            for (const auto& m : models) {
                const auto a = classify_segments(m, base), b = classify_segments(m, segs);
                for (std::size_t k = 0; k < a.probs.size(); ++k)
                    worst = std::max(worst, std::abs(a.probs[k] - b.probs[k]));
                ++checked;
            }
        }
    }
    verdict(12, "amplitude-invariance", worst <= kAmplitudeTol,
            "max |dP|=" + fmt(worst, 3) + " over " + std::to_string(checked) + " posteriors, factors 0.1/0.5/2.0 (tol " +
                fmt(kAmplitudeTol) + ")");
}

}  // namespace

int main() {
    const auto t_all = Clock::now();
    std::cout << "voxclass acceptance (synthetic corpus, seed 1)" << std::endl;
    criterion1();
    criterion2();
    criterion3();

    auto t0 = Clock::now();
    const Corpus corpus = generate_corpus(CorpusSpec{}, 1);
    const SpectralCorpus sc = analyze_corpus(corpus, SpectralConfig{});
    note("corpus: " + std::to_string(corpus.subjects.size()) + " subjects, " + std::to_string(corpus.take_count()) +
         " recordings, " + fmt(since(t0), 3) + " s");

    criterion4(sc);
    const auto table = run_optimized_vs_random(sc);
    criterion5(sc, table.at(Task::gender));
    criterion6(table);
    criterion7(sc);
    criterion8(sc);
    criterion9(sc);
    criterion10(sc);
    criterion11();
    criterion12(corpus, sc);

    std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << " (" << fmt(since(t_all), 4)
              << " s)" << std::endl;
    return std::min(failures, 100);
}
