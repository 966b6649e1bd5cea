#pragma once

// Bayes-risk estimation and probe-frequency selection.
//
// The performance 1 - R of a fitted model is the probability that its own
// MAP rule recovers the class a point was drawn from. It is estimated by
// Monte Carlo from the class-conditional Gaussians (or, optionally, on the
// training spectra themselves). Frequencies are chosen by coordinate
// descent over the log grid: each of the D slots in turn is moved to the
// grid position that minimizes the risk with the other slots held fixed,
// sweeping until a full pass no longer helps.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "error.hpp"
#include "frequency_set.hpp"
#include "gda.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "spectra.hpp"

namespace voxclass {

enum class RiskMode { monte_carlo, empirical };

inline std::string_view to_string(RiskMode m) { return m == RiskMode::monte_carlo ? "monte_carlo" : "empirical"; }

inline RiskMode parse_risk_mode(std::string_view s) {
    if (s == "monte_carlo" || s == "mc") return RiskMode::monte_carlo;
    if (s == "empirical") return RiskMode::empirical;
    throw ConfigError("unknown risk estimator '" + std::string(s) + "'");
}

struct RiskEstimate {
    double risk = 1.0;
    double performance = 0.0;
    std::size_t mc_samples = 0;
    std::uint64_t seed = 0;
};

struct SelectConfig {
    std::size_t mc_samples = 2000;
    std::uint64_t seed = 1;
    double tol = 1e-4;
    std::size_t max_passes = 10;
    std::size_t restarts = 3;
    std::size_t stride = 1;  // > 1: scan every stride-th point, then refine locally
    RiskMode mode = RiskMode::monte_carlo;
    double ridge_relative = 1e-6;
    std::size_t threads = 0;  // 0: hardware concurrency
};

namespace detail {

inline std::size_t per_class_draws(std::size_t mc_samples, std::size_t n_classes) {
    return std::max<std::size_t>(1, mc_samples / n_classes);
}

/// Standard-normal latent draws for class c, row-major n x d.
inline std::vector<double> latent_draws(std::uint64_t seed, std::size_t c, std::size_t n, std::size_t d) {
    Rng rng(derive_seed(seed, "mc", c));
    std::vector<double> z(n * d);
    for (double& v : z)
        v = rng.normal();
    return z;
}

}  // namespace detail

/// Monte Carlo estimate of the model's Bayes risk: mc_samples / C points
/// are drawn from each class-conditional Gaussian, labelled by MAP, and
/// the prior-weighted fraction landing in its own class is 1 - R.
inline RiskEstimate estimate_bayes_risk(const ClassModel& model, std::size_t mc_samples, std::uint64_t seed) {
    if (mc_samples == 0)
        throw RangeError("mc_samples must be at least 1");
    const std::size_t n_classes = model.n_classes();
    const std::size_t d = model.dimension();
    const std::size_t per_class = detail::per_class_draws(mc_samples, n_classes);

    double performance = 0.0;
    Eigen::VectorXd z(static_cast<Eigen::Index>(d));
    for (std::size_t c = 0; c < n_classes; ++c) {
        const auto draws = detail::latent_draws(seed, c, per_class, d);
        const auto& cls = model.classes()[c];
        std::size_t correct = 0;
        for (std::size_t s = 0; s < per_class; ++s) {
            for (std::size_t k = 0; k < d; ++k)
                z[static_cast<Eigen::Index>(k)] = draws[s * d + k];
            const Eigen::VectorXd x = cls.mean + model.cholesky(c).triangularView<Eigen::Lower>() * z;
            if (map_class(posterior(model, x)) == c)
                ++correct;
        }
        performance += cls.prior * static_cast<double>(correct) / static_cast<double>(per_class);
    }
    return RiskEstimate{1.0 - performance, performance, per_class * n_classes, seed};
}

/// Labelled spectra flattened for selection: one row per spectrum, one
/// column per log-grid point, centred per class.
class TrainingSet {
public:
    TrainingSet(LogGrid grid, std::span<const LogSpectrum> spectra, std::span<const int> labels, std::size_t n_classes,
                FeatureScale scale = FeatureScale::log)
        : grid_(grid), n_classes_(n_classes), scale_(scale) {
        if (spectra.size() != labels.size())
            throw RangeError("spectra and labels differ in length");
        const auto g = static_cast<Eigen::Index>(grid.n_points);
        std::vector<std::vector<std::size_t>> members(n_classes);
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_classes)
                throw RangeError("label outside the task's label set");
            if (!(spectra[i].grid == grid))
                throw GridError("training spectrum on a different log grid");
            members[static_cast<std::size_t>(labels[i])].push_back(i);
        }
        std::size_t present = 0;
        for (const auto& m : members)
            present += m.empty() ? 0 : 1;
        if (present < 2)
            throw InsufficientDataError("selection needs at least two classes with samples");

        classes_.resize(n_classes);
        for (std::size_t c = 0; c < n_classes; ++c) {
            auto& cls = classes_[c];
            const auto n = static_cast<Eigen::Index>(members[c].size());
            cls.centered.resize(n, g);
            for (Eigen::Index r = 0; r < n; ++r) {
                const auto& li = spectra[members[c][static_cast<std::size_t>(r)]].log_intensities;
                for (Eigen::Index k = 0; k < g; ++k) {
                    const double v = li[static_cast<std::size_t>(k)];
                    cls.centered(r, k) = scale == FeatureScale::log ? v : std::exp(v);
                }
            }
            cls.mean = n > 0 ? Eigen::VectorXd(cls.centered.colwise().mean().transpose()) : Eigen::VectorXd::Zero(g);
            cls.centered.rowwise() -= cls.mean.transpose();
            cls.variance = n > 0 ? Eigen::VectorXd(cls.centered.colwise().squaredNorm().transpose() / static_cast<double>(n))
                                 : Eigen::VectorXd::Zero(g);
        }
    }

    struct ClassData {
        Eigen::MatrixXd centered;  // N_c x G
        Eigen::VectorXd mean;      // G
        Eigen::VectorXd variance;  // G, divisor N_c
    };

    const LogGrid& grid() const { return grid_; }
    std::size_t n_classes() const { return n_classes_; }
    FeatureScale scale() const { return scale_; }
    const ClassData& cls(std::size_t c) const { return classes_[c]; }
    std::size_t class_size(std::size_t c) const { return static_cast<std::size_t>(classes_[c].centered.rows()); }

    std::size_t min_class_size() const {
        std::size_t m = std::numeric_limits<std::size_t>::max();
        for (std::size_t c = 0; c < n_classes_; ++c)
            m = std::min(m, class_size(c));
        return m;
    }

    /// Ridge shared by every model fitted on this set: relative times the
    /// mean within-class variance over the whole grid. Independent of the
    /// chosen frequencies, so candidate swaps leave it unchanged.
    double ridge(double relative) const {
        std::vector<double> v;
        v.reserve(n_classes_ * grid_.n_points);
        for (const auto& cls : classes_)
            if (cls.centered.rows() > 0)
                v.insert(v.end(), cls.variance.data(), cls.variance.data() + cls.variance.size());
        return ridge_from_variances(v, relative);
    }

    /// Feature value of row r of class c at grid position k.
    double value(std::size_t c, Eigen::Index r, std::size_t k) const {
        const auto& cls = classes_[c];
        const auto kk = static_cast<Eigen::Index>(k);
        return cls.centered(r, kk) + cls.mean[kk];
    }

    /// Gaussian model on a frequency set, fitted with the shared ridge.
    ClassModel fit_model(const FrequencySet& freqs, double epsilon, ModelInfo info = {}) const {
        if (!(freqs.grid() == grid_))
            throw GridError("frequency set grid differs from the training grid");
        std::size_t total = 0;
        for (std::size_t c = 0; c < n_classes_; ++c)
            total += class_size(c);
        const auto d = static_cast<Eigen::Index>(freqs.size());
        Eigen::MatrixXd x(static_cast<Eigen::Index>(total), d);
        std::vector<int> labels;
        labels.reserve(total);
        Eigen::Index row = 0;
        for (std::size_t c = 0; c < n_classes_; ++c) {
            for (Eigen::Index r = 0; r < classes_[c].centered.rows(); ++r, ++row) {
                for (Eigen::Index k = 0; k < d; ++k)
                    x(row, k) = value(c, r, freqs.indices()[static_cast<std::size_t>(k)]);
                labels.push_back(static_cast<int>(c));
            }
        }
        info.frequencies = freqs;
        info.feature_scale = scale_;
        return fit(x, labels, n_classes_, epsilon, std::move(info));
    }

private:
    LogGrid grid_;
    std::size_t n_classes_;
    FeatureScale scale_;
    std::vector<ClassData> classes_;
};

/// 1 - prior-weighted accuracy of the model's MAP rule on its training rows.
inline RiskEstimate empirical_risk(const ClassModel& model, const TrainingSet& train) {
    const auto& idx = model.info().frequencies.indices();
    double performance = 0.0;
    std::size_t total = 0;
    FeatureVector x(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < train.n_classes(); ++c) {
        const std::size_t n = train.class_size(c);
        if (n == 0)
            continue;
        std::size_t correct = 0;
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t k = 0; k < idx.size(); ++k)
                x[static_cast<Eigen::Index>(k)] = train.value(c, static_cast<Eigen::Index>(r), idx[k]);
            if (map_class(posterior(model, x)) == c)
                ++correct;
        }
        performance += model.classes()[c].prior * static_cast<double>(correct) / static_cast<double>(n);
        total += n;
    }
    return RiskEstimate{1.0 - performance, performance, total, 0};
}

/// D distinct grid positions drawn uniformly without replacement.
inline FrequencySet random_frequencies(std::size_t d, std::uint64_t seed, const LogGrid& grid) {
    if (d > grid.n_points)
        throw RangeError("cannot draw " + std::to_string(d) + " distinct points from a grid of " +
                         std::to_string(grid.n_points));
    Rng rng(derive_seed(seed, "random_frequencies"));
    std::vector<std::size_t> pool(grid.n_points);
    for (std::size_t i = 0; i < pool.size(); ++i)
        pool[i] = i;
    for (std::size_t i = 0; i < d; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(d);
    return FrequencySet(grid, std::move(pool));
}

/// D positions equally spaced in log frequency, each centred in its share of the grid.
inline std::vector<std::size_t> equally_spaced_indices(std::size_t d, std::size_t grid_points) {
    std::vector<std::size_t> out(d);
    for (std::size_t k = 0; k < d; ++k)
        out[k] = static_cast<std::size_t>((2 * k + 1) * grid_points / (2 * d));
    return out;
}

struct SelectionResult {
    FrequencySet frequencies;
    RiskEstimate risk;                       // canonical estimate of the returned set
    FrequencySet initial;                    // deterministic initialization
    RiskEstimate initial_risk;
    std::vector<double> pass_risks;          // canonical risk after init and after each accepted pass
    std::vector<std::size_t> slot_indices;   // grid position per slot, optimization order
    std::vector<double> slot_risks;          // scan risk right after each slot's last update
    std::size_t passes = 0;
    std::size_t restart = 0;                 // which restart produced the result
};

namespace detail {

/// Risk of every candidate for one slot, with the other slots fixed.
///
/// Works with the slot's candidate as the last coordinate: the Cholesky
/// factor of the fixed block, the fixed part of every probe point and its
/// whitened residual under every class are computed once, after which a
/// candidate costs O(m) per probe and class for m fixed slots.
class SlotScanner {
public:
    SlotScanner(const TrainingSet& train, std::span<const std::size_t> fixed, double epsilon, RiskMode mode,
                std::span<const std::vector<double>> latent, std::size_t per_class)
        : train_(train), fixed_(fixed.begin(), fixed.end()), epsilon_(epsilon), mode_(mode), latent_(latent),
          per_class_(per_class) {
        n_classes_ = train.n_classes();
        m_ = fixed_.size();
        d_ = m_ + 1;
        const auto m = static_cast<Eigen::Index>(m_);

        cross_.resize(n_classes_);
        lower_.resize(n_classes_);
        log_det_fixed_.assign(n_classes_, 0.0);
        log_prior_ = -std::log(static_cast<double>(n_classes_));
        for (std::size_t c = 0; c < n_classes_; ++c) {
            const auto& cls = train.cls(c);
            const Eigen::Index n = cls.centered.rows();
            Eigen::MatrixXd sub(n, m);
            for (Eigen::Index k = 0; k < m; ++k)
                sub.col(k) = cls.centered.col(static_cast<Eigen::Index>(fixed_[static_cast<std::size_t>(k)]));
            cross_[c] = (cls.centered.transpose() * sub) / static_cast<double>(n);  // G x m
            Eigen::MatrixXd block(m, m);
            for (Eigen::Index a = 0; a < m; ++a)
                block.row(a) = cross_[c].row(static_cast<Eigen::Index>(fixed_[static_cast<std::size_t>(a)]));
            block = 0.5 * (block + block.transpose()).eval();
            block.diagonal().array() += epsilon_;
            Eigen::LLT<Eigen::MatrixXd> llt(block);
            if (llt.info() != Eigen::Success)
                throw ModelCorruptError("fixed-slot covariance is not positive definite");
            lower_[c] = llt.matrixL();
            for (Eigen::Index a = 0; a < m; ++a)
                log_det_fixed_[c] += std::log(lower_[c](a, a));
        }
        build_probes();
    }

    /// Prior-weighted risk with grid position j in the free slot.
    /// Returns +inf when the candidate makes a covariance singular.
    double risk(std::size_t j, std::vector<double>& scratch) const {
        const std::size_t mm = m_;
        scratch.resize(n_classes_ * (mm + 2));
        // Per class: l = L^{-1} Sigma[S, j], then sqrt of the Schur complement and log normalizer.
        for (std::size_t c = 0; c < n_classes_; ++c) {
            double* l = scratch.data() + c * (mm + 2);
            const auto& cross = cross_[c];
            const auto& lower = lower_[c];
            double sq = 0.0;
            for (std::size_t a = 0; a < mm; ++a) {
                double v = cross(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(a));
                for (std::size_t b = 0; b < a; ++b)
                    v -= lower(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * l[b];
                v /= lower(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a));
                l[a] = v;
                sq += v * v;
            }
            const double schur = train_.cls(c).variance[static_cast<Eigen::Index>(j)] + epsilon_ - sq;
            if (!(schur > 0.0))
                return std::numeric_limits<double>::infinity();
            const double ld = std::sqrt(schur);
            l[mm] = ld;
            l[mm + 1] = log_prior_ - log_det_fixed_[c] - std::log(ld);
        }

        double performance = 0.0;
        for (std::size_t gen = 0; gen < n_classes_; ++gen) {
            const std::size_t n_probe = probe_count_[gen];
            if (n_probe == 0)
                continue;
            const double mu_gen = train_.cls(gen).mean[static_cast<Eigen::Index>(j)];
            const double* lg = scratch.data() + gen * (mm + 2);
            std::size_t correct = 0;
            for (std::size_t p = 0; p < n_probe; ++p) {
                double xj;
                if (mode_ == RiskMode::monte_carlo) {
                    const double* z = latent_[gen].data() + p * d_;
                    xj = mu_gen;
                    for (std::size_t a = 0; a < mm; ++a)
                        xj += lg[a] * z[a];
                    xj += lg[mm] * z[mm];
                } else {
                    xj = train_.value(gen, static_cast<Eigen::Index>(p), j);
                }
                const double* y = whitened_[gen].data() + p * n_classes_ * (mm + 1);
                std::size_t best = 0;
                double best_score = -std::numeric_limits<double>::infinity();
                for (std::size_t c = 0; c < n_classes_; ++c) {
                    const double* lc = scratch.data() + c * (mm + 2);
                    const double* yc = y + c * (mm + 1);
                    double r = xj - train_.cls(c).mean[static_cast<Eigen::Index>(j)];
                    for (std::size_t a = 0; a < mm; ++a)
                        r -= lc[a] * yc[a];
                    r /= lc[mm];
                    const double score = lc[mm + 1] - 0.5 * (yc[mm] + r * r);
                    if (score > best_score) {
                        best_score = score;
                        best = c;
                    }
                }
                if (best == gen)
                    ++correct;
            }
            performance += static_cast<double>(correct) / static_cast<double>(n_probe) / static_cast<double>(n_classes_);
        }
        return 1.0 - performance;
    }

private:
    void build_probes() {
        const std::size_t mm = m_;
        probe_count_.assign(n_classes_, 0);
        whitened_.assign(n_classes_, {});
        std::vector<double> xs(mm), diff(mm);
        for (std::size_t gen = 0; gen < n_classes_; ++gen) {
            const std::size_t n_probe =
                mode_ == RiskMode::monte_carlo ? per_class_ : train_.class_size(gen);
            probe_count_[gen] = n_probe;
            auto& out = whitened_[gen];
            out.resize(n_probe * n_classes_ * (mm + 1));
            for (std::size_t p = 0; p < n_probe; ++p) {
                // Fixed coordinates of the probe point.
                if (mode_ == RiskMode::monte_carlo) {
                    const double* z = latent_[gen].data() + p * d_;
                    const auto& lower = lower_[gen];
                    for (std::size_t a = 0; a < mm; ++a) {
                        double v = train_.cls(gen).mean[static_cast<Eigen::Index>(fixed_[a])];
                        for (std::size_t b = 0; b <= a; ++b)
                            v += lower(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * z[b];
                        xs[a] = v;
                    }
                } else {
                    for (std::size_t a = 0; a < mm; ++a)
                        xs[a] = train_.value(gen, static_cast<Eigen::Index>(p), fixed_[a]);
                }
                // Whitened residual under each class, plus its squared norm.
                for (std::size_t c = 0; c < n_classes_; ++c) {
                    double* y = out.data() + (p * n_classes_ + c) * (mm + 1);
                    const auto& lower = lower_[c];
                    double sq = 0.0;
                    for (std::size_t a = 0; a < mm; ++a) {
                        double v = xs[a] - train_.cls(c).mean[static_cast<Eigen::Index>(fixed_[a])];
                        for (std::size_t b = 0; b < a; ++b)
                            v -= lower(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * y[b];
                        v /= lower(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a));
                        y[a] = v;
                        sq += v * v;
                    }
                    y[mm] = sq;
                }
            }
        }
    }

    const TrainingSet& train_;
    std::vector<std::size_t> fixed_;
    double epsilon_;
    RiskMode mode_;
    std::span<const std::vector<double>> latent_;
    std::size_t per_class_;
    std::size_t n_classes_ = 0, m_ = 0, d_ = 0;
    double log_prior_ = 0.0;
    std::vector<Eigen::MatrixXd> cross_;
    std::vector<Eigen::MatrixXd> lower_;
    std::vector<double> log_det_fixed_;
    std::vector<std::size_t> probe_count_;
    std::vector<std::vector<double>> whitened_;
};

}  // namespace detail

/// Canonical risk of a frequency set on a training set: fit with the
/// shared ridge, then Monte Carlo (seeded) or empirical estimation.
inline RiskEstimate frequency_set_risk(const TrainingSet& train, const FrequencySet& freqs, const SelectConfig& config) {
    const ClassModel model = train.fit_model(freqs, train.ridge(config.ridge_relative));
    return config.mode == RiskMode::monte_carlo ? estimate_bayes_risk(model, config.mc_samples, config.seed)
                                                : empirical_risk(model, train);
}

namespace detail {

struct DescentOutcome {
    std::vector<std::size_t> slots;
    std::vector<double> slot_risks;
    std::vector<double> pass_risks;
    RiskEstimate risk;
    std::size_t passes = 0;
};

inline DescentOutcome coordinate_descent(const TrainingSet& train, std::vector<std::size_t> slots,
                                         const SelectConfig& config, double epsilon,
                                         std::span<const std::vector<double>> latent, std::size_t per_class) {
    const std::size_t g = train.grid().n_points;
    const std::size_t d = slots.size();
    DescentOutcome out;
    out.slot_risks.assign(d, std::numeric_limits<double>::quiet_NaN());
    out.risk = frequency_set_risk(train, FrequencySet(train.grid(), slots), config);
    out.pass_risks.push_back(out.risk.risk);

    std::vector<double> risks(g);
    for (std::size_t pass = 0; pass < config.max_passes; ++pass) {
        const std::vector<std::size_t> before = slots;
        const std::vector<double> slot_risks_before = out.slot_risks;
        for (std::size_t i = 0; i < d; ++i) {
            std::vector<std::size_t> fixed;
            fixed.reserve(d - 1);
            for (std::size_t k = 0; k < d; ++k)
                if (k != i)
                    fixed.push_back(slots[k]);
            SlotScanner scanner(train, fixed, epsilon, config.mode, latent, per_class);

            std::vector<char> occupied(g, 0);
            for (std::size_t f : fixed)
                occupied[f] = 1;
            std::vector<std::size_t> candidates;
            const std::size_t stride = std::max<std::size_t>(1, config.stride);
            for (std::size_t j = 0; j < g; j += stride)
                if (!occupied[j])
                    candidates.push_back(j);
            if (stride > 1 && !occupied[slots[i]] &&
                std::find(candidates.begin(), candidates.end(), slots[i]) == candidates.end())
                candidates.push_back(slots[i]);

            auto evaluate = [&](const std::vector<std::size_t>& cands) {
                parallel_blocks(
                    cands.size(),
                    [&](std::size_t b, std::size_t e) {
                        std::vector<double> scratch;
                        for (std::size_t k = b; k < e; ++k)
                            risks[cands[k]] = scanner.risk(cands[k], scratch);
                    },
                    config.threads);
            };
            std::fill(risks.begin(), risks.end(), std::numeric_limits<double>::infinity());
            evaluate(candidates);
            if (stride > 1) {
                // Refine around the best coarse point.
                std::size_t coarse = slots[i];
                for (std::size_t j : candidates)
                    if (risks[j] < risks[coarse])
                        coarse = j;
                std::vector<std::size_t> local;
                const std::size_t lo = coarse >= stride ? coarse - stride : 0;
                const std::size_t hi = std::min(g - 1, coarse + stride);
                for (std::size_t j = lo; j <= hi; ++j)
                    if (!occupied[j] && std::isinf(risks[j]))
                        local.push_back(j);
                evaluate(local);
            }

            // Keep the current position unless something is strictly better;
            // among equally good improvements the lowest grid index wins.
            std::size_t best = slots[i];
            for (std::size_t j = 0; j < g; ++j)
                if (!occupied[j] && risks[j] < risks[best])
                    best = j;
            slots[i] = best;
            out.slot_risks[i] = risks[best];
        }

        const RiskEstimate after = frequency_set_risk(train, FrequencySet(train.grid(), slots), config);
        if (after.risk > out.risk.risk) {
            // The scan's estimate disagreed with the canonical one; keep the previous pass.
            slots = before;
            out.slot_risks = slot_risks_before;
            break;
        }
        const double improvement = out.risk.risk - after.risk;
        out.risk = after;
        out.pass_risks.push_back(after.risk);
        out.passes = pass + 1;
        if (improvement < config.tol)
            break;
    }
    out.slots = std::move(slots);
    return out;
}

}  // namespace detail

/// Choose D probe frequencies by sequential coordinate descent on the Bayes risk.
///
/// Restart 0 starts from equally spaced positions; further restarts start
/// from seeded random positions. The lowest canonical risk wins (earliest
/// restart on ties). With max_passes == 0 the deterministic initialization
/// is returned untouched.
inline SelectionResult select_frequencies(const TrainingSet& train, std::size_t d, const SelectConfig& config) {
    const std::size_t g = train.grid().n_points;
    if (d == 0)
        throw RangeError("D must be at least 1");
    if (d > g)
        throw RangeError("D exceeds the grid size");
    if (d >= train.min_class_size())
        throw InsufficientDataError("D = " + std::to_string(d) + " needs more than D samples in every class (smallest has " +
                                    std::to_string(train.min_class_size()) + ")");

    const double epsilon = train.ridge(config.ridge_relative);
    const std::size_t per_class = detail::per_class_draws(config.mc_samples, train.n_classes());
    std::vector<std::vector<double>> latent;
    if (config.mode == RiskMode::monte_carlo)
        for (std::size_t c = 0; c < train.n_classes(); ++c)
            latent.push_back(detail::latent_draws(config.seed, c, per_class, d));

    SelectionResult result;
    const auto init = equally_spaced_indices(d, g);
    result.initial = FrequencySet(train.grid(), init);
    result.initial_risk = frequency_set_risk(train, result.initial, config);

    if (config.max_passes == 0) {
        result.frequencies = result.initial;
        result.risk = result.initial_risk;
        result.pass_risks = {result.initial_risk.risk};
        result.slot_indices = init;
        result.slot_risks.assign(d, std::numeric_limits<double>::quiet_NaN());
        return result;
    }

    const std::size_t restarts = std::max<std::size_t>(1, config.restarts);
    bool have = false;
    for (std::size_t r = 0; r < restarts; ++r) {
        std::vector<std::size_t> start =
            r == 0 ? init : random_frequencies(d, derive_seed(config.seed, "restart", r), train.grid()).indices();
        auto outcome = detail::coordinate_descent(train, std::move(start), config, epsilon, latent, per_class);
        if (!have || outcome.risk.risk < result.risk.risk) {
            have = true;
            result.frequencies = FrequencySet(train.grid(), outcome.slots);
            result.risk = outcome.risk;
            result.pass_risks = outcome.pass_risks;
            result.slot_indices = outcome.slots;
            result.slot_risks = outcome.slot_risks;
            result.passes = outcome.passes;
            result.restart = r;
        }
    }
    return result;
}

/// `rank,frequency_hz,risk_after` with one row per slot in optimization order.
inline void write_selection_csv(std::ostream& out, const SelectionResult& sel) {
    out << "rank,frequency_hz,risk_after\n";
    out.precision(17);
    for (std::size_t i = 0; i < sel.slot_indices.size(); ++i)
        out << (i + 1) << ',' << sel.frequencies.grid().frequency_hz(sel.slot_indices[i]) << ','
            << sel.slot_risks[i] << '\n';
}

}  // namespace voxclass
