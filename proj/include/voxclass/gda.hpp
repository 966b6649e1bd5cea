#pragma once

// Gaussian discriminant analysis over spectral probe features.
//
// Each class c carries a mean mu_c, a covariance Sigma_c and a prior P(c).
// Densities are evaluated through the Cholesky factor of Sigma_c and kept in
// log space until the final normalization; with tens of dimensions of
// log-power features the raw densities are far outside double range.

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "error.hpp"
#include "frequency_set.hpp"
#include "spectra.hpp"
#include "tasks.hpp"

namespace voxclass {

enum class FeatureScale { log, linear };

inline std::string_view to_string(FeatureScale s) { return s == FeatureScale::log ? "log" : "linear"; }

inline FeatureScale parse_feature_scale(std::string_view s) {
    if (s == "log") return FeatureScale::log;
    if (s == "linear") return FeatureScale::linear;
    throw ConfigError("unknown feature scale '" + std::string(s) + "'");
}

using FeatureVector = Eigen::VectorXd;

/// Probe values of one spectrum at the set's grid positions. Exact lookup:
/// the frequency set must live on the spectrum's grid.
inline FeatureVector extract_features(const LogSpectrum& spec, const FrequencySet& freqs,
                                      FeatureScale scale = FeatureScale::log) {
    if (!(spec.grid == freqs.grid()))
        throw GridError("frequency set grid differs from the spectrum grid");
    FeatureVector x(static_cast<Eigen::Index>(freqs.size()));
    for (std::size_t i = 0; i < freqs.size(); ++i) {
        const std::size_t k = freqs.indices()[i];
        if (k >= spec.log_intensities.size())
            throw GridError("grid index " + std::to_string(k) + " outside spectrum");
        const double v = spec.log_intensities[k];
        x[static_cast<Eigen::Index>(i)] = scale == FeatureScale::log ? v : std::exp(v);
    }
    return x;
}

struct Posterior {
    std::vector<double> probs;

    std::size_t size() const { return probs.size(); }
    bool operator==(const Posterior&) const = default;
};

struct GaussianClass {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    double prior = 0.0;

    bool operator==(const GaussianClass& o) const {
        return mean == o.mean && covariance == o.covariance && prior == o.prior;
    }
};

/// Everything about a model besides its Gaussian parameters: what it
/// classifies, where its features come from, and how it was produced.
struct ModelInfo {
    Task task = Task::gender;
    std::vector<std::string> labels;
    FrequencySet frequencies;
    FeatureScale feature_scale = FeatureScale::log;
    SpectralConfig spectral{};
    std::string fingerprint;
    std::string config;  // JSON of the effective training configuration

    bool operator==(const ModelInfo&) const = default;
};

/// Fitted discriminant model. Immutable; safe to share between threads.
class ClassModel {
public:
    ClassModel(ModelInfo info, std::vector<GaussianClass> classes, double epsilon)
        : info_(std::move(info)), classes_(std::move(classes)), epsilon_(epsilon) {
        if (classes_.empty())
            throw ModelCorruptError("model has no classes");
        const Eigen::Index d = classes_.front().mean.size();
        double prior_sum = 0.0;
        factors_.reserve(classes_.size());
        log_norm_.reserve(classes_.size());
        for (const auto& c : classes_) {
            if (c.mean.size() != d || c.covariance.rows() != d || c.covariance.cols() != d)
                throw ModelCorruptError("class parameters have inconsistent dimensions");
            if (!c.covariance.isApprox(c.covariance.transpose(), 1e-12) && d > 0)
                throw ModelCorruptError("covariance is not symmetric");
            if (!(c.prior > 0.0 && c.prior <= 1.0))
                throw ModelCorruptError("class prior outside (0, 1]");
            prior_sum += c.prior;
            Eigen::LLT<Eigen::MatrixXd> llt(c.covariance);
            if (llt.info() != Eigen::Success)
                throw ModelCorruptError("covariance is not positive definite");
            const Eigen::MatrixXd lower = llt.matrixL();
            double log_det_half = 0.0;
            for (Eigen::Index i = 0; i < d; ++i) {
                if (!(lower(i, i) > 0.0))
                    throw ModelCorruptError("covariance is not positive definite");
                log_det_half += std::log(lower(i, i));
            }
            factors_.push_back(lower);
            log_norm_.push_back(-0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi) - log_det_half);
        }
        if (std::abs(prior_sum - 1.0) > 1e-9)
            throw ModelCorruptError("class priors do not sum to one");
        if (!info_.labels.empty() && info_.labels.size() != classes_.size())
            throw ModelCorruptError("label count differs from class count");
        if (!info_.frequencies.empty() && static_cast<Eigen::Index>(info_.frequencies.size()) != d)
            throw ModelCorruptError("frequency count differs from model dimension");
    }

    const ModelInfo& info() const { return info_; }
    const std::vector<GaussianClass>& classes() const { return classes_; }
    double epsilon() const { return epsilon_; }
    std::size_t n_classes() const { return classes_.size(); }
    std::size_t dimension() const { return static_cast<std::size_t>(classes_.front().mean.size()); }

    /// Cholesky factor L with L L^T = Sigma_c.
    const Eigen::MatrixXd& cholesky(std::size_t c) const { return factors_.at(c); }

    double log_density(const FeatureVector& x, std::size_t c) const {
        check_dimension(x);
        const Eigen::VectorXd diff = x - classes_.at(c).mean;
        const Eigen::VectorXd y = factors_[c].triangularView<Eigen::Lower>().solve(diff);
        return log_norm_[c] - 0.5 * y.squaredNorm();
    }

    double density(const FeatureVector& x, std::size_t c) const { return std::exp(log_density(x, c)); }

    bool operator==(const ClassModel& o) const {
        return info_ == o.info_ && classes_ == o.classes_ && epsilon_ == o.epsilon_;
    }

private:
    void check_dimension(const FeatureVector& x) const {
        if (static_cast<std::size_t>(x.size()) != dimension())
            throw RangeError("feature dimension " + std::to_string(x.size()) + " does not match model dimension " +
                             std::to_string(dimension()));
    }

    ModelInfo info_;
    std::vector<GaussianClass> classes_;
    double epsilon_;
    std::vector<Eigen::MatrixXd> factors_;
    std::vector<double> log_norm_;
};

/// Per-class mean and maximum-likelihood covariance (divisor N_c) plus an
/// epsilon * I ridge; equal priors. Rows of `features` are samples.
inline ClassModel fit(const Eigen::MatrixXd& features, std::span<const int> labels, std::size_t n_classes,
                      double epsilon, ModelInfo info = {}) {
    if (static_cast<std::size_t>(features.rows()) != labels.size())
        throw RangeError("feature rows and labels differ in length");
    if (n_classes == 0)
        throw InsufficientDataError("no classes to fit");
    if (!(epsilon >= 0.0))
        throw RangeError("ridge must be non-negative");
    const Eigen::Index d = features.cols();

    std::vector<Eigen::Index> counts(n_classes, 0);
    std::vector<Eigen::VectorXd> sums(n_classes, Eigen::VectorXd::Zero(d));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int c = labels[i];
        if (c < 0 || static_cast<std::size_t>(c) >= n_classes)
            throw RangeError("label " + std::to_string(c) + " outside the task's label set");
        ++counts[static_cast<std::size_t>(c)];
        sums[static_cast<std::size_t>(c)] += features.row(static_cast<Eigen::Index>(i)).transpose();
    }
    for (std::size_t c = 0; c < n_classes; ++c)
        if (counts[c] < 2)
            throw InsufficientDataError("class " + std::to_string(c) + " has " + std::to_string(counts[c]) +
                                        " samples; at least 2 are required");

    std::vector<GaussianClass> classes(n_classes);
    for (std::size_t c = 0; c < n_classes; ++c) {
        classes[c].mean = sums[c] / static_cast<double>(counts[c]);
        classes[c].covariance = Eigen::MatrixXd::Zero(d, d);
        classes[c].prior = 1.0 / static_cast<double>(n_classes);
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto& cls = classes[static_cast<std::size_t>(labels[i])];
        const Eigen::VectorXd diff = features.row(static_cast<Eigen::Index>(i)).transpose() - cls.mean;
        cls.covariance.selfadjointView<Eigen::Lower>().rankUpdate(diff);
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
        Eigen::MatrixXd& cov = classes[c].covariance;
        cov = cov.selfadjointView<Eigen::Lower>();
        cov /= static_cast<double>(counts[c]);
        cov.diagonal().array() += epsilon;
    }
    return ClassModel(std::move(info), std::move(classes), epsilon);
}

inline double class_conditional_density(const ClassModel& model, const FeatureVector& x, std::size_t c) {
    return model.density(x, c);
}

/// Bayes' rule in log space with log-sum-exp normalization.
inline Posterior posterior(const ClassModel& model, const FeatureVector& x) {
    const std::size_t n = model.n_classes();
    std::vector<double> logp(n);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n; ++c) {
        logp[c] = model.log_density(x, c) + std::log(model.classes()[c].prior);
        top = std::max(top, logp[c]);
    }
    double total = 0.0;
    for (double& v : logp) {
        v = std::exp(v - top);
        total += v;
    }
    for (double& v : logp)
        v /= total;
    return Posterior{std::move(logp)};
}

inline Posterior average_posteriors(std::span<const Posterior> posteriors) {
    if (posteriors.empty())
        throw InsufficientDataError("no posteriors to average");
    const std::size_t n = posteriors.front().size();
    std::vector<double> mean(n, 0.0);
    for (const auto& p : posteriors) {
        if (p.size() != n)
            throw RangeError("posteriors over different class counts");
        for (std::size_t c = 0; c < n; ++c)
            mean[c] += p.probs[c];
    }
    for (double& v : mean)
        v /= static_cast<double>(posteriors.size());
    return Posterior{std::move(mean)};
}

/// Index of the largest probability; ties go to the lowest index.
inline std::size_t map_class(const Posterior& post) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < post.probs.size(); ++c)
        if (post.probs[c] > post.probs[best])
            best = c;
    return best;
}

/// Ridge magnitude used throughout: `relative` times the mean within-class
/// variance of the given feature columns, floored so it is never zero.
inline double ridge_from_variances(std::span<const double> variances, double relative, double floor = 1e-12) {
    double mean = 0.0;
    for (double v : variances)
        mean += v;
    if (!variances.empty())
        mean /= static_cast<double>(variances.size());
    return std::max(relative * mean, floor);
}

}  // namespace voxclass
