#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <Eigen/LU>

#include "support.hpp"

using namespace voxclass;

namespace {

ClassModel two_class_1d(double m0, double m1, double var) {
    std::vector<GaussianClass> cls(2);
    cls[0] = {Eigen::VectorXd::Constant(1, m0), Eigen::MatrixXd::Constant(1, 1, var), 0.5};
    cls[1] = {Eigen::VectorXd::Constant(1, m1), Eigen::MatrixXd::Constant(1, 1, var), 0.5};
    return ClassModel(ModelInfo{}, cls, 0.0);
}

// Direct Gaussian density with an explicit inverse and determinant.
double brute_density(const GaussianClass& g, const Eigen::VectorXd& x) {
    const auto d = static_cast<double>(x.size());
    const Eigen::VectorXd diff = x - g.mean;
    const double q = diff.dot(g.covariance.inverse() * diff);
    return std::exp(-0.5 * q) / std::sqrt(std::pow(2 * std::numbers::pi, d) * g.covariance.determinant());
}

}  // namespace

TEST(Gda, StandardNormalDensityAtOneSigma) {
    // Oracle: N(1; 0, 1) = exp(-1/2) / sqrt(2 pi); in 2-D iid at (1,1): exp(-1) / (2 pi).
    const auto m = two_class_1d(0, 5, 1.0);
    EXPECT_NEAR(m.density(Eigen::VectorXd::Constant(1, 1.0), 0), std::exp(-0.5) / std::sqrt(2 * std::numbers::pi),
                1e-15);
    std::vector<GaussianClass> cls(2);
    cls[0] = {Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2), 0.5};
    cls[1] = {Eigen::VectorXd::Ones(2), Eigen::MatrixXd::Identity(2, 2), 0.5};
    const ClassModel m2(ModelInfo{}, cls, 0.0);
    EXPECT_NEAR(class_conditional_density(m2, Eigen::VectorXd::Ones(2), 0), 0.05854983152431917, 1e-15);
}

TEST(Gda, PosteriorLogisticOracle) {
    // Equal-variance classes at -1 and +1: P(+ | x=1) = 1 / (1 + e^-2).
    const auto m = two_class_1d(-1, 1, 1.0);
    const auto p = posterior(m, Eigen::VectorXd::Constant(1, 1.0));
    EXPECT_NEAR(p.probs[1], 1.0 / (1.0 + std::exp(-2.0)), 1e-14);
    EXPECT_NEAR(p.probs[1], 0.8807970779778823, 1e-14);
    EXPECT_EQ(map_class(p), 1u);
}

TEST(Gda, PosteriorMatchesBruteForce) {
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
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
            g.covariance = a * a.transpose() + 0.3 * Eigen::MatrixXd::Identity(d, d);
            g.prior = rng.uniform(0.2, 1.0);
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
        double total = 0.0;
        for (std::size_t k = 0; k < c; ++k) {
            EXPECT_NEAR(p.probs[k], joint[k] / z, 1e-10 * std::max(1e-300, joint[k] / z) + 1e-15);
            total += p.probs[k];
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
    }
}

TEST(Gda, PosteriorStableFarFromMeans) {
    const auto m = two_class_1d(-1, 1, 0.01);
    const auto p = posterior(m, Eigen::VectorXd::Constant(1, 400.0));
    EXPECT_TRUE(std::isfinite(p.probs[0]));
    EXPECT_DOUBLE_EQ(p.probs[1], 1.0);
}

TEST(Gda, FitRecoversMlEstimates) {
    Eigen::MatrixXd x(6, 2);
    x << 0, 0, 2, 0, 1, 3,   //
        10, 10, 12, 10, 11, 13;
    const std::vector<int> y = {0, 0, 0, 1, 1, 1};
    const auto m = fit(x, y, 2, 0.5);
    EXPECT_NEAR(m.classes()[0].mean[0], 1.0, 1e-15);
    EXPECT_NEAR(m.classes()[0].mean[1], 1.0, 1e-15);
    // ML covariance (divisor 3) plus ridge 0.5 on the diagonal.
    EXPECT_NEAR(m.classes()[0].covariance(0, 0), 2.0 / 3.0 + 0.5, 1e-14);
    EXPECT_NEAR(m.classes()[0].covariance(1, 1), 6.0 / 3.0 + 0.5, 1e-14);
    EXPECT_NEAR(m.classes()[0].covariance(0, 1), 0.0, 1e-14);
    EXPECT_DOUBLE_EQ(m.classes()[1].prior, 0.5);
    EXPECT_EQ(m.epsilon(), 0.5);
}

TEST(Gda, FitErrors) {
    Eigen::MatrixXd x(3, 1);
    x << 0, 1, 2;
    const std::vector<int> y = {0, 0, 1};
    EXPECT_THROW(fit(x, y, 2, 1e-6), InsufficientDataError);
    const std::vector<int> bad = {0, 0, 3};
    EXPECT_THROW(fit(x, bad, 2, 1e-6), RangeError);
    // Constant feature without ridge: singular covariance.
    Eigen::MatrixXd c(4, 1);
    c << 1, 1, 2, 2;
    const std::vector<int> y2 = {0, 0, 1, 1};
    EXPECT_THROW(fit(c, y2, 2, 0.0), ModelCorruptError);
    EXPECT_NO_THROW(fit(c, y2, 2, 1e-6));
}

TEST(Gda, CorruptParametersRejected) {
    std::vector<GaussianClass> cls(2);
    cls[0] = {Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Constant(1, 1, -1.0), 0.5};
    cls[1] = {Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Constant(1, 1, 1.0), 0.5};
    EXPECT_THROW(ClassModel(ModelInfo{}, cls, 0.0), ModelCorruptError);
    cls[0].covariance(0, 0) = 1.0;
    cls[0].prior = 0.7;
    EXPECT_THROW(ClassModel(ModelInfo{}, cls, 0.0), ModelCorruptError);
}

TEST(Gda, AverageAndMapTies) {
    const std::vector<Posterior> ps = {Posterior{{0.2, 0.8}}, Posterior{{0.8, 0.2}}};
    const auto avg = average_posteriors(ps);
    EXPECT_DOUBLE_EQ(avg.probs[0], 0.5);
    EXPECT_EQ(map_class(avg), 0u);  // tie -> lowest index
    EXPECT_THROW(average_posteriors(std::span<const Posterior>{}), InsufficientDataError);
}

TEST(Gda, AveragedPosteriorStaysNormalized) {
    Rng rng(2);
    std::vector<Posterior> ps;
    for (int i = 0; i < 10; ++i) {
        std::vector<double> p(4);
        double s = 0;
        for (double& v : p)
            s += v = rng.uniform();
        for (double& v : p)
            v /= s;
        ps.push_back({p});
    }
    const auto avg = average_posteriors(ps);
    double s = 0;
    for (double v : avg.probs)
        s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Gda, FeatureExtraction) {
    LogGrid g;
    auto s = vt::flat_spectrum(g, -3.0);
    s.log_intensities[10] = -1.0;
    const FrequencySet f(g, {10, 20});
    const auto x = extract_features(s, f);
    EXPECT_EQ(x[0], -1.0);
    EXPECT_EQ(x[1], -3.0);
    const auto lin = extract_features(s, f, FeatureScale::linear);
    EXPECT_NEAR(lin[0], std::exp(-1.0), 1e-15);
    LogGrid other;
    other.n_points = 100;
    EXPECT_THROW(extract_features(s, FrequencySet(other, {1}), FeatureScale::log), GridError);
}

TEST(FrequencySetTest, SortedAndValidated) {
    LogGrid g;
    const FrequencySet f(g, {30, 10, 20});
    EXPECT_EQ(f.indices(), (std::vector<std::size_t>{10, 20, 30}));
    EXPECT_THROW(FrequencySet(g, {1, 1}), GridError);
    EXPECT_THROW(FrequencySet(g, {2000}), GridError);
}
