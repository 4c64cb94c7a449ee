#include "mwgrad/diagnostics.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mwgrad;

namespace {

QuadraticTarget quad1(double c) { return QuadraticTarget(Vector::Constant(1, c), Matrix::Identity(1, 1)); }

SearchBox box1(double lo, double hi) { return SearchBox{Vector::Constant(1, lo), Vector::Constant(1, hi)}; }

std::vector<TimePoint> sample(double t0, double t1, int n, const std::function<double(double)>& f) {
    std::vector<TimePoint> out;
    for (int i = 0; i < n; ++i) {
        const double t = t0 + (t1 - t0) * i / (n - 1);
        out.push_back({t, f(t)});
    }
    return out;
}

} // namespace

TEST(GradNorm, Examples) {
    EstimateBatch zero;
    zero.slices = {Matrix::Zero(4, 2), Matrix::Zero(4, 2)};
    EXPECT_EQ(grad_norm(zero, SimplexWeights{Vector::Constant(2, 0.5)}), 0.0);

    EstimateBatch unit;
    unit.slices = {Matrix::Identity(2, 2)};
    EXPECT_DOUBLE_EQ(grad_norm(unit, SimplexWeights{Vector::Ones(1)}), 1.0);
    EXPECT_THROW(grad_norm(unit, SimplexWeights{Vector::Constant(2, 0.5)}), std::invalid_argument);
}

TEST(GradNorm, MatchesLoopOracle) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 30; ++trial) {
        EstimateBatch b;
        for (int k = 0; k < 3; ++k) {
            b.slices.push_back(oracle::random_matrix(rng, 11, 2));
        }
        Vector w = oracle::random_matrix(rng, 3, 1).cwiseAbs();
        w /= w.sum();
        EXPECT_NEAR(grad_norm(b, SimplexWeights{w}), oracle::grad_norm(b.slices, {w[0], w[1], w[2]}), 1e-12);
    }
}

TEST(GradNorm, PermutationAndRotationInvariance) {
    std::mt19937_64 rng(2);
    EstimateBatch b;
    b.slices = {oracle::random_matrix(rng, 8, 3), oracle::random_matrix(rng, 8, 3)};
    const SimplexWeights w{Eigen::Vector2d(0.3, 0.7)};
    const double base = grad_norm(b, w);

    const Eigen::HouseholderQR<Matrix> qr(oracle::random_matrix(rng, 3, 3));
    const Matrix q = qr.householderQ();
    EstimateBatch rotated;
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(8);
    perm.setIdentity();
    std::shuffle(perm.indices().data(), perm.indices().data() + 8, rng);
    EstimateBatch permuted;
    for (const auto& s : b.slices) {
        rotated.slices.push_back(s * q);
        permuted.slices.push_back(perm * s);
    }
    EXPECT_NEAR(grad_norm(rotated, w), base, 1e-12);
    EXPECT_NEAR(grad_norm(permuted, w), base, 1e-12);
}

TEST(MeritEuclidean, Examples) {
    const std::vector<QuadraticTarget> one{quad1(0.0)};
    EXPECT_NEAR(merit_euclidean(Vector::Constant(1, 2.0), one, box1(-5, 5), 1e-4), 2.0, 1e-12);

    const std::vector<QuadraticTarget> two{quad1(1.0), quad1(-1.0)};
    EXPECT_EQ(merit_euclidean(Vector::Constant(1, 1.0), two, box1(-5, 5), 1e-4), 0.0);
    EXPECT_NEAR(merit_euclidean(Vector::Constant(1, 3.0), two, box1(-5, 5), 1e-4), 2.0, 1e-9);
}

TEST(MeritEuclidean, ZeroOnTheParetoSet) {
    const std::vector<QuadraticTarget> two{quad1(1.0), quad1(-1.0)};
    // For x in [-1, 1] the exact merit is 0; grid error is bounded by res * |f'| <= 2e-4.
    for (int i = 0; i <= 40; ++i) {
        const double x = -1.0 + i * 0.05;
        EXPECT_LE(merit_euclidean(Vector::Constant(1, x), two, box1(-5, 5), 1e-3), 2e-3);
    }
}

TEST(MeritEuclidean, NonNegativeAndMatchesClosedForm) {
    const std::vector<QuadraticTarget> two{quad1(1.0), quad1(-1.0)};
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(-4.5, 4.5);
    for (int i = 0; i < 50; ++i) {
        const double x = unif(rng);
        const double m = merit_euclidean(Vector::Constant(1, x), two, box1(-5, 5), 1e-3);
        EXPECT_GE(m, 0.0);
        // Outside [-1, 1] the sup is attained at the nearer center q = sign(x).
        const double s = x > 0 ? 1.0 : -1.0;
        const double exact = std::abs(x) <= 1.0 ? 0.0
                                                 : std::min(0.5 * (x - 1) * (x - 1) - 0.5 * (s - 1) * (s - 1),
                                                            0.5 * (x + 1) * (x + 1) - 0.5 * (s + 1) * (s + 1));
        EXPECT_NEAR(m, exact, 1e-2 * std::max(1.0, std::abs(x)));
    }
}

TEST(MeritEuclidean, TwoDimensionalGrid) {
    const std::vector<QuadraticTarget> one{QuadraticTarget(Eigen::Vector2d(0.5, -0.5), Matrix::Identity(2, 2))};
    const SearchBox box{Eigen::Vector2d(-2, -2), Eigen::Vector2d(2, 2)};
    EXPECT_NEAR(merit_euclidean(Eigen::Vector2d(1.5, 0.5), one, box, 0.01), 1.0, 1e-9);
}

TEST(MeritEuclidean, LargeGridsAreEvaluatedWithoutTable) {
    const std::vector<QuadraticTarget> one{QuadraticTarget(Eigen::Vector2d(0.5, -0.5), Matrix::Identity(2, 2))};
    const MeritGrid grid(one, SearchBox{Eigen::Vector2d(-1.5, -1.5), Eigen::Vector2d(1.5, 1.5)}, 1e-3);
    ASSERT_GT(grid.points(), MeritGrid::kMaxTableEntries);
    EXPECT_NEAR(grid(Eigen::Vector2d(1.5, 0.5)), 1.0, 1e-9);
}

TEST(MeritEuclidean, ReusedGridMatchesOneShotEvaluation) {
    const std::vector<QuadraticTarget> two{quad1(1.0), quad1(-1.0)};
    const MeritGrid grid(two, box1(-5, 5), 1e-3);
    for (double x : {-4.0, -1.2, 0.0, 0.7, 2.5}) {
        EXPECT_EQ(grid(Vector::Constant(1, x)), merit_euclidean(Vector::Constant(1, x), two, box1(-5, 5), 1e-3));
    }
}

TEST(MeritEuclidean, Errors) {
    EXPECT_THROW(merit_euclidean(Vector::Zero(1), {}, box1(-1, 1), 0.1), std::invalid_argument);
    const std::vector<QuadraticTarget> one{quad1(3.0)};
    EXPECT_THROW(merit_euclidean(Vector::Zero(1), one, box1(-1, 1), 0.1), std::invalid_argument);
    EXPECT_THROW(merit_euclidean(Vector::Zero(1), one, box1(-5, 5), 0.0), std::invalid_argument);
    EXPECT_THROW(merit_euclidean(Vector::Zero(2), one, box1(-5, 5), 0.1), std::invalid_argument);
}

TEST(FitRateSlope, PowerLaws) {
    EXPECT_NEAR(fit_rate_slope(sample(10, 100, 91, [](double t) { return 1.0 / t; }), {10, 100}), -1.0, 1e-6);
    EXPECT_NEAR(fit_rate_slope(sample(10, 100, 91, [](double t) { return 5.0 / (t * t); }), {10, 100}), -2.0, 1e-6);
}

TEST(FitRateSlope, ExponentialLooksSteep) {
    EXPECT_LT(fit_rate_slope(sample(1, 5, 41, [](double t) { return std::exp(-t); }), {1, 5}), -2.0);
}

TEST(FitRateSlope, WindowAndPositivity) {
    auto s = sample(1, 100, 100, [](double t) { return 1.0 / t; });
    s.push_back({50.5, 0.0});   // non-positive values are skipped
    s.push_back({200.0, 1e9});  // outside the window
    EXPECT_NEAR(fit_rate_slope(s, {10, 100}), -1.0, 1e-9);
    EXPECT_THROW(fit_rate_slope(sample(-1, 1, 20, [](double) { return 1.0; }), {-1, 1}), std::invalid_argument);
}

TEST(FitExpRate, Examples) {
    EXPECT_NEAR(fit_exp_rate(sample(0, 5, 51, [](double t) { return std::exp(-2 * t); }), {0, 5}), -2.0, 1e-6);
    EXPECT_NEAR(fit_exp_rate(sample(0, 5, 51, [](double t) { return 3 * std::exp(-0.5 * t); }), {0, 5}), -0.5, 1e-6);
    EXPECT_NEAR(fit_exp_rate(sample(0, 20, 201, [](double t) { return std::exp(-t) * (1 + 0.01 * std::sin(t)); }),
                             {0, 20}),
                -1.0, 0.02);
}

TEST(Fits, InsufficientData) {
    const auto few = sample(1, 9, 9, [](double t) { return 1.0 / t; });
    EXPECT_THROW(fit_rate_slope(few, {1, 9}), InsufficientDataError);
    EXPECT_THROW(fit_exp_rate(few, {1, 9}), InsufficientDataError);
    const auto zeros = sample(1, 100, 50, [](double) { return 0.0; });
    EXPECT_THROW(fit_exp_rate(zeros, {1, 100}), InsufficientDataError);
}
