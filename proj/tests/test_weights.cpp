#include "mwgrad/weights.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mwgrad;

namespace {

EstimateBatch random_batch(std::mt19937_64& rng, Eigen::Index K, Eigen::Index m, Eigen::Index d) {
    EstimateBatch b;
    for (Eigen::Index k = 0; k < K; ++k) {
        b.slices.push_back(oracle::random_matrix(rng, m, d));
    }
    return b;
}

oracle::Vec to_vec(const Vector& v) { return oracle::Vec(v.data(), v.data() + v.size()); }

Matrix mat2(double a, double b, double c, double d) {
    Matrix g(2, 2);
    g << a, b, c, d;
    return g;
}

} // namespace

TEST(GramMatrix, Examples) {
    EstimateBatch one;
    one.slices.push_back(Matrix::Constant(3, 1, 2.0));
    EXPECT_DOUBLE_EQ(gram_matrix(one)(0, 0), 4.0);

    std::mt19937_64 rng(1);
    EstimateBatch dup;
    dup.slices = {oracle::random_matrix(rng, 5, 2)};
    dup.slices.push_back(dup.slices.front());
    const Matrix g = gram_matrix(dup);
    EXPECT_EQ(g(0, 0), g(0, 1));
    EXPECT_EQ(g(0, 0), g(1, 1));
}

TEST(GramMatrix, MatchesTripleLoop) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const auto b = random_batch(rng, 3, 7, 2);
        EXPECT_LE(oracle::max_abs_diff(gram_matrix(b), oracle::gram(b.slices)), 1e-12);
    }
}

TEST(SolveSimplexQp, Examples) {
    EXPECT_EQ(solve_simplex_qp(Matrix::Constant(1, 1, 3.0)).weights[0], 1.0);
    const auto eye = solve_simplex_qp(Matrix::Identity(2, 2));
    EXPECT_DOUBLE_EQ(eye.weights[0], 0.5);
    EXPECT_DOUBLE_EQ(eye.weights[1], 0.5);

    const Matrix g = mat2(4, 1, 1, 2);
    const auto sol = solve_simplex_qp(g);
    EXPECT_NEAR(sol.weights[0], 0.25, 1e-15);
    EXPECT_NEAR(sol.weights[1], 0.75, 1e-15);
    EXPECT_NEAR(simplex_objective(g, sol.weights.w), 0.875, 1e-15);

    // grid over w1 in {0, 1e-4, ..., 1}
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 10000; ++i) {
        best = std::min(best, oracle::qp_objective(g, {i * 1e-4, 1.0 - i * 1e-4}));
    }
    EXPECT_NEAR(simplex_objective(g, sol.weights.w), best, 1e-4);
}

TEST(SolveSimplexQp, DegenerateInputs) {
    const auto zero = solve_simplex_qp(Matrix::Zero(4, 4));
    EXPECT_TRUE(zero.weights.w.isApprox(Vector::Constant(4, 0.25)));
    EXPECT_TRUE(zero.converged);
    // K = 2 with a tiny denominator falls back to the midpoint.
    const auto flat = solve_simplex_qp(Matrix::Constant(2, 2, 1.0));
    EXPECT_EQ(flat.weights[0], 0.5);
}

TEST(SolveSimplexQp, MatchesBruteForceK4) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix g = oracle::random_psd(rng, 4, 1 + trial % 4);
        const auto sol = solve_simplex_qp(g);
        EXPECT_TRUE(sol.converged);
        EXPECT_NEAR(sol.weights.w.sum(), 1.0, 1e-12);
        EXPECT_TRUE((sol.weights.w.array() >= 0.0).all());
        const double ref = oracle::brute_force_simplex_min(g, 40);
        EXPECT_LE(simplex_objective(g, sol.weights.w), ref + 1e-4);
        EXPECT_GE(simplex_objective(g, sol.weights.w), ref - 1e-4);
    }
}

TEST(SolveSimplexQp, OptimalityCertificate) {
    std::mt19937_64 rng(4);
    const QpOptions opts;
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::Index K = 2 + trial % 5;
        const Matrix g = oracle::random_psd(rng, K, 1 + trial % K);
        const Vector w = solve_simplex_qp(g, opts).weights.w;
        const Vector gw = g * w;
        EXPECT_GE(gw.minCoeff(), w.dot(gw) - opts.tol - 1e-12) << "K=" << K;
    }
}

TEST(SolveSimplexQp, ScaleCovariance) {
    std::mt19937_64 rng(5);
    const QpOptions opts;
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix g = oracle::random_psd(rng, 4, 1 + trial % 4);
        const double c = std::pow(10.0, static_cast<double>(trial % 7) - 3.0);
        const Matrix cg = c * g;
        const Vector w = solve_simplex_qp(cg, opts).weights.w;
        const double opt_c = oracle::exact_simplex_min(cg);
        EXPECT_LE(simplex_objective(cg, w) - opt_c, c * opts.tol) << "c=" << c;
    }
}

TEST(SolveSimplexQp, MatchesExactActiveSetOracle) {
    std::mt19937_64 rng(15);
    for (int trial = 0; trial < 300; ++trial) {
        const Eigen::Index K = 2 + trial % 4;
        const Matrix g = oracle::random_psd(rng, K, 1 + (trial / 4) % K);
        const auto sol = solve_simplex_qp(g);
        const double exact = oracle::exact_simplex_min(g);
        EXPECT_LE(std::abs(simplex_objective(g, sol.weights.w) - exact), 1e-10) << "K=" << K;
    }
}

TEST(SolveSimplexQp, DetectsParetoStationarity) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 30; ++trial) {
        // D_3 = -(a D_1 + b D_2) / c makes (a, b, c) / (a + b + c) a zero combination.
        const Matrix d1 = oracle::random_matrix(rng, 8, 2);
        const Matrix d2 = oracle::random_matrix(rng, 8, 2);
        const double a = 0.2 + 0.1 * (trial % 5);
        const double b = 0.3;
        const double c = 0.5;
        EstimateBatch batch;
        batch.slices = {d1, d2, Matrix(-(a * d1 + b * d2) / c)};
        const QpOptions opts;
        const auto sol = solve_simplex_qp(gram_matrix(batch), opts);
        EXPECT_LE(simplex_objective(gram_matrix(batch), sol.weights.w), opts.tol);
    }
}

TEST(SolveSimplexQp, ClosedFormAgreesWithFrankWolfe) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const Matrix g = oracle::random_psd(rng, 2, 1 + trial % 2);
        const auto closed = solve_simplex_qp(g);
        const auto fw = frank_wolfe_simplex_qp(g);
        EXPECT_NEAR(simplex_objective(g, closed.weights.w), simplex_objective(g, fw.weights.w), 1e-6);
    }
}

TEST(SolveSimplexQp, ReportsNonConvergence) {
    std::mt19937_64 rng(8);
    const Matrix g = oracle::random_psd(rng, 5, 5);
    const auto sol = solve_simplex_qp(g, {1e-300, 1});
    EXPECT_FALSE(sol.converged);
    EXPECT_EQ(sol.iterations, 1u);
    EXPECT_NEAR(sol.weights.w.sum(), 1.0, 1e-12);
}

TEST(SolveSimplexQp, Errors) {
    EXPECT_THROW(solve_simplex_qp(mat2(1, 0.5, 0, 1)), std::invalid_argument);
    EXPECT_THROW(solve_simplex_qp(mat2(1, 0, 0, std::nan(""))), std::invalid_argument);
    EXPECT_THROW(solve_simplex_qp(Matrix::Zero(2, 3)), std::invalid_argument);
    EXPECT_THROW(solve_simplex_qp(Matrix(0, 0)), std::invalid_argument);
    EXPECT_THROW(solve_simplex_qp(Matrix::Identity(2, 2), {0.0, 10}), std::invalid_argument);
}

TEST(SolveSimplexQp, TiesGoToLowestIndex) {
    // Every vertex of a rank-one G = 11^T is optimal; the solver must be deterministic.
    const auto a = solve_simplex_qp(Matrix::Ones(3, 3));
    const auto b = solve_simplex_qp(Matrix::Ones(3, 3));
    EXPECT_TRUE((a.weights.w.array() == b.weights.w.array()).all());
}

TEST(AggregateDirection, Examples) {
    std::mt19937_64 rng(9);
    EstimateBatch one;
    one.slices = {oracle::random_matrix(rng, 4, 3)};
    EXPECT_TRUE((aggregate_direction(one, SimplexWeights{Vector::Ones(1)}).array() == one[0].array()).all());

    EstimateBatch opposite;
    opposite.slices = {one[0], Matrix(-one[0])};
    EXPECT_TRUE(aggregate_direction(opposite, SimplexWeights{Vector::Constant(2, 0.5)}).isZero(0.0));

    EXPECT_THROW(aggregate_direction(opposite, SimplexWeights{Vector::Ones(1)}), std::invalid_argument);
}

TEST(AggregateDirection, MatchesLoopOracle) {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        const auto b = random_batch(rng, 4, 9, 3);
        Vector w = oracle::random_matrix(rng, 4, 1).cwiseAbs();
        w /= w.sum();
        EXPECT_LE(oracle::max_abs_diff(aggregate_direction(b, SimplexWeights{w}), oracle::aggregate(b.slices, to_vec(w))),
                  1e-12);
    }
}
