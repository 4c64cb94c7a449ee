#ifndef MWGRAD_CORE_HPP
#define MWGRAD_CORE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mwgrad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Particle positions and velocities, one particle per row.
struct ParticleEnsemble {
    Matrix positions;
    Matrix velocities;
    std::size_t iteration = 0;

    Eigen::Index size() const { return positions.rows(); }
    Eigen::Index dim() const { return positions.cols(); }
};

/// A point of the probability simplex.
struct SimplexWeights {
    Vector w;

    Eigen::Index size() const { return w.size(); }
    double operator[](Eigen::Index k) const { return w[k]; }
};

enum class MomentumRegime { Convex, StronglyConvex };

class MomentumSchedule {
public:
    static MomentumSchedule convex() { return MomentumSchedule{MomentumRegime::Convex, std::nullopt}; }

    static MomentumSchedule strongly_convex(double beta) {
        if (!(beta > 0.0) || !std::isfinite(beta)) {
            throw std::invalid_argument("momentum schedule: beta must be positive and finite");
        }
        return MomentumSchedule{MomentumRegime::StronglyConvex, beta};
    }

    MomentumRegime regime() const { return regime_; }
    std::optional<double> beta() const { return beta_; }

private:
    MomentumSchedule(MomentumRegime regime, std::optional<double> beta) : regime_(regime), beta_(beta) {}

    MomentumRegime regime_;
    std::optional<double> beta_;
};

enum class Method { MWGraD_SVGD, MWGraD_Blob, AMWGraD_SVGD, AMWGraD_Blob };

enum class EstimatorKind { SVGD, Blob, PotentialOnly };

inline bool is_accelerated(Method m) { return m == Method::AMWGraD_SVGD || m == Method::AMWGraD_Blob; }

inline EstimatorKind estimator_of(Method m) {
    return (m == Method::MWGraD_SVGD || m == Method::AMWGraD_SVGD) ? EstimatorKind::SVGD : EstimatorKind::Blob;
}

inline std::string_view to_string(Method m) {
    switch (m) {
    case Method::MWGraD_SVGD: return "MWGraD-SVGD";
    case Method::MWGraD_Blob: return "MWGraD-Blob";
    case Method::AMWGraD_SVGD: return "AMWGraD-SVGD";
    case Method::AMWGraD_Blob: return "AMWGraD-Blob";
    }
    return "?";
}

inline std::optional<Method> parse_method(std::string_view s) {
    for (Method m : {Method::MWGraD_SVGD, Method::MWGraD_Blob, Method::AMWGraD_SVGD, Method::AMWGraD_Blob}) {
        if (s == to_string(m)) {
            return m;
        }
    }
    return std::nullopt;
}

// Random streams
//
// Every trial draws from std::mt19937_64, whose output sequence is fixed by
// the C++ standard. The 64-bit engine seed for (seed, stream) is derived with
// two rounds of the SplitMix64 finalizer so that adjacent trial indices land
// on unrelated states. Normals come from the Box-Muller transform applied to
// 53-bit uniforms; both outputs of a pair are used, cosine branch first.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ (stream + 0x632BE59BD9B4E019ULL));
}

class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed, std::uint64_t stream = 0) : engine_(stream_seed(seed, stream)) {}

    double next() {
        if (cached_) {
            const double z = *cached_;
            cached_.reset();
            return z;
        }
        // u1 in (0, 1] keeps the logarithm finite.
        const double u1 = static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
        const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        cached_ = radius * std::sin(angle);
        return radius * std::cos(angle);
    }

private:
    std::mt19937_64 engine_;
    std::optional<double> cached_;
};

/// Draws m i.i.d. N(0, I_d) particles (row-major fill order) with zero velocities.
inline ParticleEnsemble init_ensemble(std::size_t m, std::size_t d, std::uint64_t seed, std::uint64_t stream = 0) {
    if (m == 0 || d == 0) {
        throw std::invalid_argument("init_ensemble: m and d must be positive");
    }
    const auto rows = static_cast<Eigen::Index>(m);
    const auto cols = static_cast<Eigen::Index>(d);
    NormalStream normal(seed, stream);
    ParticleEnsemble ens{Matrix(rows, cols), Matrix::Zero(rows, cols), 0};
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            ens.positions(i, j) = normal.next();
        }
    }
    return ens;
}

inline bool all_finite(const Matrix& a) { return a.allFinite(); }

} // namespace mwgrad

#endif
