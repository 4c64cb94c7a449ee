#ifndef MWGRAD_DYNAMICS_HPP
#define MWGRAD_DYNAMICS_HPP

#include "mwgrad/core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mwgrad {

/// alpha_n for the accelerated scheme.
///   Convex:          (n - 1) / (n + 2), with alpha_0 = 0
///   StronglyConvex:  (1 - sqrt(beta eta)) / (1 + sqrt(beta eta)), requires beta eta < 1
inline double momentum_coefficient(const MomentumSchedule& schedule, std::size_t n, double eta) {
    if (schedule.regime() == MomentumRegime::Convex) {
        if (n == 0) {
            return 0.0;
        }
        const auto nd = static_cast<double>(n);
        return (nd - 1.0) / (nd + 2.0);
    }
    if (!(eta > 0.0)) {
        throw std::invalid_argument("momentum_coefficient: step size must be positive");
    }
    const double be = *schedule.beta() * eta;
    if (be >= 1.0) {
        throw std::invalid_argument("momentum_coefficient: beta * eta must be below 1");
    }
    const double r = std::sqrt(be);
    return std::clamp((1.0 - r) / (1.0 + r), 0.0, std::nextafter(1.0, 0.0));
}

namespace detail {

inline void check_step_args(const ParticleEnsemble& ens, const Matrix& direction, double eta) {
    if (direction.rows() != ens.positions.rows() || direction.cols() != ens.positions.cols() ||
        ens.velocities.rows() != ens.positions.rows() || ens.velocities.cols() != ens.positions.cols()) {
        throw std::invalid_argument("step: shape mismatch between ensemble and direction");
    }
    if (!(eta > 0.0)) {
        throw std::invalid_argument("step: step size must be positive");
    }
}

} // namespace detail

/// x' = x - eta * direction
inline ParticleEnsemble mwgrad_step(const ParticleEnsemble& ens, const Matrix& direction, double eta) {
    detail::check_step_args(ens, direction, eta);
    ParticleEnsemble next = ens;
    next.positions -= eta * direction;
    ++next.iteration;
    return next;
}

/// x' = x + sqrt(eta) v,  v' = alpha v - sqrt(eta) direction.
/// The position update uses the incoming velocity; direction is evaluated at x.
inline ParticleEnsemble amwgrad_step(const ParticleEnsemble& ens, const Matrix& direction, double eta, double alpha) {
    detail::check_step_args(ens, direction, eta);
    if (!(alpha >= 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("amwgrad_step: momentum coefficient must lie in [0, 1)");
    }
    const double root = std::sqrt(eta);
    ParticleEnsemble next = ens;
    next.positions += root * ens.velocities;
    next.velocities = alpha * ens.velocities - root * direction;
    ++next.iteration;
    return next;
}

/// v' = alpha v - sqrt(eta) direction,  x' = x + sqrt(eta) v'.
/// Same momentum recursion with the position driven by the updated velocity
/// (heavy-ball form x' = x - eta direction + sqrt(eta) alpha v). Direction is
/// still evaluated at x. The step matrix on a quadratic mode lambda has
/// determinant alpha, against alpha + eta lambda for amwgrad_step, so it stays
/// stable once alpha_n approaches 1.
inline ParticleEnsemble amwgrad_step_semi_implicit(const ParticleEnsemble& ens, const Matrix& direction, double eta,
                                                   double alpha) {
    detail::check_step_args(ens, direction, eta);
    if (!(alpha >= 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("amwgrad_step_semi_implicit: momentum coefficient must lie in [0, 1)");
    }
    const double root = std::sqrt(eta);
    ParticleEnsemble next = ens;
    next.velocities = alpha * ens.velocities - root * direction;
    next.positions += root * next.velocities;
    ++next.iteration;
    return next;
}

enum class AccelUpdateOrder {
    // velocity first, then position with the new velocity
    SemiImplicit,
    // position with the old velocity, then velocity
    PositionFirst,
};

inline ParticleEnsemble accelerated_step(const ParticleEnsemble& ens, const Matrix& direction, double eta, double alpha,
                                         AccelUpdateOrder order) {
    return order == AccelUpdateOrder::SemiImplicit ? amwgrad_step_semi_implicit(ens, direction, eta, alpha)
                                                   : amwgrad_step(ens, direction, eta, alpha);
}

} // namespace mwgrad

#endif
