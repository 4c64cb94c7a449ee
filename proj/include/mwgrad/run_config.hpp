#ifndef MWGRAD_RUN_CONFIG_HPP
#define MWGRAD_RUN_CONFIG_HPP

#include "mwgrad/core.hpp"
#include "mwgrad/dynamics.hpp"
#include "mwgrad/estimators.hpp"
#include "mwgrad/objectives.hpp"
#include "mwgrad/weights.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>

namespace mwgrad {

enum class BandwidthRule { Fixed, Median };

/// Everything one trial needs. Objectives are shared read-only between trials.
struct RunConfig {
    Method method = Method::MWGraD_SVGD;
    std::size_t num_particles = 50;
    std::size_t dim = 2;
    double step_size = 1e-3;
    std::size_t iterations = 1000;
    std::uint64_t seed = 0;
    double bandwidth = 1.0;
    BandwidthRule bandwidth_rule = BandwidthRule::Fixed;
    MomentumSchedule schedule = MomentumSchedule::convex();
    AccelUpdateOrder accel_order = AccelUpdateOrder::SemiImplicit;
    std::shared_ptr<const ObjectiveSet> objectives;

    std::size_t log_stride = 1;
    SvgdOptions svgd;
    QpOptions qp;
    // Replaces the Gaussian draw when set (m x d).
    std::optional<Matrix> initial_positions;

    /// Entropy-free objective sets always use the potential-only estimator.
    EstimatorKind estimator() const {
        if (objectives && !objectives->include_entropy()) {
            return EstimatorKind::PotentialOnly;
        }
        return estimator_of(method);
    }

    void validate() const {
        if (num_particles < 1 || dim < 1) {
            throw std::invalid_argument("RunConfig: num_particles and dim must be at least 1");
        }
        if (!(step_size > 0.0) || !std::isfinite(step_size)) {
            throw std::invalid_argument("RunConfig: step_size must be positive");
        }
        if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
            throw std::invalid_argument("RunConfig: bandwidth must be positive");
        }
        if (log_stride < 1) {
            throw std::invalid_argument("RunConfig: log_stride must be at least 1");
        }
        if (!objectives) {
            throw std::invalid_argument("RunConfig: objectives missing");
        }
        if (objectives->dim() != static_cast<Eigen::Index>(dim)) {
            throw std::invalid_argument("RunConfig: objectives dimension differs from dim");
        }
        if (initial_positions && (initial_positions->rows() != static_cast<Eigen::Index>(num_particles) ||
                                  initial_positions->cols() != static_cast<Eigen::Index>(dim))) {
            throw std::invalid_argument("RunConfig: initial_positions shape differs from (num_particles, dim)");
        }
        if (is_accelerated(method) && schedule.regime() == MomentumRegime::StronglyConvex &&
            *schedule.beta() * step_size >= 1.0) {
            throw std::invalid_argument("RunConfig: beta * step_size must be below 1");
        }
    }
};

} // namespace mwgrad

#endif
