#ifndef MWGRAD_HARNESS_TRIAL_HPP
#define MWGRAD_HARNESS_TRIAL_HPP

#include "mwgrad/core.hpp"
#include "mwgrad/diagnostics.hpp"
#include "mwgrad/dynamics.hpp"
#include "mwgrad/estimators.hpp"
#include "mwgrad/kernels.hpp"
#include "mwgrad/run_config.hpp"
#include "mwgrad/weights.hpp"

#include <functional>

namespace mwgrad {

/// Coordinates beyond this magnitude abort a trial.
inline constexpr double kDivergenceBound = 1e8;

/// What the loop computed at iteration n, before the step is applied.
struct IterationView {
    const ParticleEnsemble& ensemble;
    const EstimateBatch& batch;
    const QpSolution& weights;
    double grad_norm;
};

using IterationObserver = std::function<void(const IterationView&)>;

namespace detail {

inline bool diverged(const ParticleEnsemble& ens) {
    return !ens.positions.allFinite() || !ens.velocities.allFinite() ||
           ens.positions.cwiseAbs().maxCoeff() > kDivergenceBound ||
           ens.velocities.cwiseAbs().maxCoeff() > kDivergenceBound;
}

} // namespace detail

/// Runs MWGraD or A-MWGraD for config.iterations steps on the particle stream
/// (config.seed, trial_index). Each iteration: estimate at x^(n), Gram matrix,
/// simplex weights, GradNorm, then the step. Rows are logged every log_stride
/// iterations and always at the last iteration reached.
inline TrialRecord run_trial(const RunConfig& config, std::size_t trial_index, const IterationObserver& observe = {}) {
    config.validate();
    const ObjectiveSet& objectives = *config.objectives;
    const EstimatorKind kind = config.estimator();

    TrialRecord record;
    record.method = config.method;
    record.step_size = config.step_size;
    record.seed = config.seed;
    record.trial_index = trial_index;

    ParticleEnsemble ens = config.initial_positions
                               ? ParticleEnsemble{*config.initial_positions,
                                                  Matrix::Zero(config.initial_positions->rows(),
                                                               config.initial_positions->cols()),
                                                  0}
                               : init_ensemble(config.num_particles, config.dim, config.seed, trial_index);

    for (std::size_t n = 0;; ++n) {
        const RbfKernel kernel =
            config.bandwidth_rule == BandwidthRule::Median ? median_heuristic_kernel(ens.positions)
                                                           : RbfKernel(config.bandwidth);
        const EstimateBatch batch = estimate(kind, ens, objectives, kernel, config.svgd);
        if (!batch.all_finite()) {
            record.diverged_at = n;
            break;
        }
        const QpSolution qp = solve_simplex_qp(gram_matrix(batch), config.qp);
        const double gn = grad_norm(batch, qp.weights);

        const bool last = n == config.iterations;
        if (last || n % config.log_stride == 0) {
            record.series.push_back(SeriesRow{n, gn, objectives.mean_potentials(ens.positions)});
        }
        if (observe) {
            observe(IterationView{ens, batch, qp, gn});
        }
        if (last) {
            break;
        }

        const Matrix direction = aggregate_direction(batch, qp.weights);
        if (is_accelerated(config.method)) {
            const double alpha = momentum_coefficient(config.schedule, n, config.step_size);
            ens = accelerated_step(ens, direction, config.step_size, alpha, config.accel_order);
        } else {
            ens = mwgrad_step(ens, direction, config.step_size);
        }
        if (detail::diverged(ens)) {
            record.diverged_at = n + 1;
            break;
        }
    }
    record.final_positions = ens.positions;
    return record;
}

} // namespace mwgrad

#endif
