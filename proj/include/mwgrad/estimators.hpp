#ifndef MWGRAD_ESTIMATORS_HPP
#define MWGRAD_ESTIMATORS_HPP

#include "mwgrad/core.hpp"
#include "mwgrad/kernels.hpp"
#include "mwgrad/objectives.hpp"

#include <stdexcept>
#include <vector>

namespace mwgrad {

/// Per-particle, per-objective Wasserstein gradient estimates.
/// slices[k] is m x d; row i holds the estimate for objective k at particle i.
struct EstimateBatch {
    std::vector<Matrix> slices;
    EstimatorKind tag = EstimatorKind::PotentialOnly;

    Eigen::Index num_objectives() const { return static_cast<Eigen::Index>(slices.size()); }
    Eigen::Index num_particles() const { return slices.empty() ? 0 : slices.front().rows(); }
    Eigen::Index dim() const { return slices.empty() ? 0 : slices.front().cols(); }

    const Matrix& operator[](Eigen::Index k) const { return slices[static_cast<std::size_t>(k)]; }
    Matrix& operator[](Eigen::Index k) { return slices[static_cast<std::size_t>(k)]; }

    bool all_finite() const {
        for (const auto& s : slices) {
            if (!s.allFinite()) {
                return false;
            }
        }
        return true;
    }
};

struct SvgdOptions {
    // Drop the 1/m factor on both kernel sums.
    bool paper_exact_scaling = false;
};

namespace detail {

inline void check_compatible(const ParticleEnsemble& ens, const ObjectiveSet& objectives) {
    if (ens.size() < 1) {
        throw std::invalid_argument("estimator: empty ensemble");
    }
    if (ens.dim() != objectives.dim()) {
        throw std::invalid_argument("estimator: ensemble and objectives disagree on dimension");
    }
}

// grads[k].row(j) = grad f_k(x_j)
inline std::vector<Matrix> potential_gradients(const Matrix& x, const ObjectiveSet& objectives) {
    std::vector<Matrix> grads;
    grads.reserve(static_cast<std::size_t>(objectives.size()));
    for (Eigen::Index k = 0; k < objectives.size(); ++k) {
        Matrix g(x.rows(), x.cols());
        for (Eigen::Index j = 0; j < x.rows(); ++j) {
            g.row(j) = potential_grad(objectives[k], x.row(j).transpose()).transpose();
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

inline Matrix kernel_matrix(const Matrix& x, const RbfKernel& kernel) {
    const Eigen::Index m = x.rows();
    Matrix km(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        km(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < m; ++j) {
            km(i, j) = km(j, i) = kernel(x.row(i), x.row(j));
        }
    }
    return km;
}

} // namespace detail

/// SVGD estimate
///   D_k(x_i) = (1/m) [ sum_j K(x_i,x_j) grad f_k(x_j) - sum_j grad_{x_j} K(x_i,x_j) ].
inline EstimateBatch estimate_svgd(const ParticleEnsemble& ens, const ObjectiveSet& objectives, const RbfKernel& kernel,
                                   SvgdOptions opts = {}) {
    detail::check_compatible(ens, objectives);
    if (!objectives.include_entropy()) {
        throw std::invalid_argument("estimate_svgd: objectives must include the entropy term");
    }
    const Matrix& x = ens.positions;
    const Eigen::Index m = x.rows();
    const double inv_h2 = 1.0 / (kernel.bandwidth() * kernel.bandwidth());
    const double scale = opts.paper_exact_scaling ? 1.0 : 1.0 / static_cast<double>(m);

    const Matrix km = detail::kernel_matrix(x, kernel);
    const auto grads = detail::potential_gradients(x, objectives);

    // sum_j grad_{x_j} K(x_i, x_j) = sum_j (x_i - x_j) / h^2 K_ij
    Matrix repulsion = Matrix::Zero(m, x.cols());
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            repulsion.row(i) += (x.row(i) - x.row(j)) * (km(i, j) * inv_h2);
        }
    }

    EstimateBatch batch{{}, EstimatorKind::SVGD};
    for (Eigen::Index k = 0; k < objectives.size(); ++k) {
        batch.slices.push_back(scale * (km * grads[static_cast<std::size_t>(k)] - repulsion));
    }
    return batch;
}

/// Blob estimate of grad f_k + grad log rho:
///   D_k(x_i) = grad f_k(x_i) + sum_j grad_{x_i} K_ij / sum_l K_jl + sum_j grad_{x_i} K_ij / sum_l K_il.
inline EstimateBatch estimate_blob(const ParticleEnsemble& ens, const ObjectiveSet& objectives, const RbfKernel& kernel) {
    detail::check_compatible(ens, objectives);
    if (!objectives.include_entropy()) {
        throw std::invalid_argument("estimate_blob: objectives must include the entropy term");
    }
    const Matrix& x = ens.positions;
    const Eigen::Index m = x.rows();
    const double inv_h2 = 1.0 / (kernel.bandwidth() * kernel.bandwidth());

    const Matrix km = detail::kernel_matrix(x, kernel);
    const Vector row_sums = km.rowwise().sum();

    // The entropy part does not depend on k.
    Matrix entropy = Matrix::Zero(m, x.cols());
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            const double c = -km(i, j) * inv_h2 * (1.0 / row_sums[j] + 1.0 / row_sums[i]);
            entropy.row(i) += (x.row(i) - x.row(j)) * c;
        }
    }

    auto grads = detail::potential_gradients(x, objectives);
    EstimateBatch batch{{}, EstimatorKind::Blob};
    for (auto& g : grads) {
        batch.slices.push_back(g + entropy);
    }
    return batch;
}

/// Entropy-free objectives: the Wasserstein gradient of int f_k d rho is grad f_k.
inline EstimateBatch estimate_potential_only(const ParticleEnsemble& ens, const ObjectiveSet& objectives) {
    detail::check_compatible(ens, objectives);
    if (objectives.include_entropy()) {
        throw std::invalid_argument("estimate_potential_only: objectives include the entropy term");
    }
    return EstimateBatch{detail::potential_gradients(ens.positions, objectives), EstimatorKind::PotentialOnly};
}

inline EstimateBatch estimate(EstimatorKind kind, const ParticleEnsemble& ens, const ObjectiveSet& objectives,
                              const RbfKernel& kernel, SvgdOptions opts = {}) {
    switch (kind) {
    case EstimatorKind::SVGD: return estimate_svgd(ens, objectives, kernel, opts);
    case EstimatorKind::Blob: return estimate_blob(ens, objectives, kernel);
    case EstimatorKind::PotentialOnly: return estimate_potential_only(ens, objectives);
    }
    throw std::invalid_argument("estimate: unknown estimator");
}

} // namespace mwgrad

#endif
