#ifndef MWGRAD_WEIGHTS_HPP
#define MWGRAD_WEIGHTS_HPP

#include "mwgrad/core.hpp"
#include "mwgrad/estimators.hpp"
#include "mwgrad/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace mwgrad {

/// G_kl = (1/m) sum_i <D_k(x_i), D_l(x_i)>
inline Matrix gram_matrix(const EstimateBatch& batch) {
    const Eigen::Index K = batch.num_objectives();
    const double inv_m = 1.0 / static_cast<double>(std::max<Eigen::Index>(1, batch.num_particles()));
    Matrix g(K, K);
    for (Eigen::Index k = 0; k < K; ++k) {
        for (Eigen::Index l = k; l < K; ++l) {
            g(k, l) = g(l, k) = batch[k].cwiseProduct(batch[l]).sum() * inv_m;
        }
    }
    return g;
}

struct QpOptions {
    double tol = 1e-10;
    std::size_t max_iters = 1000;
};

struct QpSolution {
    SimplexWeights weights;
    bool converged = true;
    std::size_t iterations = 0;
    // Frank-Wolfe duality gap w'Gw - min_k (Gw)_k at the returned point.
    double gap = 0.0;
};

inline double simplex_objective(const Matrix& g, const Vector& w) { return 0.5 * w.dot(g * w); }

namespace detail {

inline double frank_wolfe_gap(const Vector& grad, const Vector& w) { return w.dot(grad) - grad.minCoeff(); }

inline Eigen::Index argmin_lowest(const Vector& v) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < v.size(); ++k) {
        if (v[k] < v[best]) {
            best = k;
        }
    }
    return best;
}

// Fully corrective step on the face spanned by the support of w: move toward
// the minimiser of 1/2 w'Gw over the face's affine hull, stopping at the face
// boundary and dropping the coordinate that reaches zero, until the minimiser
// lies inside the face. The objective never increases.
inline void face_correction(const Matrix& g, Vector& w) {
    const Eigen::Index K = g.rows();
    for (Eigen::Index round = 0; round < K; ++round) {
        std::vector<Eigen::Index> support;
        for (Eigen::Index k = 0; k < K; ++k) {
            if (w[k] > 0.0) {
                support.push_back(k);
            }
        }
        const auto s = static_cast<Eigen::Index>(support.size());
        if (s < 2) {
            return;
        }
        // [G_SS 1; 1' 0] [u; lambda] = [0; 1]
        Matrix kkt = Matrix::Zero(s + 1, s + 1);
        Vector rhs = Vector::Zero(s + 1);
        for (Eigen::Index a = 0; a < s; ++a) {
            for (Eigen::Index b = 0; b < s; ++b) {
                kkt(a, b) = g(support[static_cast<std::size_t>(a)], support[static_cast<std::size_t>(b)]);
            }
            kkt(a, s) = kkt(s, a) = 1.0;
        }
        rhs[s] = 1.0;
        const Vector sol = kkt.completeOrthogonalDecomposition().solve(rhs);
        Vector target = Vector::Zero(K);
        for (Eigen::Index a = 0; a < s; ++a) {
            target[support[static_cast<std::size_t>(a)]] = sol[a];
        }
        if (!target.allFinite() || std::abs(target.sum() - 1.0) > 1e-9) {
            return;
        }

        double theta = 1.0;
        Eigen::Index blocking = -1;
        for (Eigen::Index k : support) {
            if (target[k] < 0.0) {
                const double t = w[k] / (w[k] - target[k]);
                if (t < theta) {
                    theta = t;
                    blocking = k;
                }
            }
        }
        Vector next = w + theta * (target - w);
        if (blocking >= 0) {
            next[blocking] = 0.0;
        }
        next = next.cwiseMax(0.0);
        next /= next.sum();
        if (0.5 * next.dot(g * next) > 0.5 * w.dot(g * w)) {
            return;
        }
        w = std::move(next);
        if (blocking < 0) {
            return;
        }
    }
}

} // namespace detail

/// Away-step Frank-Wolfe with exact line search, started at the barycentre,
/// plus a fully corrective step on the active face after every iteration.
/// The active set is the support of w; ties in the linear oracle go to the
/// lowest index. Usable for any K, but solve_simplex_qp only routes K >= 3 here.
inline QpSolution frank_wolfe_simplex_qp(const Matrix& g, const QpOptions& opts = {}) {
    using detail::argmin_lowest;
    using detail::frank_wolfe_gap;
    const Eigen::Index K = g.rows();
    Vector w = Vector::Constant(K, 1.0 / static_cast<double>(K));
    Vector grad = g * w;
    QpSolution sol;
    sol.converged = false;

    std::size_t it = 0;
    for (; it < opts.max_iters; ++it) {
        const Eigen::Index s = argmin_lowest(grad);
        const double wg = w.dot(grad);
        const double fw_gap = wg - grad[s];
        if (fw_gap <= opts.tol) {
            sol.converged = true;
            break;
        }

        Eigen::Index a = -1;
        for (Eigen::Index k = 0; k < K; ++k) {
            if (w[k] > 0.0 && (a < 0 || grad[k] > grad[a])) {
                a = k;
            }
        }
        const double away_gap = grad[a] - wg;

        Vector dir;
        double step_max;
        bool away = false;
        if (fw_gap >= away_gap) {
            dir = -w;
            dir[s] += 1.0;
            step_max = 1.0;
        } else {
            dir = w;
            dir[a] -= 1.0;
            step_max = w[a] / (1.0 - w[a]);
            away = true;
        }

        const double slope = grad.dot(dir);
        const double curv = dir.dot(g * dir);
        double step = curv > 0.0 ? std::clamp(-slope / curv, 0.0, step_max) : step_max;
        w += step * dir;
        if (away && step == step_max) {
            w[a] = 0.0;
        }
        w = w.cwiseMax(0.0);
        w /= w.sum();
        detail::face_correction(g, w);
        grad = g * w;
    }
    sol.iterations = it;
    sol.gap = frank_wolfe_gap(grad, w);
    if (!sol.converged && sol.gap <= opts.tol) {
        sol.converged = true;
    }
    sol.weights = SimplexWeights{std::move(w)};
    return sol;
}

/// Minimizes 1/2 w'Gw over the probability simplex.
inline QpSolution solve_simplex_qp(const Matrix& g, QpOptions opts = {}) {
    if (g.rows() == 0 || g.rows() != g.cols()) {
        throw std::invalid_argument("solve_simplex_qp: G must be square and non-empty");
    }
    if (!g.allFinite() || !detail::is_symmetric(g)) {
        throw std::invalid_argument("solve_simplex_qp: G must be finite and symmetric");
    }
    if (!(opts.tol > 0.0)) {
        throw std::invalid_argument("solve_simplex_qp: tol must be positive");
    }
    const Eigen::Index K = g.rows();

    if (K == 1) {
        return QpSolution{SimplexWeights{Vector::Ones(1)}, true, 0, 0.0};
    }
    if (K == 2) {
        const double denom = g(0, 0) - 2.0 * g(0, 1) + g(1, 1);
        const double w1 = denom < 1e-14 ? 0.5 : std::clamp((g(1, 1) - g(0, 1)) / denom, 0.0, 1.0);
        Vector w(2);
        w << w1, 1.0 - w1;
        const double gap = detail::frank_wolfe_gap(g * w, w);
        return QpSolution{SimplexWeights{std::move(w)}, true, 0, gap};
    }
    if (g.cwiseAbs().maxCoeff() == 0.0) {
        return QpSolution{SimplexWeights{Vector::Constant(K, 1.0 / static_cast<double>(K))}, true, 0, 0.0};
    }
    return frank_wolfe_simplex_qp(g, opts);
}

/// Row i = sum_k w_k D_k(x_i).
inline Matrix aggregate_direction(const EstimateBatch& batch, const SimplexWeights& w) {
    if (w.size() != batch.num_objectives() || w.size() == 0) {
        throw std::invalid_argument("aggregate_direction: weight count does not match objective count");
    }
    Matrix out = Matrix::Zero(batch.num_particles(), batch.dim());
    for (Eigen::Index k = 0; k < w.size(); ++k) {
        out += w[k] * batch[k];
    }
    return out;
}

} // namespace mwgrad

#endif
