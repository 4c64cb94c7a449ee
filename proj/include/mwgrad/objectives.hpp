#ifndef MWGRAD_OBJECTIVES_HPP
#define MWGRAD_OBJECTIVES_HPP

#include "mwgrad/core.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace mwgrad {

namespace detail {

inline bool is_symmetric(const Matrix& a, double tol = 1e-12) {
    if (a.rows() != a.cols()) {
        return false;
    }
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    return (a - a.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

inline Eigen::LLT<Matrix> spd_factor(const Matrix& a, const char* what) {
    if (!a.allFinite() || !is_symmetric(a)) {
        throw std::invalid_argument(std::string(what) + ": matrix must be finite and symmetric");
    }
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) {
        throw std::invalid_argument(std::string(what) + ": matrix is not positive definite");
    }
    return llt;
}

} // namespace detail

struct GaussianComponent {
    double weight;
    Vector mean;
    Matrix covariance;
};

/// f(x) = -log sum_j weight_j N(x; mean_j, cov_j), normalization constants kept.
class GaussianMixtureTarget {
public:
    explicit GaussianMixtureTarget(std::vector<GaussianComponent> components) : components_(std::move(components)) {
        if (components_.empty()) {
            throw std::invalid_argument("GaussianMixtureTarget: needs at least one component");
        }
        const Eigen::Index d = components_.front().mean.size();
        if (d == 0) {
            throw std::invalid_argument("GaussianMixtureTarget: zero-dimensional mean");
        }
        double total = 0.0;
        for (const auto& c : components_) {
            if (!(c.weight > 0.0) || !std::isfinite(c.weight)) {
                throw std::invalid_argument("GaussianMixtureTarget: weights must be positive");
            }
            if (c.mean.size() != d || c.covariance.rows() != d || c.covariance.cols() != d || !c.mean.allFinite()) {
                throw std::invalid_argument("GaussianMixtureTarget: inconsistent component dimensions");
            }
            total += c.weight;
            auto llt = detail::spd_factor(c.covariance, "GaussianMixtureTarget covariance");
            const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
            log_norm_.push_back(std::log(c.weight) - 0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi) -
                                0.5 * log_det);
            factors_.push_back(std::move(llt));
        }
        if (std::abs(total - 1.0) > 1e-12) {
            throw std::invalid_argument("GaussianMixtureTarget: weights must sum to 1");
        }
        dim_ = d;
    }

    Eigen::Index dim() const { return dim_; }
    const std::vector<GaussianComponent>& components() const { return components_; }

    double value(const Vector& x) const {
        const Vector logs = component_log_densities(x);
        return -log_sum_exp(logs);
    }

    Vector grad(const Vector& x) const {
        const Vector r = responsibilities(x);
        Vector g = Vector::Zero(dim_);
        for (std::size_t j = 0; j < components_.size(); ++j) {
            g += r[static_cast<Eigen::Index>(j)] * factors_[j].solve(x - components_[j].mean);
        }
        return g;
    }

    /// Posterior component probabilities at x; sums to one.
    Vector responsibilities(const Vector& x) const {
        const Vector logs = component_log_densities(x);
        const double lse = log_sum_exp(logs);
        return (logs.array() - lse).exp().matrix();
    }

private:
    // log(weight_j) + log N(x; mean_j, cov_j)
    Vector component_log_densities(const Vector& x) const {
        Vector out(static_cast<Eigen::Index>(components_.size()));
        for (std::size_t j = 0; j < components_.size(); ++j) {
            const Vector z = factors_[j].matrixL().solve(x - components_[j].mean);
            out[static_cast<Eigen::Index>(j)] = log_norm_[j] - 0.5 * z.squaredNorm();
        }
        return out;
    }

    static double log_sum_exp(const Vector& a) {
        const double top = a.maxCoeff();
        return top + std::log((a.array() - top).exp().sum());
    }

    std::vector<GaussianComponent> components_;
    std::vector<Eigen::LLT<Matrix>> factors_;
    std::vector<double> log_norm_;
    Eigen::Index dim_ = 0;
};

/// f(x) = 1/2 (x - c)^T A (x - c) with A symmetric positive definite.
class QuadraticTarget {
public:
    QuadraticTarget(Vector center, Matrix curvature) : center_(std::move(center)), curvature_(std::move(curvature)) {
        if (center_.size() == 0 || !center_.allFinite() || curvature_.rows() != center_.size()) {
            throw std::invalid_argument("QuadraticTarget: inconsistent dimensions");
        }
        detail::spd_factor(curvature_, "QuadraticTarget curvature");
    }

    Eigen::Index dim() const { return center_.size(); }
    const Vector& center() const { return center_; }
    const Matrix& curvature() const { return curvature_; }

    double value(const Vector& x) const {
        const Vector r = x - center_;
        return 0.5 * r.dot(curvature_ * r);
    }

    Vector grad(const Vector& x) const { return curvature_ * (x - center_); }

    double strong_convexity() const {
        return Eigen::SelfAdjointEigenSolver<Matrix>(curvature_, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    }

    double smoothness() const {
        return Eigen::SelfAdjointEigenSolver<Matrix>(curvature_, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    }

private:
    Vector center_;
    Matrix curvature_;
};

using Target = std::variant<GaussianMixtureTarget, QuadraticTarget>;

inline Eigen::Index target_dim(const Target& t) {
    return std::visit([](const auto& x) { return x.dim(); }, t);
}

inline double potential_value(const Target& t, const Vector& x) {
    if (x.size() != target_dim(t) || !x.allFinite()) {
        throw std::invalid_argument("potential_value: point has wrong dimension or is not finite");
    }
    return std::visit([&](const auto& f) { return f.value(x); }, t);
}

inline Vector potential_grad(const Target& t, const Vector& x) {
    if (x.size() != target_dim(t) || !x.allFinite()) {
        throw std::invalid_argument("potential_grad: point has wrong dimension or is not finite");
    }
    return std::visit([&](const auto& f) -> Vector { return f.grad(x); }, t);
}

/// K target potentials sharing one dimension. With include_entropy the k-th
/// objective is KL(rho | pi_k), otherwise the linear functional int f_k d rho.
class ObjectiveSet {
public:
    ObjectiveSet(std::vector<Target> targets, bool include_entropy)
        : targets_(std::move(targets)), include_entropy_(include_entropy) {
        if (targets_.empty()) {
            throw std::invalid_argument("ObjectiveSet: needs at least one target");
        }
        dim_ = target_dim(targets_.front());
        for (const auto& t : targets_) {
            if (target_dim(t) != dim_) {
                throw std::invalid_argument("ObjectiveSet: targets disagree on dimension");
            }
        }
    }

    Eigen::Index size() const { return static_cast<Eigen::Index>(targets_.size()); }
    Eigen::Index dim() const { return dim_; }
    bool include_entropy() const { return include_entropy_; }
    const Target& operator[](Eigen::Index k) const { return targets_[static_cast<std::size_t>(k)]; }
    const std::vector<Target>& targets() const { return targets_; }

    /// Mean potential (1/m) sum_i f_k(x_i) for every k.
    Vector mean_potentials(const Matrix& positions) const {
        Vector out = Vector::Zero(size());
        for (Eigen::Index k = 0; k < size(); ++k) {
            double acc = 0.0;
            for (Eigen::Index i = 0; i < positions.rows(); ++i) {
                acc += potential_value((*this)[k], positions.row(i).transpose());
            }
            out[k] = acc / static_cast<double>(positions.rows());
        }
        return out;
    }

private:
    std::vector<Target> targets_;
    bool include_entropy_;
    Eigen::Index dim_ = 0;
};

/// The four two-component 2-D mixtures of the toy multi-target sampling problem.
inline ObjectiveSet toy4_objectives() {
    const Matrix eye = Matrix::Identity(2, 2);
    auto mix = [&](double a0, double a1, double b0, double b1) {
        return Target{GaussianMixtureTarget({{0.7, Eigen::Vector2d(a0, a1), eye}, {0.3, Eigen::Vector2d(b0, b1), eye}})};
    };
    return ObjectiveSet({mix(4, -4, 0.1, 0.2), mix(-4, 4, -0.1, 0.3), mix(-4, -4, 0.4, -0.4), mix(4, 4, -0.2, 0.3)},
                        true);
}

} // namespace mwgrad

#endif
