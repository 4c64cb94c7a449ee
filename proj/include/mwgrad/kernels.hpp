#ifndef MWGRAD_KERNELS_HPP
#define MWGRAD_KERNELS_HPP

#include "mwgrad/core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace mwgrad {

/// Gaussian kernel K(x, y) = exp(-|x - y|^2 / (2 h^2)).
class RbfKernel {
public:
    explicit RbfKernel(double bandwidth = 1.0) : h_(bandwidth) {
        if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
            throw std::invalid_argument("RbfKernel: bandwidth must be positive and finite");
        }
    }

    double bandwidth() const { return h_; }

    template <typename A, typename B>
    double operator()(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) const {
        return std::exp(-(x - y).squaredNorm() / (2.0 * h_ * h_));
    }

    /// grad_y K(x, y) = (x - y) / h^2 * K(x, y)
    template <typename A, typename B>
    Vector grad_second(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) const {
        const double k = (*this)(x, y);
        return (x - y) * (k / (h_ * h_));
    }

private:
    double h_;
};

namespace detail {

template <typename A, typename B>
void check_same_dim(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) {
    if (x.size() != y.size()) {
        throw std::invalid_argument("kernel: dimension mismatch");
    }
}

} // namespace detail

inline double kernel_eval(const RbfKernel& k, const Vector& x, const Vector& y) {
    detail::check_same_dim(x, y);
    return k(x, y);
}

inline Vector kernel_grad_second(const RbfKernel& k, const Vector& x, const Vector& y) {
    detail::check_same_dim(x, y);
    return k.grad_second(x, y);
}

/// Median heuristic: h^2 = med_{i<j} |x_i - x_j|^2 / (2 log(m + 1)).
/// Falls back to bandwidth 1 when fewer than two particles or all coincide.
inline RbfKernel median_heuristic_kernel(const Matrix& positions) {
    const Eigen::Index m = positions.rows();
    std::vector<double> sq;
    sq.reserve(static_cast<std::size_t>(m * (m - 1) / 2));
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = i + 1; j < m; ++j) {
            sq.push_back((positions.row(i) - positions.row(j)).squaredNorm());
        }
    }
    if (sq.empty()) {
        return RbfKernel(1.0);
    }
    const auto mid = sq.begin() + static_cast<std::ptrdiff_t>(sq.size() / 2);
    std::nth_element(sq.begin(), mid, sq.end());
    const double h2 = *mid / (2.0 * std::log(static_cast<double>(m) + 1.0));
    return RbfKernel(h2 > 0.0 ? std::sqrt(h2) : 1.0);
}

} // namespace mwgrad

#endif
