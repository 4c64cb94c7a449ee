#ifndef MWGRAD_DIAGNOSTICS_HPP
#define MWGRAD_DIAGNOSTICS_HPP

#include "mwgrad/core.hpp"
#include "mwgrad/estimators.hpp"
#include "mwgrad/objectives.hpp"
#include "mwgrad/weights.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace mwgrad {

/// GradNorm = (1/m) sum_i |sum_k w_k D_k(x_i)|^2
inline double grad_norm(const EstimateBatch& batch, const SimplexWeights& w) {
    const Matrix v = aggregate_direction(batch, w);
    return v.squaredNorm() / static_cast<double>(std::max<Eigen::Index>(1, v.rows()));
}

struct SeriesRow {
    std::size_t iter = 0;
    double grad_norm = 0.0;
    Vector potentials;
};

struct TrialRecord {
    Method method = Method::MWGraD_SVGD;
    double step_size = 0.0;
    std::uint64_t seed = 0;
    std::size_t trial_index = 0;
    std::vector<SeriesRow> series;
    Matrix final_positions;
    std::optional<std::size_t> diverged_at;
};

struct SearchBox {
    Vector lo;
    Vector hi;
};

/// Merit of the Dirac at x for quadratic objectives,
///   max over grid points q of min_k (f_k(x) - f_k(q)), clamped below at 0,
/// with grid points lo + i * resolution per axis (hi included when it lies on
/// the lattice). The objective values on the grid do not depend on x, so they
/// are tabulated once and reused by every evaluation.
class MeritGrid {
public:
    // Grids with more entries than this are evaluated on the fly instead.
    static constexpr std::size_t kMaxTableEntries = std::size_t{1} << 23;

    MeritGrid(std::span<const QuadraticTarget> objectives, SearchBox box, double resolution)
        : objectives_(objectives.begin(), objectives.end()), box_(std::move(box)), resolution_(resolution) {
        if (objectives_.empty()) {
            throw std::invalid_argument("merit_euclidean: empty objective list");
        }
        if (!(resolution > 0.0) || !std::isfinite(resolution)) {
            throw std::invalid_argument("merit_euclidean: grid resolution must be positive");
        }
        const Eigen::Index d = objectives_.front().dim();
        if (box_.lo.size() != d || box_.hi.size() != d) {
            throw std::invalid_argument("merit_euclidean: search box dimension mismatch");
        }
        for (const auto& f : objectives_) {
            if (f.dim() != d) {
                throw std::invalid_argument("merit_euclidean: objective dimension mismatch");
            }
            if ((f.center().array() < box_.lo.array()).any() || (f.center().array() > box_.hi.array()).any()) {
                throw std::invalid_argument("merit_euclidean: search box must contain every center");
            }
        }
        points_ = 1;
        for (Eigen::Index a = 0; a < d; ++a) {
            const auto n = static_cast<std::size_t>(std::floor((box_.hi[a] - box_.lo[a]) / resolution + 1e-9)) + 1;
            counts_.push_back(n);
            points_ *= n;
        }
        if (points_ * objectives_.size() <= kMaxTableEntries) {
            table_.reserve(points_ * objectives_.size());
            for_each_point([&](const Vector& q) {
                for (const auto& f : objectives_) {
                    table_.push_back(f.value(q));
                }
            });
        }
    }

    Eigen::Index dim() const { return box_.lo.size(); }
    std::size_t points() const { return points_; }

    double operator()(const Vector& x) const {
        if (x.size() != dim()) {
            throw std::invalid_argument("merit_euclidean: point dimension mismatch");
        }
        const std::size_t K = objectives_.size();
        std::vector<double> fx;
        for (const auto& f : objectives_) {
            fx.push_back(f.value(x));
        }
        double best = -std::numeric_limits<double>::infinity();
        if (!table_.empty()) {
            for (std::size_t p = 0; p < points_; ++p) {
                const double* fq = &table_[p * K];
                double worst = fx[0] - fq[0];
                for (std::size_t k = 1; k < K; ++k) {
                    worst = std::min(worst, fx[k] - fq[k]);
                }
                best = std::max(best, worst);
            }
        } else {
            for_each_point([&](const Vector& q) {
                double worst = std::numeric_limits<double>::infinity();
                for (std::size_t k = 0; k < K; ++k) {
                    worst = std::min(worst, fx[k] - objectives_[k].value(q));
                }
                best = std::max(best, worst);
            });
        }
        return std::max(0.0, best);
    }

private:
    template <typename Visit>
    void for_each_point(Visit&& visit) const {
        const Eigen::Index d = dim();
        std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
        Vector q(d);
        for (;;) {
            for (Eigen::Index a = 0; a < d; ++a) {
                q[a] = box_.lo[a] + static_cast<double>(idx[static_cast<std::size_t>(a)]) * resolution_;
            }
            visit(q);
            std::size_t a = 0;
            while (a < idx.size() && ++idx[a] == counts_[a]) {
                idx[a++] = 0;
            }
            if (a == idx.size()) {
                return;
            }
        }
    }

    std::vector<QuadraticTarget> objectives_;
    SearchBox box_;
    double resolution_;
    std::vector<std::size_t> counts_;
    std::size_t points_ = 0;
    // table_[p * K + k] = f_k(q_p)
    std::vector<double> table_;
};

inline double merit_euclidean(const Vector& x, std::span<const QuadraticTarget> objectives, const SearchBox& box,
                              double resolution) {
    return MeritGrid(objectives, box, resolution)(x);
}

class InsufficientDataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TimePoint {
    double t;
    double value;
};

struct FitWindow {
    double lo;
    double hi;
};

namespace detail {

template <typename Abscissa>
double log_value_slope(std::span<const TimePoint> series, FitWindow window, Abscissa abscissa) {
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& p : series) {
        if (p.t >= window.lo && p.t <= window.hi && p.value > 0.0 && std::isfinite(p.value)) {
            xs.push_back(abscissa(p.t));
            ys.push_back(std::log(p.value));
        }
    }
    if (xs.size() < 10) {
        throw InsufficientDataError("rate fit: fewer than 10 positive points in window");
    }
    const auto n = static_cast<double>(xs.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    if (!(sxx > 0.0)) {
        throw InsufficientDataError("rate fit: window points share a single abscissa");
    }
    return sxy / sxx;
}

} // namespace detail

/// Least-squares slope of log(value) against log(t).
inline double fit_rate_slope(std::span<const TimePoint> series, FitWindow window) {
    for (const auto& p : series) {
        if (p.t >= window.lo && p.t <= window.hi && !(p.t > 0.0)) {
            throw std::invalid_argument("fit_rate_slope: times in the window must be positive");
        }
    }
    return detail::log_value_slope(series, window, [](double t) { return std::log(t); });
}

/// Least-squares slope of log(value) against t.
inline double fit_exp_rate(std::span<const TimePoint> series, FitWindow window) {
    return detail::log_value_slope(series, window, [](double t) { return t; });
}

} // namespace mwgrad

#endif
