#ifndef MWGRAD_HARNESS_RATES_HPP
#define MWGRAD_HARNESS_RATES_HPP

#include "mwgrad/harness/config.hpp"
#include "mwgrad/harness/experiment.hpp"
#include "mwgrad/harness/trial.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace mwgrad {

enum class RateFit { LogLog, Exponential };

enum class RateStatus { Fitted, ConvergedBeforeWindow, InsufficientData, Diverged };

inline std::string_view to_string(RateStatus s) {
    switch (s) {
    case RateStatus::Fitted: return "fitted";
    case RateStatus::ConvergedBeforeWindow: return "converged before window";
    case RateStatus::InsufficientData: return "insufficient data";
    case RateStatus::Diverged: return "diverged";
    }
    return "?";
}

struct RateRun {
    std::string label;
    Method method;
    double step_size;
    // continuous time per iteration: eta (plain) or sqrt(eta) (accelerated)
    double time_per_iteration;
    RateFit fit;
    std::vector<TimePoint> merit;
    RateStatus status = RateStatus::InsufficientData;
    std::optional<double> value;
};

struct RateReport {
    Scenario scenario;
    FitWindow window;
    std::vector<RateRun> runs;
};

namespace detail {

inline std::vector<QuadraticTarget> quadratic_list(const ObjectiveSet& objectives) {
    std::vector<QuadraticTarget> out;
    for (const auto& t : objectives.targets()) {
        out.push_back(std::get<QuadraticTarget>(t));
    }
    return out;
}

inline void fit_run(RateRun& run, FitWindow window) {
    try {
        run.value = run.fit == RateFit::LogLog ? fit_rate_slope(run.merit, window) : fit_exp_rate(run.merit, window);
        run.status = RateStatus::Fitted;
    } catch (const InsufficientDataError&) {
        bool zero_before = false;
        bool positive_in_window = false;
        for (const auto& p : run.merit) {
            zero_before = zero_before || (p.t < window.lo && p.value == 0.0);
            positive_in_window = positive_in_window || (p.t >= window.lo && p.t <= window.hi && p.value > 0.0);
        }
        run.status = zero_before && !positive_in_window ? RateStatus::ConvergedBeforeWindow
                                                        : RateStatus::InsufficientData;
    }
}

} // namespace detail

/// Single run of the Euclidean reduction: one particle, potential-only
/// objectives, merit logged against continuous time.
inline RateRun run_rate_case(const ExperimentConfig& cfg, Method method, const MomentumSchedule& schedule, double eta,
                             RateFit fit, std::string label) {
    const auto quads = detail::quadratic_list(*cfg.run.objectives);
    const RateSettings& rs = cfg.rate;

    RunConfig rc = cfg.run;
    rc.method = method;
    rc.step_size = eta;
    rc.schedule = schedule;
    rc.num_particles = 1;
    rc.initial_positions = Matrix(rs.initial_position.transpose());
    rc.log_stride = 1;

    const double tau = is_accelerated(method) ? std::sqrt(eta) : eta;
    rc.iterations = static_cast<std::size_t>(std::ceil(rs.window.hi / tau));
    const auto stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(rs.merit_dt / tau)));

    const MeritGrid merit(quads, rs.box, rs.resolution);
    RateRun run{std::move(label), method, eta, tau, fit, {}, RateStatus::InsufficientData, std::nullopt};
    const TrialRecord rec = run_trial(rc, 0, [&](const IterationView& v) {
        const std::size_t n = v.ensemble.iteration;
        if (n % stride == 0 || n == rc.iterations) {
            const Vector x = v.ensemble.positions.row(0).transpose();
            run.merit.push_back({static_cast<double>(n) * tau, merit(x)});
        }
    });
    if (rec.diverged_at) {
        run.status = RateStatus::Diverged;
        return run;
    }
    detail::fit_run(run, rs.window);
    return run;
}

/// Convex scenario: MWGraD and A-MWGraD (convex momentum), log-log slopes.
/// Strongly convex scenario: A-MWGraD with the configured beta and MWGraD, exponential rates.
inline RateReport run_rate_scenario(const ExperimentConfig& cfg) {
    if (!is_rate_scenario(cfg.scenario)) {
        throw std::invalid_argument("run_rate_scenario: not a euclidean_rate_* scenario");
    }
    RateReport report{cfg.scenario, cfg.rate.window, {}};
    for (double eta : cfg.step_sizes) {
        if (cfg.scenario == Scenario::EuclideanRateConvex) {
            report.runs.push_back(run_rate_case(cfg, Method::MWGraD_SVGD, MomentumSchedule::convex(), eta,
                                                RateFit::LogLog, "MWGraD"));
            report.runs.push_back(run_rate_case(cfg, Method::AMWGraD_SVGD, MomentumSchedule::convex(), eta,
                                                RateFit::LogLog, "AMWGraD-convex"));
        } else {
            report.runs.push_back(run_rate_case(cfg, Method::AMWGraD_SVGD, cfg.run.schedule, eta,
                                                RateFit::Exponential, "AMWGraD-strongly-convex"));
            report.runs.push_back(run_rate_case(cfg, Method::MWGraD_SVGD, MomentumSchedule::convex(), eta,
                                                RateFit::Exponential, "MWGraD"));
        }
    }
    return report;
}

inline nlohmann::json rate_report_json(const RateReport& report) {
    nlohmann::json j;
    j["format_version"] = kOutputFormatVersion;
    j["scenario"] = std::string(to_string(report.scenario));
    j["window"] = {report.window.lo, report.window.hi};
    j["runs"] = nlohmann::json::array();
    for (const auto& r : report.runs) {
        j["runs"].push_back({{"label", r.label},
                             {"step_size", r.step_size},
                             {"time_per_iteration", r.time_per_iteration},
                             {"fit", r.fit == RateFit::LogLog ? "loglog_slope" : "exponential_rate"},
                             {"status", std::string(to_string(r.status))},
                             {"value", r.value ? nlohmann::json(*r.value) : nlohmann::json()}});
    }
    return j;
}

/// rates.json plus one merit_<label>_eta_<step>.csv (t,merit) per run.
inline void write_rate_report(const RateReport& report, const std::filesystem::path& dir) {
    detail::ensure_writable(dir);
    for (const auto& r : report.runs) {
        std::string csv = "t,merit\n";
        for (const auto& p : r.merit) {
            csv += format_real(p.t) + ',' + format_real(p.value) + '\n';
        }
        detail::write_file(dir / ("merit_" + r.label + "_eta_" + short_real(r.step_size) + ".csv"), csv);
    }
    detail::write_file(dir / "rates.json", rate_report_json(report).dump(2) + '\n');
}

} // namespace mwgrad

#endif
