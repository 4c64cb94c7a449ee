#ifndef MWGRAD_HARNESS_EXPERIMENT_HPP
#define MWGRAD_HARNESS_EXPERIMENT_HPP

#include "mwgrad/harness/config.hpp"
#include "mwgrad/harness/trial.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mwgrad {

inline constexpr int kOutputFormatVersion = 1;

/// 17 significant digits, the CSV float format.
inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Shortest round-trip form, used in directory names.
inline std::string short_real(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string trial_csv(const TrialRecord& rec) {
    std::string out = "iter,grad_norm";
    const Eigen::Index K = rec.series.empty() ? 0 : rec.series.front().potentials.size();
    for (Eigen::Index k = 1; k <= K; ++k) {
        out += ",f_" + std::to_string(k);
    }
    out += '\n';
    for (const auto& row : rec.series) {
        out += std::to_string(row.iter);
        out += ',';
        out += format_real(row.grad_norm);
        for (Eigen::Index k = 0; k < row.potentials.size(); ++k) {
            out += ',';
            out += format_real(row.potentials[k]);
        }
        out += '\n';
    }
    return out;
}

struct AggregateRow {
    std::size_t iter;
    double mean;
    double std;
};

/// Per-row mean and sample standard deviation of grad_norm over trials.
/// Trials that stopped early contribute to the common prefix only.
inline std::vector<AggregateRow> aggregate_grad_norm(const std::vector<TrialRecord>& trials) {
    if (trials.empty()) {
        return {};
    }
    std::size_t rows = trials.front().series.size();
    for (const auto& t : trials) {
        rows = std::min(rows, t.series.size());
    }
    const auto n = static_cast<double>(trials.size());
    std::vector<AggregateRow> out;
    out.reserve(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        double sum = 0.0;
        for (const auto& t : trials) {
            sum += t.series[r].grad_norm;
        }
        const double mean = sum / n;
        double ss = 0.0;
        for (const auto& t : trials) {
            const double d = t.series[r].grad_norm - mean;
            ss += d * d;
        }
        const double sd = trials.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
        out.push_back({trials.front().series[r].iter, mean, sd});
    }
    return out;
}

inline std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
    std::string out = "iter,grad_norm_mean,grad_norm_std\n";
    for (const auto& r : rows) {
        out += std::to_string(r.iter) + ',' + format_real(r.mean) + ',' + format_real(r.std) + '\n';
    }
    return out;
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << content;
    if (!out) {
        throw std::runtime_error("write failed for " + path.string());
    }
}

inline void ensure_writable(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
    }
    const auto probe = dir / ".mwgrad_write_probe";
    {
        std::ofstream out(probe);
        if (!out) {
            throw std::runtime_error("output directory is not writable: " + dir.string());
        }
    }
    std::filesystem::remove(probe, ec);
}

inline nlohmann::json matrix_json(const Matrix& a) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            row.push_back(a(i, j));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace detail

inline nlohmann::json config_json(const ExperimentConfig& cfg) {
    const RunConfig& r = cfg.run;
    nlohmann::json j;
    j["scenario"] = std::string(to_string(cfg.scenario));
    nlohmann::json methods = nlohmann::json::array();
    for (Method m : cfg.methods) {
        methods.push_back(std::string(to_string(m)));
    }
    j["methods"] = methods;
    j["num_particles"] = r.num_particles;
    j["dim"] = r.dim;
    j["iterations"] = r.iterations;
    j["seed"] = r.seed;
    j["num_trials"] = cfg.num_trials;
    j["step_sizes"] = cfg.step_sizes;
    j["bandwidth"] = r.bandwidth;
    j["bandwidth_rule"] = r.bandwidth_rule == BandwidthRule::Fixed ? "fixed" : "median";
    j["paper_exact_scaling"] = r.svgd.paper_exact_scaling;
    if (r.schedule.regime() == MomentumRegime::Convex) {
        j["schedule"] = {{"regime", "convex"}};
    } else {
        j["schedule"] = {{"regime", "strongly_convex"}, {"beta", *r.schedule.beta()}};
    }
    j["accel_update_order"] = r.accel_order == AccelUpdateOrder::SemiImplicit ? "semi_implicit" : "position_first";
    j["log_stride"] = r.log_stride;
    j["snapshot_stride"] = cfg.snapshot_stride;
    j["qp_tol"] = r.qp.tol;
    j["qp_max_iters"] = r.qp.max_iters;
    j["objectives"] = cfg.objectives_source;
    return j;
}

struct ExperimentOptions {
    // Worker threads for independent trials; results do not depend on it.
    std::size_t jobs = 1;
    // Adds per-trial wall-clock seconds to the manifest (breaks byte-identical reruns).
    bool record_timing = false;
};

struct RunGroup {
    Method method;
    double step_size;
    std::vector<TrialRecord> trials;
    std::vector<AggregateRow> aggregate;
};

struct ExperimentResult {
    std::vector<RunGroup> groups;
    bool any_diverged = false;
};

inline std::filesystem::path group_dir(const std::filesystem::path& root, Method m, double eta) {
    return root / std::string(to_string(m)) / ("eta_" + short_real(eta));
}

/// Runs every (method, step size, trial) of the experiment and writes
///   <out>/<method>/eta_<step>/trial_<i>.csv, aggregate.csv, optional trial_<i>.positions.jsonl
///   <out>/manifest.json
/// Trial i of every group starts from particle stream (seed, i).
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const ExperimentOptions& opts = {}) {
    if (is_rate_scenario(cfg.scenario)) {
        throw std::invalid_argument("run_experiment: use run_rate_scenario for euclidean_rate_* scenarios");
    }
    detail::ensure_writable(cfg.output_dir);

    struct Task {
        std::size_t group;
        std::size_t trial;
    };
    ExperimentResult result;
    std::vector<Task> tasks;
    for (Method m : cfg.methods) {
        for (double eta : cfg.step_sizes) {
            result.groups.push_back({m, eta, std::vector<TrialRecord>(cfg.num_trials), {}});
            for (std::size_t t = 0; t < cfg.num_trials; ++t) {
                tasks.push_back({result.groups.size() - 1, t});
            }
        }
    }
    std::vector<double> seconds(tasks.size(), 0.0);

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            try {
                RunGroup& g = result.groups[tasks[i].group];
                RunConfig rc = cfg.run;
                rc.method = g.method;
                rc.step_size = g.step_size;
                const std::size_t trial = tasks[i].trial;
                const auto dir = group_dir(cfg.output_dir, g.method, g.step_size);

                std::string snapshots;
                IterationObserver observe;
                if (cfg.snapshot_stride > 0) {
                    observe = [&](const IterationView& v) {
                        if (v.ensemble.iteration % cfg.snapshot_stride == 0) {
                            nlohmann::json line{{"iter", v.ensemble.iteration},
                                                {"positions", detail::matrix_json(v.ensemble.positions)}};
                            snapshots += line.dump() + '\n';
                        }
                    };
                }
                const auto start = std::chrono::steady_clock::now();
                g.trials[trial] = run_trial(rc, trial, observe);
                seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

                detail::write_file(dir / ("trial_" + std::to_string(trial) + ".csv"), trial_csv(g.trials[trial]));
                if (cfg.snapshot_stride > 0) {
                    detail::write_file(dir / ("trial_" + std::to_string(trial) + ".positions.jsonl"), snapshots);
                }
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
            }
        }
    };
    const std::size_t jobs = std::max<std::size_t>(1, std::min(opts.jobs, tasks.size()));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t j = 0; j < jobs; ++j) {
            pool.emplace_back(worker);
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }

    nlohmann::json manifest;
    manifest["format_version"] = kOutputFormatVersion;
    manifest["config"] = config_json(cfg);
    nlohmann::json trials = nlohmann::json::array();
    std::size_t task = 0;
    for (auto& g : result.groups) {
        g.aggregate = aggregate_grad_norm(g.trials);
        detail::write_file(group_dir(cfg.output_dir, g.method, g.step_size) / "aggregate.csv",
                           aggregate_csv(g.aggregate));
        for (const auto& t : g.trials) {
            nlohmann::json entry{{"method", std::string(to_string(g.method))},
                                 {"step_size", g.step_size},
                                 {"trial_index", t.trial_index},
                                 {"rows", t.series.size()},
                                 {"final_grad_norm", t.series.empty() ? 0.0 : t.series.back().grad_norm},
                                 {"diverged_at", t.diverged_at ? nlohmann::json(*t.diverged_at) : nlohmann::json()}};
            if (opts.record_timing) {
                entry["wall_clock_seconds"] = seconds[task];
            }
            trials.push_back(std::move(entry));
            result.any_diverged = result.any_diverged || t.diverged_at.has_value();
            ++task;
        }
    }
    manifest["trials"] = std::move(trials);
    detail::write_file(cfg.output_dir / "manifest.json", manifest.dump(2) + '\n');
    return result;
}

} // namespace mwgrad

#endif
