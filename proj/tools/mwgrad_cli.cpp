// mwgrad command line: run / rates / validate.
//
// Exit codes: 0 success, 1 invalid config, 2 a trial diverged, 3 I/O or other runtime error.

#include "mwgrad/harness/config.hpp"
#include "mwgrad/harness/experiment.hpp"
#include "mwgrad/harness/rates.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitDiverged = 2;
constexpr int kExitRuntime = 3;

void print_rate_report(const mwgrad::RateReport& report) {
    for (const auto& r : report.runs) {
        std::cout << r.label << " eta=" << mwgrad::short_real(r.step_size) << " "
                  << (r.fit == mwgrad::RateFit::LogLog ? "loglog_slope" : "exp_rate") << "=";
        if (r.value) {
            std::cout << *r.value;
        } else {
            std::cout << "n/a";
        }
        std::cout << " (" << mwgrad::to_string(r.status) << ")\n";
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-objective Wasserstein gradient descent (MWGraD / A-MWGraD) experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::string> method_name;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::size_t jobs = 1;
    bool timing = false;

    auto* run = app.add_subcommand("run", "Run every (method, step size, trial) and write CSV output");
    run->add_option("--config", config_path, "Experiment config file")->required();
    run->add_option("--method", method_name, "Restrict to one method (MWGraD-SVGD, MWGraD-Blob, AMWGraD-SVGD, AMWGraD-Blob)");
    run->add_option("--seed", seed, "Override the base seed");
    run->add_option("--out", out_dir, "Override output_dir");
    run->add_option("--jobs", jobs, "Worker threads for independent trials")->check(CLI::PositiveNumber);
    run->add_flag("--record-timing", timing, "Store per-trial wall-clock seconds in the manifest");

    auto* rates = app.add_subcommand("rates", "Euclidean-reduction merit rates");
    rates->add_option("--config", config_path, "Experiment config file")->required();
    rates->add_option("--out", out_dir, "Override output_dir");

    auto* validate = app.add_subcommand("validate", "Parse and validate a config, then exit");
    validate->add_option("--config", config_path, "Experiment config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitInvalid;
    }

    mwgrad::ExperimentConfig cfg;
    try {
        cfg = mwgrad::load_config(config_path);
        if (method_name) {
            const auto m = mwgrad::parse_method(*method_name);
            if (!m) {
                throw mwgrad::ConfigError("--method", 0, "unknown method '" + *method_name + "'");
            }
            cfg.methods = {*m};
        }
    } catch (const std::exception& e) {
        std::cerr << config_path << ": " << e.what() << '\n';
        return kExitInvalid;
    }
    if (seed) {
        cfg.run.seed = *seed;
    }
    if (out_dir) {
        cfg.output_dir = *out_dir;
    }

    if (validate->parsed()) {
        std::cout << "ok: scenario " << mwgrad::to_string(cfg.scenario) << ", " << cfg.methods.size() << " method(s), "
                  << cfg.step_sizes.size() << " step size(s), " << cfg.num_trials << " trial(s)\n";
        return kExitOk;
    }

    try {
        if (run->parsed()) {
            if (mwgrad::is_rate_scenario(cfg.scenario)) {
                std::cerr << "scenario " << mwgrad::to_string(cfg.scenario) << " is run with the 'rates' subcommand\n";
                return kExitInvalid;
            }
            const auto result = mwgrad::run_experiment(cfg, {jobs, timing});
            for (const auto& g : result.groups) {
                for (const auto& t : g.trials) {
                    if (t.diverged_at) {
                        std::cerr << "diverged: " << mwgrad::to_string(g.method) << " eta=" << g.step_size << " trial "
                                  << t.trial_index << " at iteration " << *t.diverged_at << '\n';
                    }
                }
            }
            std::cout << "wrote " << cfg.output_dir.string() << '\n';
            return result.any_diverged ? kExitDiverged : kExitOk;
        }
        if (!mwgrad::is_rate_scenario(cfg.scenario)) {
            std::cerr << "'rates' needs a euclidean_rate_convex or euclidean_rate_strongly_convex scenario\n";
            return kExitInvalid;
        }
        const auto report = mwgrad::run_rate_scenario(cfg);
        mwgrad::write_rate_report(report, cfg.output_dir);
        print_rate_report(report);
        for (const auto& r : report.runs) {
            if (r.status == mwgrad::RateStatus::Diverged) {
                return kExitDiverged;
            }
        }
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}
