#ifndef MWGRAD_HARNESS_CONFIG_HPP
#define MWGRAD_HARNESS_CONFIG_HPP

#include "mwgrad/diagnostics.hpp"
#include "mwgrad/objectives.hpp"
#include "mwgrad/run_config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mwgrad {

enum class Scenario { Toy4, EuclideanRateConvex, EuclideanRateStronglyConvex, Custom };

inline std::string_view to_string(Scenario s) {
    switch (s) {
    case Scenario::Toy4: return "toy4";
    case Scenario::EuclideanRateConvex: return "euclidean_rate_convex";
    case Scenario::EuclideanRateStronglyConvex: return "euclidean_rate_strongly_convex";
    case Scenario::Custom: return "custom";
    }
    return "?";
}

inline bool is_rate_scenario(Scenario s) {
    return s == Scenario::EuclideanRateConvex || s == Scenario::EuclideanRateStronglyConvex;
}

/// Euclidean-reduction settings: one particle started at initial_position,
/// merit evaluated on a grid every merit_dt units of continuous time.
struct RateSettings {
    Vector initial_position;
    FitWindow window{5.0, 50.0};
    SearchBox box;
    double resolution = 1e-4;
    double merit_dt = 0.1;
};

struct ExperimentConfig {
    Scenario scenario = Scenario::Custom;
    // method and step_size are filled per run from methods / step_sizes
    RunConfig run;
    std::vector<Method> methods;
    std::size_t num_trials = 1;
    std::vector<double> step_sizes;
    std::size_t snapshot_stride = 0;
    std::filesystem::path output_dir = "mwgrad_out";
    RateSettings rate;
    // Raw objective description, echoed into the manifest.
    std::string objectives_source = "toy4";
};

/// Parse or validation failure. Carries the offending key and, when known, the 1-based line.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, int line, const std::string& message)
        : std::runtime_error(format(key, line, message)), key_(std::move(key)), line_(line) {}

    const std::string& key() const { return key_; }
    int line() const { return line_; }

private:
    static std::string format(const std::string& key, int line, const std::string& message) {
        std::ostringstream os;
        if (line > 0) {
            os << "line " << line << ": ";
        }
        if (!key.empty()) {
            os << "'" << key << "': ";
        }
        os << message;
        return os.str();
    }

    std::string key_;
    int line_;
};

namespace detail {

inline int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

template <typename T>
T scalar_as(const YAML::Node& n, const std::string& key) {
    if (!n.IsScalar()) {
        throw ConfigError(key, line_of(n), "expected a scalar");
    }
    try {
        return n.as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError(key, line_of(n), "cannot convert '" + n.Scalar() + "'");
    }
}

inline double positive_real(const YAML::Node& n, const std::string& key) {
    const double v = scalar_as<double>(n, key);
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw ConfigError(key, line_of(n), "must be a positive finite number");
    }
    return v;
}

inline std::size_t count(const YAML::Node& n, const std::string& key, std::size_t min) {
    const auto v = scalar_as<long long>(n, key);
    if (v < static_cast<long long>(min)) {
        throw ConfigError(key, line_of(n), "must be at least " + std::to_string(min));
    }
    return static_cast<std::size_t>(v);
}

inline Vector vector_of(const YAML::Node& n, const std::string& key) {
    if (!n.IsSequence() || n.size() == 0) {
        throw ConfigError(key, line_of(n), "expected a non-empty list of numbers");
    }
    Vector v(static_cast<Eigen::Index>(n.size()));
    for (std::size_t i = 0; i < n.size(); ++i) {
        v[static_cast<Eigen::Index>(i)] = scalar_as<double>(n[i], key);
    }
    return v;
}

inline Matrix matrix_of(const YAML::Node& n, const std::string& key) {
    if (!n.IsSequence() || n.size() == 0) {
        throw ConfigError(key, line_of(n), "expected a list of rows");
    }
    const auto rows = static_cast<Eigen::Index>(n.size());
    Matrix a;
    for (Eigen::Index i = 0; i < rows; ++i) {
        const Vector row = vector_of(n[static_cast<std::size_t>(i)], key);
        if (i == 0) {
            a.resize(rows, row.size());
        } else if (row.size() != a.cols()) {
            throw ConfigError(key, line_of(n), "rows have different lengths");
        }
        a.row(i) = row.transpose();
    }
    return a;
}

inline void reject_unknown(const YAML::Node& map, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& kv : map) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.contains(key)) {
            throw ConfigError(where.empty() ? key : where + "." + key, line_of(kv.first), "unknown key");
        }
    }
}

inline Target parse_target(const YAML::Node& n, const std::string& where) {
    if (!n.IsMap()) {
        throw ConfigError(where, line_of(n), "each target must be a mapping");
    }
    if (!n["type"]) {
        throw ConfigError(where + ".type", line_of(n), "missing");
    }
    const auto type = scalar_as<std::string>(n["type"], where + ".type");
    try {
        if (type == "quadratic") {
            reject_unknown(n, {"type", "center", "curvature"}, where);
            if (!n["center"] || !n["curvature"]) {
                throw ConfigError(where, line_of(n), "quadratic needs center and curvature");
            }
            return QuadraticTarget(vector_of(n["center"], where + ".center"),
                                   matrix_of(n["curvature"], where + ".curvature"));
        }
        if (type == "mixture") {
            reject_unknown(n, {"type", "components"}, where);
            const YAML::Node comps = n["components"];
            if (!comps || !comps.IsSequence() || comps.size() == 0) {
                throw ConfigError(where + ".components", line_of(n), "expected a non-empty list");
            }
            std::vector<GaussianComponent> parts;
            for (std::size_t j = 0; j < comps.size(); ++j) {
                const std::string cw = where + ".components[" + std::to_string(j) + "]";
                reject_unknown(comps[j], {"weight", "mean", "covariance"}, cw);
                if (!comps[j]["weight"] || !comps[j]["mean"] || !comps[j]["covariance"]) {
                    throw ConfigError(cw, line_of(comps[j]), "component needs weight, mean and covariance");
                }
                parts.push_back({scalar_as<double>(comps[j]["weight"], cw + ".weight"),
                                 vector_of(comps[j]["mean"], cw + ".mean"),
                                 matrix_of(comps[j]["covariance"], cw + ".covariance")});
            }
            return GaussianMixtureTarget(std::move(parts));
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where, line_of(n), e.what());
    }
    throw ConfigError(where + ".type", line_of(n["type"]), "expected 'quadratic' or 'mixture'");
}

inline std::shared_ptr<const ObjectiveSet> parse_objectives(const YAML::Node& n) {
    if (n.IsScalar()) {
        if (n.Scalar() == "toy4") {
            return std::make_shared<const ObjectiveSet>(toy4_objectives());
        }
        throw ConfigError("objectives", line_of(n), "unknown built-in '" + n.Scalar() + "'");
    }
    if (!n.IsMap()) {
        throw ConfigError("objectives", line_of(n), "expected 'toy4' or a mapping");
    }
    reject_unknown(n, {"include_entropy", "targets"}, "objectives");
    const YAML::Node targets = n["targets"];
    if (!targets || !targets.IsSequence() || targets.size() == 0) {
        throw ConfigError("objectives.targets", line_of(n), "expected a non-empty list");
    }
    const bool entropy = n["include_entropy"] ? scalar_as<bool>(n["include_entropy"], "objectives.include_entropy")
                                              : true;
    std::vector<Target> list;
    for (std::size_t k = 0; k < targets.size(); ++k) {
        list.push_back(parse_target(targets[k], "objectives.targets[" + std::to_string(k) + "]"));
    }
    try {
        return std::make_shared<const ObjectiveSet>(std::move(list), entropy);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("objectives", line_of(n), e.what());
    }
}

inline MomentumSchedule parse_schedule(const YAML::Node& n) {
    if (n.IsScalar()) {
        if (n.Scalar() == "convex") {
            return MomentumSchedule::convex();
        }
        throw ConfigError("schedule", line_of(n), "expected 'convex' or {regime: strongly_convex, beta: ...}");
    }
    reject_unknown(n, {"regime", "beta"}, "schedule");
    const auto regime = n["regime"] ? scalar_as<std::string>(n["regime"], "schedule.regime") : std::string("convex");
    if (regime == "convex") {
        if (n["beta"]) {
            throw ConfigError("schedule.beta", line_of(n["beta"]), "only allowed with strongly_convex");
        }
        return MomentumSchedule::convex();
    }
    if (regime == "strongly_convex") {
        if (!n["beta"]) {
            throw ConfigError("schedule.beta", line_of(n), "required for strongly_convex");
        }
        return MomentumSchedule::strongly_convex(positive_real(n["beta"], "schedule.beta"));
    }
    throw ConfigError("schedule.regime", line_of(n["regime"]), "expected convex or strongly_convex");
}

inline Scenario parse_scenario(const YAML::Node& n) {
    const auto s = scalar_as<std::string>(n, "scenario");
    for (Scenario sc : {Scenario::Toy4, Scenario::EuclideanRateConvex, Scenario::EuclideanRateStronglyConvex,
                        Scenario::Custom}) {
        if (s == to_string(sc)) {
            return sc;
        }
    }
    throw ConfigError("scenario", line_of(n), "unknown scenario '" + s + "'");
}

inline std::string dump_node(const YAML::Node& n) {
    YAML::Emitter out;
    out << YAML::Flow << n;
    return out.c_str();
}

} // namespace detail

/// Builds a validated ExperimentConfig from a YAML document.
inline ExperimentConfig parse_config(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError("", e.mark.line + 1, e.msg);
    }
    if (!root.IsMap()) {
        throw ConfigError("", 1, "top level must be a mapping");
    }
    using namespace detail;
    reject_unknown(root,
                   {"scenario", "methods", "num_particles", "dim", "iterations", "seed", "num_trials", "step_sizes",
                    "bandwidth", "bandwidth_rule", "paper_exact_scaling", "schedule", "accel_update_order",
                    "log_stride", "snapshot_stride", "output_dir", "objectives", "qp_tol", "qp_max_iters", "rate"},
                   "");
    if (!root["scenario"]) {
        throw ConfigError("scenario", 0, "missing required key");
    }

    ExperimentConfig cfg;
    cfg.scenario = parse_scenario(root["scenario"]);
    const bool rate = is_rate_scenario(cfg.scenario);
    RunConfig& run = cfg.run;

    if (root["objectives"]) {
        run.objectives = parse_objectives(root["objectives"]);
        cfg.objectives_source = dump_node(root["objectives"]);
    } else if (cfg.scenario == Scenario::Toy4) {
        run.objectives = std::make_shared<const ObjectiveSet>(toy4_objectives());
    } else {
        throw ConfigError("objectives", 0, "required for this scenario");
    }
    if (cfg.scenario == Scenario::Toy4 && root["objectives"] &&
        !(root["objectives"].IsScalar() && root["objectives"].Scalar() == "toy4")) {
        throw ConfigError("objectives", line_of(root["objectives"]), "scenario toy4 uses the built-in targets");
    }

    if (root["methods"]) {
        const YAML::Node ms = root["methods"];
        if (!ms.IsSequence() || ms.size() == 0) {
            throw ConfigError("methods", line_of(ms), "expected a non-empty list");
        }
        for (const auto& m : ms) {
            const auto name = scalar_as<std::string>(m, "methods");
            const auto parsed = parse_method(name);
            if (!parsed) {
                throw ConfigError("methods", line_of(m), "unknown method '" + name + "'");
            }
            cfg.methods.push_back(*parsed);
        }
    } else {
        cfg.methods = {Method::MWGraD_SVGD, Method::MWGraD_Blob, Method::AMWGraD_SVGD, Method::AMWGraD_Blob};
    }

    if (!root["step_sizes"]) {
        throw ConfigError("step_sizes", 0, "missing required key");
    }
    {
        const YAML::Node ss = root["step_sizes"];
        if (!ss.IsSequence() || ss.size() == 0) {
            throw ConfigError("step_sizes", line_of(ss), "expected a non-empty list");
        }
        for (const auto& s : ss) {
            cfg.step_sizes.push_back(positive_real(s, "step_sizes"));
        }
    }

    if (root["iterations"]) {
        run.iterations = count(root["iterations"], "iterations", 0);
    } else if (!rate) {
        throw ConfigError("iterations", 0, "missing required key");
    }
    if (root["num_particles"]) {
        run.num_particles = count(root["num_particles"], "num_particles", 1);
    }
    run.dim = static_cast<std::size_t>(run.objectives->dim());
    if (root["dim"] && count(root["dim"], "dim", 1) != run.dim) {
        throw ConfigError("dim", line_of(root["dim"]), "does not match the objectives' dimension");
    }
    if (root["seed"]) {
        run.seed = scalar_as<std::uint64_t>(root["seed"], "seed");
    }
    if (root["num_trials"]) {
        cfg.num_trials = count(root["num_trials"], "num_trials", 1);
    }
    if (root["bandwidth"]) {
        run.bandwidth = positive_real(root["bandwidth"], "bandwidth");
    }
    if (root["bandwidth_rule"]) {
        const auto r = scalar_as<std::string>(root["bandwidth_rule"], "bandwidth_rule");
        if (r == "fixed") {
            run.bandwidth_rule = BandwidthRule::Fixed;
        } else if (r == "median") {
            run.bandwidth_rule = BandwidthRule::Median;
        } else {
            throw ConfigError("bandwidth_rule", line_of(root["bandwidth_rule"]), "expected fixed or median");
        }
    }
    if (root["paper_exact_scaling"]) {
        run.svgd.paper_exact_scaling = scalar_as<bool>(root["paper_exact_scaling"], "paper_exact_scaling");
    }
    if (root["schedule"]) {
        run.schedule = parse_schedule(root["schedule"]);
    }
    if (root["accel_update_order"]) {
        const auto o = scalar_as<std::string>(root["accel_update_order"], "accel_update_order");
        if (o == "semi_implicit") {
            run.accel_order = AccelUpdateOrder::SemiImplicit;
        } else if (o == "position_first") {
            run.accel_order = AccelUpdateOrder::PositionFirst;
        } else {
            throw ConfigError("accel_update_order", line_of(root["accel_update_order"]),
                              "expected semi_implicit or position_first");
        }
    }
    if (root["log_stride"]) {
        run.log_stride = count(root["log_stride"], "log_stride", 1);
    }
    if (root["snapshot_stride"]) {
        cfg.snapshot_stride = count(root["snapshot_stride"], "snapshot_stride", 0);
    }
    if (root["output_dir"]) {
        cfg.output_dir = scalar_as<std::string>(root["output_dir"], "output_dir");
    }
    if (root["qp_tol"]) {
        run.qp.tol = positive_real(root["qp_tol"], "qp_tol");
    }
    if (root["qp_max_iters"]) {
        run.qp.max_iters = count(root["qp_max_iters"], "qp_max_iters", 1);
    }

    if (run.schedule.regime() == MomentumRegime::StronglyConvex) {
        for (double eta : cfg.step_sizes) {
            if (*run.schedule.beta() * eta >= 1.0) {
                throw ConfigError("step_sizes", line_of(root["step_sizes"]), "beta * step size must be below 1");
            }
        }
    }

    if (rate) {
        if (run.objectives->include_entropy()) {
            throw ConfigError("objectives.include_entropy", line_of(root["objectives"]),
                              "rate scenarios need include_entropy: false");
        }
        for (const auto& t : run.objectives->targets()) {
            if (!std::holds_alternative<QuadraticTarget>(t)) {
                throw ConfigError("objectives.targets", line_of(root["objectives"]),
                                  "rate scenarios accept quadratic targets only");
            }
        }
        if (root["num_particles"] && run.num_particles != 1) {
            throw ConfigError("num_particles", line_of(root["num_particles"]), "rate scenarios use one particle");
        }
        if (cfg.scenario == Scenario::EuclideanRateStronglyConvex &&
            run.schedule.regime() != MomentumRegime::StronglyConvex) {
            throw ConfigError("schedule", 0, "euclidean_rate_strongly_convex needs a strongly_convex schedule");
        }
        run.num_particles = 1;
        const YAML::Node r = root["rate"];
        if (!r || !r.IsMap()) {
            throw ConfigError("rate", 0, "rate scenarios need a 'rate' mapping");
        }
        reject_unknown(r, {"initial_position", "window", "search_lo", "search_hi", "resolution", "merit_dt"}, "rate");
        for (const char* key : {"initial_position", "search_lo", "search_hi"}) {
            if (!r[key]) {
                throw ConfigError(std::string("rate.") + key, line_of(r), "missing required key");
            }
        }
        RateSettings& rs = cfg.rate;
        rs.initial_position = vector_of(r["initial_position"], "rate.initial_position");
        rs.box.lo = vector_of(r["search_lo"], "rate.search_lo");
        rs.box.hi = vector_of(r["search_hi"], "rate.search_hi");
        const auto d = static_cast<Eigen::Index>(run.dim);
        if (rs.initial_position.size() != d || rs.box.lo.size() != d || rs.box.hi.size() != d) {
            throw ConfigError("rate", line_of(r), "initial_position and search box must match the dimension");
        }
        if ((rs.box.hi.array() <= rs.box.lo.array()).any()) {
            throw ConfigError("rate.search_hi", line_of(r["search_hi"]), "must exceed search_lo");
        }
        for (const auto& t : run.objectives->targets()) {
            const auto& c = std::get<QuadraticTarget>(t).center();
            if ((c.array() < rs.box.lo.array()).any() || (c.array() > rs.box.hi.array()).any()) {
                throw ConfigError("rate.search_lo", line_of(r), "search box must contain every center");
            }
        }
        if (r["window"]) {
            const Vector w = vector_of(r["window"], "rate.window");
            if (w.size() != 2 || !(w[0] > 0.0) || !(w[1] > w[0])) {
                throw ConfigError("rate.window", line_of(r["window"]), "expected [lo, hi] with 0 < lo < hi");
            }
            rs.window = {w[0], w[1]};
        }
        if (r["resolution"]) {
            rs.resolution = positive_real(r["resolution"], "rate.resolution");
        }
        if (r["merit_dt"]) {
            rs.merit_dt = positive_real(r["merit_dt"], "rate.merit_dt");
        }
    } else if (root["rate"]) {
        throw ConfigError("rate", line_of(root["rate"]), "only valid for euclidean_rate_* scenarios");
    }

    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("", 0, "cannot open config file " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

} // namespace mwgrad

#endif
