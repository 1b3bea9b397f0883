#pragma once

// JSON config files: model, gaits, spine presets and experiments. Every loader
// starts from the built-in defaults and overrides the keys present. Relative
// paths inside an experiment file resolve against that file's directory.

#include "quadspine/gait.hpp"
#include "quadspine/model.hpp"
#include "quadspine/mpc.hpp"
#include "quadspine/sim.hpp"
#include "quadspine/spine.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace quadspine
{

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace detail
{
inline json vec_json(const Vec3 &v) { return json::array({v.x(), v.y(), v.z()}); }

inline Vec3 json_vec(const json &j) {
    if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::ConfigError, "expected a 3-vector, got " + j.dump());
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline json mat_json(const Mat3 &m) {
    json j = json::array();
    for (int r = 0; r < 3; ++r) j.push_back(json::array({m(r, 0), m(r, 1), m(r, 2)}));
    return j;
}

inline Mat3 json_mat(const json &j) {
    if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::ConfigError, "expected a 3x3 matrix");
    Mat3 m;
    for (int r = 0; r < 3; ++r) m.row(r) = json_vec(j[static_cast<std::size_t>(r)]).transpose();
    return m;
}

template <typename T>
inline void get_if(const json &j, const char *key, T &out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

inline json read_json(const fs::path &path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception &e) {
        throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
    }
}

/// Runs a JSON conversion, turning library exceptions into ConfigError.
template <typename F>
inline auto guarded(const std::string &what, F &&f) {
    try {
        return f();
    } catch (const json::exception &e) {
        throw Error(ErrorCode::ConfigError, what + ": " + e.what());
    }
}

inline constexpr std::array<const char *, 6> kActuatorClassNames{
    "spine_pitch", "spine_yaw", "hip_roll_left", "hip_roll_right", "hip_pitch", "knee"};
} // namespace detail

// Model --------------------------------------------------------------------------

inline json to_json(const ModelParams &p) {
    json j;
    auto body = [](const RigidBodyParams &b) {
        return json{{"mass", b.mass}, {"com", detail::vec_json(b.com)}, {"inertia", detail::mat_json(b.inertia)}};
    };
    j["bodies"] = {{"middle", body(p.middle)}, {"front", body(p.front)}, {"back", body(p.back)}};
    j["front_spine_mount"] = detail::vec_json(p.front_spine_mount);
    j["rear_spine_mount"] = detail::vec_json(p.rear_spine_mount);
    for (SpineJoint sj : kAllSpineJoints) j["spine_axes"][std::string(name(sj))] = detail::vec_json(p.spine_axes[index(sj)]);
    for (Leg leg : kAllLegs) {
        const LegParams &l = p.legs[index(leg)];
        j["legs"][std::string(name(leg))] = {{"hip", detail::vec_json(l.hip)},
                                             {"v0", detail::vec_json(l.v0)},
                                             {"v1", detail::vec_json(l.v1)},
                                             {"v2", detail::vec_json(l.v2)}};
    }
    for (std::size_t k = 0; k < kNumActuatorClasses; ++k) {
        const Actuator &a = p.actuators[k];
        j["actuators"][detail::kActuatorClassNames[k]] = {{"omega_max", a.omega_max},
                                                         {"tau_max", a.tau_max},
                                                         {"theta_min", a.theta_min},
                                                         {"theta_max", a.theta_max},
                                                         {"gear_ratio", a.gear_ratio}};
    }
    j["motor_kv_rpm"] = p.motor_kv_rpm;
    j["winding_resistance"] = p.winding_resistance;
    j["nominal_height"] = p.nominal_height;
    j["leg_joint_inertia"] = p.leg_joint_inertia;
    return j;
}

inline ModelParams model_from_json(const json &j) {
    return detail::guarded("model", [&] {
        ModelParams p = default_model_params();
        auto body = [](const json &b, RigidBodyParams &out) {
            detail::get_if(b, "mass", out.mass);
            if (b.contains("com")) out.com = detail::json_vec(b["com"]);
            if (b.contains("inertia")) out.inertia = detail::json_mat(b["inertia"]);
        };
        if (j.contains("bodies")) {
            const json &b = j["bodies"];
            if (b.contains("middle")) body(b["middle"], p.middle);
            if (b.contains("front")) body(b["front"], p.front);
            if (b.contains("back")) body(b["back"], p.back);
        }
        if (j.contains("front_spine_mount")) p.front_spine_mount = detail::json_vec(j["front_spine_mount"]);
        if (j.contains("rear_spine_mount")) p.rear_spine_mount = detail::json_vec(j["rear_spine_mount"]);
        for (SpineJoint sj : kAllSpineJoints) {
            const std::string n(name(sj));
            if (j.contains("spine_axes") && j["spine_axes"].contains(n)) {
                p.spine_axes[index(sj)] = detail::json_vec(j["spine_axes"][n]);
            }
        }
        for (Leg leg : kAllLegs) {
            const std::string n(name(leg));
            if (!j.contains("legs") || !j["legs"].contains(n)) continue;
            const json &l = j["legs"][n];
            LegParams &lp = p.legs[index(leg)];
            if (l.contains("hip")) lp.hip = detail::json_vec(l["hip"]);
            if (l.contains("v0")) lp.v0 = detail::json_vec(l["v0"]);
            if (l.contains("v1")) lp.v1 = detail::json_vec(l["v1"]);
            if (l.contains("v2")) lp.v2 = detail::json_vec(l["v2"]);
        }
        for (std::size_t k = 0; k < kNumActuatorClasses; ++k) {
            const char *n = detail::kActuatorClassNames[k];
            if (!j.contains("actuators") || !j["actuators"].contains(n)) continue;
            const json &a = j["actuators"][n];
            Actuator &act = p.actuators[k];
            detail::get_if(a, "omega_max", act.omega_max);
            detail::get_if(a, "tau_max", act.tau_max);
            detail::get_if(a, "theta_min", act.theta_min);
            detail::get_if(a, "theta_max", act.theta_max);
            detail::get_if(a, "gear_ratio", act.gear_ratio);
        }
        detail::get_if(j, "motor_kv_rpm", p.motor_kv_rpm);
        detail::get_if(j, "winding_resistance", p.winding_resistance);
        detail::get_if(j, "nominal_height", p.nominal_height);
        detail::get_if(j, "leg_joint_inertia", p.leg_joint_inertia);
        return p;
    });
}

inline ModelParams load_model(const fs::path &path) { return model_from_json(detail::read_json(path)); }

// Gaits --------------------------------------------------------------------------

inline json to_json(const GaitSchedule &g) {
    json j{{"t_stance", g.t_stance}, {"t_swing", g.t_swing}};
    for (Leg leg : kAllLegs) j["offsets"][std::string(name(leg))] = g.offsets[index(leg)];
    j["swing"] = {{"progress", g.swing.progress}, {"lift", g.swing.lift}, {"lift_height", g.swing.lift_height}};
    return j;
}

inline GaitSchedule gait_from_json(GaitId id, const json &j) {
    return detail::guarded("gait " + std::string(to_string(id)), [&] {
        GaitSchedule g = named_gait(id);
        detail::get_if(j, "t_stance", g.t_stance);
        detail::get_if(j, "t_swing", g.t_swing);
        for (Leg leg : kAllLegs) {
            const std::string n(name(leg));
            if (j.contains("offsets") && j["offsets"].contains(n)) g.offsets[index(leg)] = j["offsets"][n].get<double>();
        }
        if (j.contains("swing")) {
            detail::get_if(j["swing"], "progress", g.swing.progress);
            detail::get_if(j["swing"], "lift", g.swing.lift);
            detail::get_if(j["swing"], "lift_height", g.swing.lift_height);
        }
        validate(g);
        return g;
    });
}

/// Gait table keyed by gait name; gaits missing from the file keep their
/// built-in schedules.
inline std::map<GaitId, GaitSchedule> gaits_from_json(const json &j) {
    std::map<GaitId, GaitSchedule> out;
    for (GaitId id : {GaitId::Walk, GaitId::Trot, GaitId::Turn}) {
        const std::string n(to_string(id));
        out[id] = j.contains(n) ? gait_from_json(id, j[n]) : named_gait(id);
    }
    return out;
}

inline std::map<GaitId, GaitSchedule> load_gaits(const fs::path &path) { return gaits_from_json(detail::read_json(path)); }

// Spine presets ------------------------------------------------------------------

inline json to_json(const StrategyParams &p) {
    json j{{"strategy", std::string(to_string(p.strategy))}};
    for (SpineJoint sj : kAllSpineJoints) {
        const JointConstants &c = p.joints[index(sj)];
        j["joints"][std::string(name(sj))] = {{"c", c.c}, {"frequency", c.frequency}};
    }
    return j;
}

inline StrategyParams strategy_from_json(const json &j) {
    return detail::guarded("spine preset", [&] {
        StrategyParams p;
        p.strategy = strategy_from_string(j.at("strategy").get<std::string>());
        for (SpineJoint sj : kAllSpineJoints) {
            JointConstants &c = p.joints[index(sj)];
            c.frequency = default_frequency(sj);
            const std::string n(name(sj));
            if (j.contains("joints") && j["joints"].contains(n)) {
                detail::get_if(j["joints"][n], "c", c.c);
                detail::get_if(j["joints"][n], "frequency", c.frequency);
            }
        }
        validate(p);
        return p;
    });
}

struct Preset {
    GaitId gait = GaitId::Walk;
    StrategyParams params;
    std::string note;
};

inline json to_json(const Preset &p) {
    json j = to_json(p.params);
    j["gait"] = std::string(to_string(p.gait));
    if (!p.note.empty()) j["note"] = p.note;
    return j;
}

inline Preset preset_from_json(const json &j) {
    Preset p;
    p.params = strategy_from_json(j);
    p.gait = detail::guarded("preset gait", [&] { return gait_from_string(j.at("gait").get<std::string>()); });
    if (j.contains("note")) p.note = j["note"].get<std::string>();
    return p;
}

/// {"presets": [...]}; later entries replace earlier ones for the same
/// (strategy, gait).
inline std::vector<Preset> presets_from_json(const json &j) {
    std::vector<Preset> out;
    if (!j.contains("presets") || !j["presets"].is_array()) {
        throw Error(ErrorCode::ConfigError, "preset file needs a 'presets' array");
    }
    for (const json &e : j["presets"]) out.push_back(preset_from_json(e));
    return out;
}

inline std::vector<Preset> load_presets(const fs::path &path) { return presets_from_json(detail::read_json(path)); }

inline StrategyParams find_preset(const std::vector<Preset> &presets, Strategy s, GaitId g) {
    if (s == Strategy::Fixed) {
        StrategyParams p;
        p.strategy = Strategy::Fixed;
        return p;
    }
    for (auto it = presets.rbegin(); it != presets.rend(); ++it) {
        if (it->params.strategy == s && it->gait == g) return it->params;
    }
    throw Error(ErrorCode::ConfigError,
                "no preset for strategy " + std::string(to_string(s)) + " and gait " + std::string(to_string(g)));
}

// MPC and simulation -------------------------------------------------------------

inline json to_json(const MpcConfig &c) {
    return json{{"horizon", c.horizon},   {"dt", c.dt},         {"q_weights", c.q_weights},
                {"r_weight", c.r_weight}, {"mu", c.mu},         {"fz_min", c.fz_min},
                {"fz_max", c.fz_max},     {"gravity", c.gravity}, {"qp_max_iterations", c.qp.max_iterations},
                {"qp_tolerance", c.qp.tolerance}};
}

inline MpcConfig mpc_from_json(const json &j) {
    return detail::guarded("mpc", [&] {
        MpcConfig c;
        detail::get_if(j, "horizon", c.horizon);
        detail::get_if(j, "dt", c.dt);
        detail::get_if(j, "q_weights", c.q_weights);
        detail::get_if(j, "r_weight", c.r_weight);
        detail::get_if(j, "mu", c.mu);
        detail::get_if(j, "fz_min", c.fz_min);
        detail::get_if(j, "fz_max", c.fz_max);
        detail::get_if(j, "gravity", c.gravity);
        detail::get_if(j, "qp_max_iterations", c.qp.max_iterations);
        detail::get_if(j, "qp_tolerance", c.qp.tolerance);
        validate(c);
        return c;
    });
}

inline json to_json(const SimConfig &c) {
    return json{{"dt", c.dt},
                {"control_divisor", c.control_divisor},
                {"gravity", c.gravity},
                {"ground", c.ground},
                {"mu", c.mu},
                {"duration", c.duration},
                {"touchdown_height", c.touchdown_height},
                {"swing_kp", c.swing_kp},
                {"swing_kd", c.swing_kd},
                {"position_error_limit", c.position_error_limit},
                {"max_tilt", c.max_tilt},
                {"min_height_fraction", c.min_height_fraction},
                {"divergence_limit", c.divergence_limit},
                {"stand", c.stand}};
}

inline SimConfig sim_from_json(const json &j) {
    return detail::guarded("sim", [&] {
        SimConfig c;
        detail::get_if(j, "dt", c.dt);
        detail::get_if(j, "control_divisor", c.control_divisor);
        detail::get_if(j, "gravity", c.gravity);
        detail::get_if(j, "ground", c.ground);
        detail::get_if(j, "mu", c.mu);
        detail::get_if(j, "duration", c.duration);
        detail::get_if(j, "touchdown_height", c.touchdown_height);
        detail::get_if(j, "swing_kp", c.swing_kp);
        detail::get_if(j, "swing_kd", c.swing_kd);
        detail::get_if(j, "position_error_limit", c.position_error_limit);
        detail::get_if(j, "max_tilt", c.max_tilt);
        detail::get_if(j, "min_height_fraction", c.min_height_fraction);
        detail::get_if(j, "divergence_limit", c.divergence_limit);
        detail::get_if(j, "stand", c.stand);
        validate(c);
        return c;
    });
}

// Experiments --------------------------------------------------------------------

/// Default commands per gait: walk 0.3 m/s, turn 0.3 m/s at -0.5 rad/s,
/// trot 0.6 m/s; ramps 0.5 m/s^2 and 1.0 rad/s^2.
inline CommandProfile default_command(GaitId g) {
    CommandProfile c;
    switch (g) {
    case GaitId::Walk: c.target.v = Vec3(0.3, 0, 0); break;
    case GaitId::Turn:
        c.target.v = Vec3(0.3, 0, 0);
        c.target.yaw_rate = -0.5;
        break;
    case GaitId::Trot: c.target.v = Vec3(0.6, 0, 0); break;
    }
    return c;
}

struct ExperimentConfig {
    fs::path model_path;    // empty: built-in model
    fs::path gaits_path;    // empty: built-in gaits
    fs::path presets_path;  // required for non-fixed strategies
    GaitId gait = GaitId::Walk;
    Strategy strategy = Strategy::Fixed;
    CommandProfile command = default_command(GaitId::Walk);
    MpcConfig mpc{};
    SimConfig sim{};
    fs::path output_dir = "out";
    std::uint64_t seed = 0;
};

inline ExperimentConfig experiment_from_json(const json &j, const fs::path &base_dir) {
    return detail::guarded("experiment", [&] {
        ExperimentConfig e;
        auto path = [&](const char *key) -> fs::path {
            if (!j.contains(key)) return {};
            const fs::path p = j[key].get<std::string>();
            return p.is_absolute() ? p : base_dir / p;
        };
        e.model_path = path("model");
        e.gaits_path = path("gaits");
        e.presets_path = path("presets");
        if (j.contains("gait")) e.gait = gait_from_string(j["gait"].get<std::string>());
        if (j.contains("strategy")) e.strategy = strategy_from_string(j["strategy"].get<std::string>());
        e.command = default_command(e.gait);
        if (j.contains("command")) {
            const json &c = j["command"];
            if (c.contains("v")) {
                const auto v = c["v"].get<std::vector<double>>();
                if (v.size() != 2 && v.size() != 3) throw Error(ErrorCode::ConfigError, "command v needs 2 values");
                e.command.target.v = Vec3(v[0], v[1], 0.0);
            }
            detail::get_if(c, "yaw_rate", e.command.target.yaw_rate);
            detail::get_if(c, "lin_accel", e.command.lin_accel);
            detail::get_if(c, "ang_accel", e.command.ang_accel);
        }
        if (!e.command.target.v.allFinite() || !std::isfinite(e.command.target.yaw_rate)) {
            throw Error(ErrorCode::ConfigError, "command velocities must be finite");
        }
        if (j.contains("mpc")) e.mpc = mpc_from_json(j["mpc"]);
        if (j.contains("sim")) e.sim = sim_from_json(j["sim"]);
        if (j.contains("duration")) e.sim.duration = j["duration"].get<double>();
        validate(e.sim);
        if (j.contains("output_dir")) {
            e.output_dir = j["output_dir"].get<std::string>();
        }
        detail::get_if(j, "seed", e.seed);
        for (const fs::path *p : {&e.model_path, &e.gaits_path, &e.presets_path}) {
            if (!p->empty() && !fs::exists(*p)) throw Error(ErrorCode::ConfigError, "missing file " + p->string());
        }
        return e;
    });
}

inline ExperimentConfig load_experiment(const fs::path &path) {
    return experiment_from_json(detail::read_json(path), path.parent_path());
}

/// Model, gait, preset and configs resolved into a runnable episode.
struct ResolvedExperiment {
    ModelParams model;
    EpisodeConfig episode;
};

inline ResolvedExperiment resolve(const ExperimentConfig &e) {
    ResolvedExperiment r;
    r.model = e.model_path.empty() ? default_model_params() : load_model(e.model_path);
    const auto gaits = e.gaits_path.empty() ? gaits_from_json(json::object()) : load_gaits(e.gaits_path);
    r.episode.gait = gaits.at(e.gait);
    if (e.strategy == Strategy::Fixed) {
        r.episode.strategy.strategy = Strategy::Fixed;
    } else {
        if (e.presets_path.empty()) {
            throw Error(ErrorCode::ConfigError, "strategy " + std::string(to_string(e.strategy)) + " needs a presets file");
        }
        r.episode.strategy = find_preset(load_presets(e.presets_path), e.strategy, e.gait);
    }
    r.episode.command = e.command;
    r.episode.mpc = e.mpc;
    r.episode.sim = e.sim;
    return r;
}

} // namespace quadspine
