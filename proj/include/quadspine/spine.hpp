#pragma once

// Spine trajectory strategies. Each produces per-joint PD targets and gains;
// the fixed strategy freezes the spine in the plant instead of commanding it.

#include "quadspine/types.hpp"

#include <array>
#include <cmath>
#include <string>

namespace quadspine
{

enum class Strategy { Fixed, Stiffness, FootTracking, TimeReal, TimeOpt };

inline constexpr std::array<Strategy, 5> kAllStrategies{Strategy::Fixed, Strategy::Stiffness,
                                                        Strategy::FootTracking, Strategy::TimeReal,
                                                        Strategy::TimeOpt};

inline std::string_view to_string(Strategy s) {
    switch (s) {
    case Strategy::Fixed: return "fixed";
    case Strategy::Stiffness: return "stiffness";
    case Strategy::FootTracking: return "foot_tracking";
    case Strategy::TimeReal: return "time_real";
    case Strategy::TimeOpt: return "time_opt";
    }
    return "fixed";
}

inline Strategy strategy_from_string(std::string_view s) {
    for (Strategy st : kAllStrategies) {
        if (to_string(st) == s) {
            return st;
        }
    }
    throw Error(ErrorCode::ConfigError, "unknown strategy '" + std::string(s) + "'");
}

inline bool is_time_varying(Strategy s) { return s == Strategy::TimeReal || s == Strategy::TimeOpt; }

/// Constants C1..C4 for one spine joint. `frequency` is the number of sine
/// periods per gait cycle used by the time-varying strategies.
struct JointConstants {
    std::array<double, 4> c{0.0, 0.0, 0.0, 0.0};
    double frequency = 1.0;

    bool operator==(const JointConstants &) const = default;
};

struct StrategyParams {
    Strategy strategy = Strategy::Fixed;
    SpineMap<JointConstants> joints{};

    bool operator==(const StrategyParams &) const = default;
};

/// Time-varying default frequency: two periods per cycle for pitch, one for yaw.
inline double default_frequency(SpineJoint j) {
    return (j == SpineJoint::FrontPitch || j == SpineJoint::RearPitch) ? 2.0 : 1.0;
}

struct SpineCommand {
    SpineMap<double> theta_d{};
    SpineMap<double> kp{};
    SpineMap<double> kd{};
    SpineMap<double> tau_ff{};
};

inline constexpr double kSpineLimit = kPi / 12.0;

namespace detail
{
inline double clamp_spine(double theta, double limit) { return std::clamp(theta, -limit, limit); }
} // namespace detail

inline void validate(const StrategyParams &p) {
    for (SpineJoint j : kAllSpineJoints) {
        const auto &c = p.joints[index(j)].c;
        switch (p.strategy) {
        case Strategy::Stiffness:
            if (c[2] < std::abs(c[0])) {
                throw Error(ErrorCode::InvalidParams, "stiffness strategy needs C3 >= |C1| on joint " +
                                                          std::string(name(j)));
            }
            if (c[3] < 0) {
                throw Error(ErrorCode::InvalidParams, "negative damping on joint " + std::string(name(j)));
            }
            break;
        case Strategy::FootTracking:
            if (c[1] < 0 || c[2] < 0) {
                throw Error(ErrorCode::InvalidParams, "negative gain on joint " + std::string(name(j)));
            }
            break;
        case Strategy::TimeReal:
        case Strategy::TimeOpt:
            if (c[2] < 0 || c[3] < 0) {
                throw Error(ErrorCode::InvalidParams, "negative gain on joint " + std::string(name(j)));
            }
            break;
        case Strategy::Fixed:
            break;
        }
    }
}

/// Kp = C1 sin(2 pi phi + C2) + C3, Kd = C4, zero target.
inline SpineCommand stiffness_command(double phi, const StrategyParams &p) {
    validate(p);
    SpineCommand cmd;
    for (SpineJoint j : kAllSpineJoints) {
        const auto &c = p.joints[index(j)].c;
        cmd.theta_d[index(j)] = 0.0;
        cmd.kp[index(j)] = c[0] * std::sin(2.0 * kPi * phi + c[1]) + c[2];
        cmd.kd[index(j)] = c[3];
    }
    return cmd;
}

/// Targets from foot placement. `feet` and `neutrals` are in the chassis frame.
/// Pitch: C1 times the mean x offset of the pair from neutral. Yaw: C1 times
/// the angle between the left-right foot vector and the lateral axis, signed
/// by the x component of that vector. Kp = C2, Kd = C3.
inline SpineCommand foot_tracking_command(const LegMap<Vec3> &feet, const LegMap<Vec3> &neutrals,
                                          const StrategyParams &p, double limit = kSpineLimit) {
    validate(p);
    SpineCommand cmd;
    auto pair = [&](Leg left, Leg right, SpineJoint pitch, SpineJoint yaw) {
        const Vec3 &pl = feet[index(left)];
        const Vec3 &pr = feet[index(right)];
        const double dx = 0.5 * ((pl.x() - neutrals[index(left)].x()) + (pr.x() - neutrals[index(right)].x()));
        const Vec3 d = pl - pr;
        const double n = d.norm();
        if (n < 1e-6) {
            throw Error(ErrorCode::DegenerateFeet, "left and right feet coincide");
        }
        const double cosang = std::clamp(d.dot(Vec3::UnitY()) / n, -1.0, 1.0);
        const double sgn = (d.x() > 0) - (d.x() < 0);
        const auto &cp = p.joints[index(pitch)].c;
        const auto &cy = p.joints[index(yaw)].c;
        cmd.theta_d[index(pitch)] = detail::clamp_spine(cp[0] * dx, limit);
        cmd.theta_d[index(yaw)] = detail::clamp_spine(cy[0] * sgn * std::acos(cosang), limit);
        for (SpineJoint j : {pitch, yaw}) {
            cmd.kp[index(j)] = p.joints[index(j)].c[1];
            cmd.kd[index(j)] = p.joints[index(j)].c[2];
        }
    };
    pair(Leg::FL, Leg::FR, SpineJoint::FrontPitch, SpineJoint::FrontYaw);
    pair(Leg::RL, Leg::RR, SpineJoint::RearPitch, SpineJoint::RearYaw);
    return cmd;
}

/// theta_d = C1 sin(2 pi f phi + C2), Kp = C3, Kd = C4.
inline SpineCommand time_varying_command(double phi, const StrategyParams &p, double limit = kSpineLimit) {
    validate(p);
    SpineCommand cmd;
    for (SpineJoint j : kAllSpineJoints) {
        const JointConstants &jc = p.joints[index(j)];
        cmd.theta_d[index(j)] =
            detail::clamp_spine(jc.c[0] * std::sin(2.0 * kPi * jc.frequency * phi + jc.c[1]), limit);
        cmd.kp[index(j)] = jc.c[2];
        cmd.kd[index(j)] = jc.c[3];
    }
    return cmd;
}

/// Zero target, zero gains, zero feed-forward. The plant freezes the joints.
inline SpineCommand fixed_command() { return SpineCommand{}; }

inline SpineCommand spine_command(const StrategyParams &p, double phi, const LegMap<Vec3> &feet,
                                  const LegMap<Vec3> &neutrals, double limit = kSpineLimit) {
    switch (p.strategy) {
    case Strategy::Fixed: return fixed_command();
    case Strategy::Stiffness: return stiffness_command(phi, p);
    case Strategy::FootTracking: return foot_tracking_command(feet, neutrals, p, limit);
    case Strategy::TimeReal:
    case Strategy::TimeOpt: return time_varying_command(phi, p, limit);
    }
    return fixed_command();
}

/// PD torque toward the command plus its feed-forward term.
inline double spine_pd_torque(const SpineCommand &cmd, SpineJoint j, double theta, double theta_dot) {
    const std::size_t k = index(j);
    return cmd.kp[k] * (cmd.theta_d[k] - theta) - cmd.kd[k] * theta_dot + cmd.tau_ff[k];
}

/// Parameters with every joint's constants set to `c` and default frequencies.
inline StrategyParams uniform_params(Strategy s, const std::array<double, 4> &c) {
    StrategyParams p;
    p.strategy = s;
    for (SpineJoint j : kAllSpineJoints) {
        p.joints[index(j)].c = c;
        p.joints[index(j)].frequency = default_frequency(j);
    }
    return p;
}

} // namespace quadspine
