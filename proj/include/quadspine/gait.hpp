#pragma once

// Sawtooth CPG, per-leg phase offsets, stance/swing classification and the
// Bezier swing-foot trajectory.

#include "quadspine/lie.hpp"
#include "quadspine/types.hpp"

#include <array>
#include <cmath>
#include <string>

namespace quadspine
{

enum class GaitId { Walk, Trot, Turn };

inline std::string_view to_string(GaitId g) {
    switch (g) {
    case GaitId::Walk: return "walk";
    case GaitId::Trot: return "trot";
    case GaitId::Turn: return "turn";
    }
    return "walk";
}

inline GaitId gait_from_string(std::string_view s) {
    if (s == "walk") return GaitId::Walk;
    if (s == "trot") return GaitId::Trot;
    if (s == "turn") return GaitId::Turn;
    throw Error(ErrorCode::ConfigError, "unknown gait '" + std::string(s) + "'");
}

/// Degree-5 Bezier swing profile. `progress` are control values of the fraction
/// of the start->end displacement covered, `lift` of the height above the
/// start-end chord in units of `lift_height`.
struct SwingCurve {
    std::array<double, 6> progress{0.0, 0.0, 0.5, 0.5, 1.0, 1.0};
    std::array<double, 6> lift{0.0, 0.0, 1.6, 1.6, 0.0, 0.0};
    double lift_height = 0.03;  // m
};

struct GaitSchedule {
    GaitId id = GaitId::Walk;
    double t_stance = 0.3;  // s
    double t_swing = 0.1;   // s
    LegMap<double> offsets{0.0, 0.5, 0.75, 0.25};
    SwingCurve swing{};

    double t_cycle() const { return t_stance + t_swing; }
    double duty() const { return t_stance / t_cycle(); }
};

inline void validate(const GaitSchedule &g) {
    if (!(g.t_stance > 0) || !(g.t_swing > 0)) {
        throw Error(ErrorCode::ConfigError, "t_stance and t_swing must be positive");
    }
    for (double psi : g.offsets) {
        if (!(psi >= 0.0 && psi < 1.0)) {
            throw Error(ErrorCode::ConfigError, "phase offsets must lie in [0, 1)");
        }
    }
    if (g.swing.progress.front() != 0.0 || g.swing.progress.back() != 1.0 || g.swing.lift.front() != 0.0 ||
        g.swing.lift.back() != 0.0) {
        throw Error(ErrorCode::ConfigError, "swing curve must start at 0 and end at 1 on the ground");
    }
}

/// Named gaits with the published stance/swing durations and offsets.
inline GaitSchedule named_gait(GaitId id) {
    GaitSchedule g;
    g.id = id;
    switch (id) {
    case GaitId::Walk:
    case GaitId::Turn:
        g.t_stance = 0.3;
        g.t_swing = 0.1;
        g.offsets = {0.0, 0.5, 0.75, 0.25};
        break;
    case GaitId::Trot:
        g.t_stance = 0.2;
        g.t_swing = 0.1;
        g.offsets = {0.0, 0.5, 0.5, 0.0};
        break;
    }
    return g;
}

inline double wrap01(double x) {
    double r = x - std::floor(x);
    return r >= 1.0 ? 0.0 : r;
}

/// Gait phase in [0, 1) at time t.
inline double cpg_phase(double t, const GaitSchedule &g) {
    const double tc = g.t_cycle();
    return wrap01(std::fmod(t, tc) / tc);
}

inline double leg_phase(double phi, Leg leg, const GaitSchedule &g) {
    return wrap01(phi - g.offsets[index(leg)]);
}

inline bool in_stance(double phi_leg, const GaitSchedule &g) { return phi_leg < g.duty(); }

/// Seconds until the leg's next swing->stance transition, given its phase.
inline double time_to_touchdown(double phi_leg, const GaitSchedule &g) {
    return (1.0 - phi_leg) * g.t_cycle();
}

namespace detail
{
template <std::size_t N>
inline double bezier(const std::array<double, N> &c, double s) {
    std::array<double, N> b = c;
    for (std::size_t r = 1; r < N; ++r) {
        for (std::size_t i = 0; i + r < N; ++i) {
            b[i] = (1.0 - s) * b[i] + s * b[i + 1];
        }
    }
    return b[0];
}

template <std::size_t N>
inline double bezier_derivative(const std::array<double, N> &c, double s) {
    std::array<double, N - 1> d{};
    for (std::size_t i = 0; i + 1 < N; ++i) {
        d[i] = static_cast<double>(N - 1) * (c[i + 1] - c[i]);
    }
    return bezier(d, s);
}
} // namespace detail

struct SwingSample {
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
};

/// Swing progress s in [0, 1] for a leg phase inside the swing window.
inline double swing_progress(double phi_leg, const GaitSchedule &g) {
    if (in_stance(phi_leg, g)) {
        throw Error(ErrorCode::NotInSwing, "leg phase " + std::to_string(phi_leg) + " is in stance");
    }
    const double s = (phi_leg - g.duty()) / (1.0 - g.duty());
    // Snap round-off at the swing boundaries onto the curve endpoints.
    if (s < 1e-12) return 0.0;
    if (s > 1.0 - 1e-12) return 1.0;
    return s;
}

inline SwingSample swing_at(double s, const GaitSchedule &g, const Vec3 &start, const Vec3 &end) {
    const SwingCurve &c = g.swing;
    SwingSample out;
    const Vec3 d = end - start;
    if (s == 0.0) {
        out.position = start;
    } else if (s == 1.0) {
        out.position = end;
    } else {
        out.position = start + detail::bezier(c.progress, s) * d;
        out.position.z() += c.lift_height * detail::bezier(c.lift, s);
    }
    out.velocity = detail::bezier_derivative(c.progress, s) * d;
    out.velocity.z() += c.lift_height * detail::bezier_derivative(c.lift, s);
    out.velocity /= g.t_swing;
    return out;
}

/// Swing foot target (position, velocity) for a leg phase in the swing window.
inline SwingSample swing_target(double phi_leg, const GaitSchedule &g, const Vec3 &start, const Vec3 &end) {
    return swing_at(swing_progress(phi_leg, g), g, start, end);
}

using ContactGrid = Eigen::Matrix<bool, 4, Eigen::Dynamic>;

/// Commanded footfall pattern: bin b of a leg is stance when the leg phase at
/// the bin centre is in stance.
inline ContactGrid footfall_reference(const GaitSchedule &g, int n_bins) {
    if (n_bins < 4) {
        throw Error(ErrorCode::InvalidParams, "footfall grid needs at least 4 bins");
    }
    ContactGrid grid(4, n_bins);
    for (Leg leg : kAllLegs) {
        for (int b = 0; b < n_bins; ++b) {
            const double phi = (b + 0.5) / n_bins;
            grid(static_cast<Eigen::Index>(index(leg)), b) = in_stance(leg_phase(phi, leg, g), g);
        }
    }
    return grid;
}

/// Touchdown point for a swinging leg: the foot lands so that it passes under
/// its neutral stance point at mid-stance. `neutral` is the neutral foot offset
/// in the heading frame, `v_cmd` the commanded planar velocity in the heading
/// frame, `yaw_rate` the commanded turn rate. z is the ground height.
inline Vec3 touchdown_target(const Vec3 &neutral, const Vec3 &base_pos, double yaw, const Vec3 &v_cmd,
                             double yaw_rate, double t_until_touchdown, const GaitSchedule &g,
                             double ground = 0.0) {
    const double yaw_td = yaw + yaw_rate * t_until_touchdown;
    const double yaw_mid = yaw_td + 0.5 * yaw_rate * g.t_stance;
    const Vec3 v_plan(v_cmd.x(), v_cmd.y(), 0.0);
    const Vec3 n_plan(neutral.x(), neutral.y(), 0.0);
    const Vec3 base_td = base_pos + lie::rot_z(0.5 * (yaw + yaw_td)) * v_plan * t_until_touchdown;
    Vec3 target = base_td + lie::rot_z(0.5 * (yaw_td + yaw_mid)) * v_plan * (0.5 * g.t_stance) +
                  lie::rot_z(yaw_mid) * n_plan;
    target.z() = ground;
    return target;
}

} // namespace quadspine
