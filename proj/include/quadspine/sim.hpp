#pragma once

// Simplified plant and episode loop. The body is a 10-DoF chain (floating
// middle body plus four spine hinges carrying the front and back bodies).
// Legs are massless: stance legs turn their joint torques into a ground force
// through the inverse transpose of the leg Jacobian, swing legs follow their
// PD torques as a second order joint system that does not load the body.

#include "quadspine/gait.hpp"
#include "quadspine/lie.hpp"
#include "quadspine/model.hpp"
#include "quadspine/mpc.hpp"
#include "quadspine/spine.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace quadspine
{

struct SimConfig {
    double dt = 0.0025;
    int control_divisor = 2;
    double gravity = 9.81;
    double ground = 0.0;
    double mu = 1.0;
    double duration = 10.0;
    double touchdown_height = 0.005;  // foot height below which a scheduled foot lands
    double swing_kp = 20.0;           // N m / rad
    double swing_kd = 0.5;            // N m s / rad
    double position_error_limit = 0.1;  // m, saturation of the tracked position error
    double max_tilt = 0.5;              // rad
    double min_height_fraction = 0.5;
    double divergence_limit = 1e6;
    bool stand = false;  // keep every foot in stance regardless of the gait
};

inline void validate(const SimConfig &c) {
    if (!(c.dt > 0) || c.control_divisor < 1 || !(c.duration > 0) || !(c.mu > 0) || !(c.gravity >= 0)) {
        throw Error(ErrorCode::ConfigError, "invalid simulation configuration");
    }
}

struct SimState {
    BodyState base;
    JointVector q = JointVector::Zero();
    JointVector qd = JointVector::Zero();
    LegMap<bool> contact{};
    LegMap<Vec3> anchor = zero_feet();
    double t = 0;
};

/// Standing start: base at nominal height, feet anchored at neutral points.
inline SimState initial_state(const RobotModel &model, const SimConfig &cfg) {
    SimState s;
    s.base.r = Vec3(0, 0, model.params().nominal_height + cfg.ground);
    s.q = standing_pose(model);
    const auto fk = forward_kinematics(model, s.base, s.q);
    for (Leg leg : kAllLegs) {
        s.contact[index(leg)] = true;
        Vec3 p = foot_position(model, fk, leg);
        p.z() = cfg.ground;
        s.anchor[index(leg)] = p;
    }
    return s;
}

using Vec10 = Eigen::Matrix<double, 10, 1>;
using Mat10 = Eigen::Matrix<double, 10, 10>;
using Jac10 = Eigen::Matrix<double, 3, 10>;

/// Mass matrix, velocity-product and gravity terms, and foot Jacobians of the
/// 10-DoF chain. Generalised velocity is (v, w, spine rates), world frame.
struct ChainDynamics {
    Mat10 M = Mat10::Zero();
    Vec10 bias = Vec10::Zero();  // Coriolis/centrifugal minus gravity
    LegMap<Jac10> foot_jac{};
};

inline Vec10 generalized_velocity(const SimState &s) {
    Vec10 nu;
    nu << s.base.v, s.base.w, s.qd.head<4>();
    return nu;
}

inline ChainDynamics chain_dynamics(const RobotModel &model, const SimState &s, const std::vector<Transform> &fk,
                                    double gravity) {
    const auto &bodies = model.bodies();
    const std::size_t nb = bodies.size();
    std::vector<Jac10> Jlin(nb), Jang(nb);
    std::vector<Vec3> w(nb), alpha(nb), acc(nb);
    const Vec3 g(0, 0, -gravity);
    ChainDynamics out;
    for (std::size_t i = 0; i < nb; ++i) {
        const BodyNode &b = bodies[i];
        if (i == 0) {
            Jlin[0].setZero();
            Jlin[0].block<3, 3>(0, 0).setIdentity();
            Jang[0].setZero();
            Jang[0].block<3, 3>(0, 3).setIdentity();
            w[0] = s.base.w;
            alpha[0].setZero();
            acc[0].setZero();
        } else {
            const auto p = static_cast<std::size_t>(b.parent);
            const Vec3 d = fk[i].translation() - fk[p].translation();
            Jlin[i] = Jlin[p] - lie::hat(d) * Jang[p];
            Jang[i] = Jang[p];
            w[i] = w[p];
            alpha[i] = alpha[p];
            acc[i] = acc[p] + alpha[p].cross(d) + w[p].cross(w[p].cross(d));
            if (b.joint >= 0 && is_spine_joint(static_cast<std::size_t>(b.joint))) {
                const Vec3 u = fk[i].linear() * b.axis;
                const double rate = s.qd[b.joint];
                Jang[i].col(6 + b.joint) += u;
                w[i] += u * rate;
                alpha[i] += w[p].cross(u * rate);
            }
        }
        if (b.mass > 0) {
            const Mat3 Rb = fk[i].linear();
            const Mat3 Iw = Rb * b.inertia * Rb.transpose();
            const Vec3 c = Rb * b.com;
            const Jac10 Jc = Jlin[i] - lie::hat(c) * Jang[i];
            const Vec3 ac = acc[i] + alpha[i].cross(c) + w[i].cross(w[i].cross(c));
            out.M += b.mass * Jc.transpose() * Jc + Jang[i].transpose() * Iw * Jang[i];
            out.bias += b.mass * Jc.transpose() * (ac - g) +
                        Jang[i].transpose() * (Iw * alpha[i] + w[i].cross(Iw * w[i]));
        }
    }
    for (Leg leg : kAllLegs) {
        const auto hp = static_cast<std::size_t>(model.hip_parent_body(leg));
        const Vec3 d = foot_position(model, fk, leg) - fk[hp].translation();
        out.foot_jac[index(leg)] = Jlin[hp] - lie::hat(d) * Jang[hp];
    }
    return out;
}

/// Kinetic plus gravitational energy of the three bodies.
inline double mechanical_energy(const RobotModel &model, const SimState &s, double gravity) {
    const auto fk = forward_kinematics(model, s.base, s.q);
    const ChainDynamics dyn = chain_dynamics(model, s, fk, 0.0);
    const Vec10 nu = generalized_velocity(s);
    double pe = 0;
    for (std::size_t i = 0; i < model.bodies().size(); ++i) {
        const BodyNode &b = model.bodies()[i];
        if (b.mass > 0) {
            pe += b.mass * gravity * (fk[i] * b.com).z();
        }
    }
    return 0.5 * nu.dot(dyn.M * nu) + pe;
}

/// Ground force on the body implied by a stance leg's joint torques, clamped
/// to f_z >= 0 and then scaled onto the friction cone.
inline Vec3 stance_grf(const Mat3 &J, const Vec3 &tau, double mu) {
    Vec3 f = -J.transpose().completeOrthogonalDecomposition().solve(tau);
    if (f.z() <= 0) {
        return Vec3::Zero();
    }
    const double ft = f.head<2>().norm();
    if (ft > mu * f.z()) {
        f.head<2>() *= mu * f.z() / ft;
    }
    return f;
}

struct StepOutput {
    LegMap<Vec3> grf = zero_feet();
    LegMap<bool> released{};  // stance feet released because their anchor became unreachable
};

namespace detail
{
inline void check_finite(const SimState &s, double limit) {
    auto bad = [limit](double x) { return !std::isfinite(x) || std::abs(x) > limit; };
    bool diverged = false;
    for (int i = 0; i < 3; ++i) {
        diverged |= bad(s.base.r[i]) || bad(s.base.v[i]) || bad(s.base.w[i]);
    }
    for (int i = 0; i < 16; ++i) {
        diverged |= bad(s.q[i]) || bad(s.qd[i]);
    }
    diverged |= !s.base.R.allFinite();
    if (diverged) {
        std::ostringstream msg;
        msg << "state diverged at t=" << s.t;
        throw Error(ErrorCode::NumericalDivergence, msg.str());
    }
}
} // namespace detail

/// Advances the plant by dt under actuator-clamped joint torques. With
/// `fixed_spine` the spine joints are frozen at their current angles.
inline StepOutput step(const RobotModel &model, const SimConfig &cfg, SimState &s, const JointVector &tau,
                       bool fixed_spine) {
    const double dt = cfg.dt;
    StepOutput out;
    const auto fk = forward_kinematics(model, s.base, s.q);
    const ChainDynamics dyn = chain_dynamics(model, s, fk, cfg.gravity);

    Vec10 rhs = -dyn.bias;
    for (Leg leg : kAllLegs) {
        out.grf[index(leg)] = Vec3::Zero();
        if (!s.contact[index(leg)]) {
            continue;
        }
        Vec3 tl;
        for (int k = 0; k < 3; ++k) tl[k] = tau[static_cast<Eigen::Index>(joint_index(leg, static_cast<LegJoint>(k)))];
        const Vec3 f = stance_grf(leg_jacobian(model, fk, leg), tl, cfg.mu);
        out.grf[index(leg)] = f;
        rhs += dyn.foot_jac[index(leg)].transpose() * f;
    }

    Vec10 nu = generalized_velocity(s);
    Vec10 nu_next = nu;
    if (fixed_spine) {
        const Eigen::Matrix<double, 6, 1> a = dyn.M.topLeftCorner<6, 6>().ldlt().solve(rhs.head<6>());
        nu_next.head<6>() += dt * a;
        nu_next.tail<4>().setZero();
    } else {
        rhs.tail<4>() += tau.head<4>();
        const Eigen::LDLT<Mat10> ldlt = dyn.M.ldlt();
        nu_next += dt * ldlt.solve(rhs);
        // Joints at or crossing a stop with outward velocity are stopped by an
        // impulse in the mass-matrix metric, so the reaction reaches the bodies.
        std::vector<Eigen::Index> stopped;
        for (SpineJoint sj : kAllSpineJoints) {
            const auto j = static_cast<Eigen::Index>(joint_index(sj));
            const Actuator &a = model.actuator(static_cast<std::size_t>(j));
            const double qn = s.q[j] + dt * 0.5 * (nu[6 + j] + nu_next[6 + j]);
            if ((qn >= a.theta_max && nu_next[6 + j] > 0) || (qn <= a.theta_min && nu_next[6 + j] < 0)) {
                stopped.push_back(6 + j);
            }
        }
        if (!stopped.empty()) {
            const auto m = static_cast<Eigen::Index>(stopped.size());
            Eigen::MatrixXd E = Eigen::MatrixXd::Zero(10, m);
            for (Eigen::Index k = 0; k < m; ++k) E(stopped[static_cast<std::size_t>(k)], k) = 1.0;
            const Eigen::MatrixXd MinvE = ldlt.solve(E);
            const Eigen::VectorXd lambda = (E.transpose() * MinvE).ldlt().solve(E.transpose() * nu_next);
            nu_next -= MinvE * lambda;
            for (Eigen::Index i : stopped) nu_next[i] = 0.0;
        }
    }

    const Vec10 nu_mid = 0.5 * (nu + nu_next);
    s.base.r += dt * nu_mid.head<3>();
    s.base.R = lie::orthonormalize(lie::exp_so3(dt * nu_mid.segment<3>(3)) * s.base.R);
    s.base.v = nu_next.head<3>();
    s.base.w = nu_next.segment<3>(3);
    if (!fixed_spine) {
        for (SpineJoint sj : kAllSpineJoints) {
            const auto j = static_cast<Eigen::Index>(joint_index(sj));
            const Actuator &a = model.actuator(static_cast<std::size_t>(j));
            s.q[j] = std::clamp(s.q[j] + dt * nu_mid[6 + j], a.theta_min, a.theta_max);
            s.qd[j] = nu_next[6 + j];
        }
    }

    // Swing legs: rotor-inertia joint dynamics under their PD torques.
    const double inertia = model.params().leg_joint_inertia;
    for (Leg leg : kAllLegs) {
        if (s.contact[index(leg)]) {
            continue;
        }
        for (int k = 0; k < 3; ++k) {
            const auto j = static_cast<Eigen::Index>(joint_index(leg, static_cast<LegJoint>(k)));
            const Actuator &a = model.actuator(static_cast<std::size_t>(j));
            const double qd_next = s.qd[j] + dt * tau[j] / inertia;
            s.q[j] += dt * 0.5 * (s.qd[j] + qd_next);
            s.qd[j] = qd_next;
            if (s.q[j] > a.theta_max) {
                s.q[j] = a.theta_max;
                s.qd[j] = std::min(s.qd[j], 0.0);
            } else if (s.q[j] < a.theta_min) {
                s.q[j] = a.theta_min;
                s.qd[j] = std::max(s.qd[j], 0.0);
            }
        }
    }

    // Stance legs follow their anchors kinematically.
    const auto fk_next = forward_kinematics(model, s.base, s.q);
    const ChainDynamics next = chain_dynamics(model, s, fk_next, 0.0);
    const Vec10 nu_new = generalized_velocity(s);
    for (Leg leg : kAllLegs) {
        if (!s.contact[index(leg)]) {
            continue;
        }
        const IkResult ik = solve_leg_ik(model, leg, hip_frame(model, fk_next, leg), s.anchor[index(leg)]);
        if (ik.status != IkStatus::Ok) {
            s.contact[index(leg)] = false;
            out.released[index(leg)] = true;
            continue;
        }
        set_leg_angles(s.q, leg, ik.angles);
        const Mat3 J = leg_jacobian(model, s.base, s.q, leg);
        const Vec3 body_vel = next.foot_jac[index(leg)] * nu_new;
        const Vec3 rates = J.completeOrthogonalDecomposition().solve(-body_vel);
        for (int k = 0; k < 3; ++k) {
            s.qd[static_cast<Eigen::Index>(joint_index(leg, static_cast<LegJoint>(k)))] = rates[k];
        }
    }
    s.t += dt;
    detail::check_finite(s, cfg.divergence_limit);
    return out;
}

/// Joint-space PD toward IK-converted swing targets. Legs without a target
/// (stance) get zero torque. Returns the torque vector with only swing leg
/// entries set and reports legs whose target had to be projected.
struct SwingTarget {
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
};

struct SwingPdOutput {
    JointVector tau = JointVector::Zero();
    LegMap<bool> projected{};
};

inline SwingPdOutput apply_swing_pd(const RobotModel &model, const SimState &s,
                                    const LegMap<std::optional<SwingTarget>> &targets, double kp, double kd) {
    SwingPdOutput out;
    const auto fk = forward_kinematics(model, s.base, s.q);
    const ChainDynamics dyn = chain_dynamics(model, s, fk, 0.0);
    const Vec10 nu = generalized_velocity(s);
    for (Leg leg : kAllLegs) {
        const auto &tgt = targets[index(leg)];
        if (!tgt) {
            continue;
        }
        const IkResult ik = solve_leg_ik(model, leg, hip_frame(model, fk, leg), tgt->position);
        out.projected[index(leg)] = ik.status != IkStatus::Ok;
        const Mat3 J = leg_jacobian(model, fk, leg);
        const Vec3 qd_t = J.completeOrthogonalDecomposition().solve(tgt->velocity - dyn.foot_jac[index(leg)] * nu);
        for (int k = 0; k < 3; ++k) {
            const auto j = static_cast<Eigen::Index>(joint_index(leg, static_cast<LegJoint>(k)));
            out.tau[j] = kp * (ik.angles[k] - s.q[j]) + kd * (qd_t[k] - s.qd[j]);
        }
    }
    return out;
}

struct EpisodeConfig {
    GaitSchedule gait = named_gait(GaitId::Walk);
    StrategyParams strategy{};
    CommandProfile command{};
    MpcConfig mpc{};
    SimConfig sim{};
};

/// One logged sim step. State is sampled at the start of the step; torques
/// and ground forces are the ones acting over it.
struct LogRow {
    double t = 0;
    BodyState base;
    JointVector q = JointVector::Zero();
    JointVector qd = JointVector::Zero();
    JointVector tau = JointVector::Zero();
    LegMap<Vec3> grf = zero_feet();
    LegMap<bool> contact{};
    JointVector power = JointVector::Zero();
    int mpc_iterations = 0;
    double mpc_residual = 0;
    double phase = 0;
    LegMap<bool> scheduled{};
    BodyState ref;
    SpineMap<double> spine_target{};
    bool mpc_tick = false;
    MpcStatus mpc_status = MpcStatus::Ok;
    double mpc_wall_time = 0;
};

struct SimLog {
    std::vector<LogRow> rows;
    double dt = 0.0025;
    double mass = 0;
    double nominal_height = 0;
    double ramp_end = 0;
    GaitSchedule gait;
    Strategy strategy = Strategy::Fixed;
    CommandProfile command;
    bool stable = true;
    std::string failure;  // reason when the episode ended early

    double duration() const { return rows.empty() ? 0.0 : rows.back().t + dt; }
};

namespace detail
{
inline bool scheduled_stance(const SimConfig &cfg, const GaitSchedule &g, double t, Leg leg) {
    return cfg.stand || in_stance(leg_phase(cpg_phase(t, g), leg, g), g);
}

/// Start time of the stance window that contains t (scheduled stance assumed).
inline double touchdown_time(const GaitSchedule &g, double t, Leg leg) {
    return t - leg_phase(cpg_phase(t, g), leg, g) * g.t_cycle();
}
} // namespace detail

/// Closed-loop episode: CPG -> spine strategy and swing trajectories -> MPC
/// every control_divisor steps -> Jacobian-transpose torques -> actuator
/// clamp -> plant. Torques are held between control ticks.
class Episode
{
public:
    Episode(const RobotModel &model, EpisodeConfig cfg)
        : model_(model), cfg_(std::move(cfg)), mpc_(cfg_.mpc) {
        validate(cfg_.sim);
        validate(cfg_.gait);
        validate(cfg_.strategy);
        state_ = initial_state(model_, cfg_.sim);
        cmd_r_ = state_.base.r;
        cmd_yaw_ = lie::yaw_of(state_.base.R);
        for (Leg leg : kAllLegs) swing_start_[index(leg)] = state_.anchor[index(leg)];
        fixed_ = cfg_.strategy.strategy == Strategy::Fixed;
    }

    SimLog run() {
        SimLog log;
        const SimConfig &sc = cfg_.sim;
        log.dt = sc.dt;
        log.mass = model_.total_mass();
        log.nominal_height = model_.params().nominal_height;
        log.ramp_end = cfg_.command.ramp_end();
        log.gait = cfg_.gait;
        log.strategy = cfg_.strategy.strategy;
        log.command = cfg_.command;
        const auto steps = static_cast<long>(std::llround(sc.duration / sc.dt));
        log.rows.reserve(static_cast<std::size_t>(steps));
        for (long n = 0; n < steps; ++n) {
            state_.t = static_cast<double>(n) * sc.dt;
            LogRow row;
            row.t = state_.t;
            const bool tick = n % sc.control_divisor == 0;
            if (tick) {
                control(row);
            } else {
                row.mpc_iterations = last_row_.mpc_iterations;
                row.mpc_residual = last_row_.mpc_residual;
                row.mpc_status = last_row_.mpc_status;
                row.ref = last_row_.ref;
                row.spine_target = last_row_.spine_target;
            }
            row.mpc_tick = tick;
            row.base = state_.base;
            row.q = state_.q;
            row.qd = state_.qd;
            row.tau = tau_;
            row.phase = cpg_phase(state_.t, cfg_.gait);
            for (Leg leg : kAllLegs) {
                row.scheduled[index(leg)] = detail::scheduled_stance(sc, cfg_.gait, state_.t, leg);
            }
            for (std::size_t j = 0; j < kNumJoints; ++j) {
                const auto jj = static_cast<Eigen::Index>(j);
                row.power[jj] = electrical_power(model_, j, tau_[jj], state_.qd[jj]);
            }
            row.contact = state_.contact;
            try {
                const StepOutput so = step(model_, sc, state_, tau_, fixed_);
                row.grf = so.grf;
            } catch (const Error &e) {
                log.rows.push_back(row);
                log.stable = false;
                log.failure = e.what();
                throw;
            }
            touchdowns();
            log.rows.push_back(row);
            last_row_ = row;
            if (const char *why = unstable()) {
                log.stable = false;
                log.failure = why;
                break;
            }
        }
        return log;
    }

    const SimState &state() const { return state_; }

private:
    const char *unstable() const {
        const Mat3 &R = state_.base.R;
        if (std::abs(lie::roll_of(R)) > cfg_.sim.max_tilt || std::abs(lie::pitch_of(R)) > cfg_.sim.max_tilt) {
            return "tilt limit exceeded";
        }
        if (state_.base.r.z() - cfg_.sim.ground < cfg_.sim.min_height_fraction * model_.params().nominal_height) {
            return "base height below limit";
        }
        return nullptr;
    }

    void touchdowns() {
        const SimConfig &sc = cfg_.sim;
        const auto fk = forward_kinematics(model_, state_.base, state_.q);
        for (Leg leg : kAllLegs) {
            const std::size_t i = index(leg);
            if (state_.contact[i] || !detail::scheduled_stance(sc, cfg_.gait, state_.t, leg)) {
                continue;
            }
            const Vec3 p = foot_position(model_, fk, leg);
            if (p.z() <= sc.ground + sc.touchdown_height) {
                state_.contact[i] = true;
                state_.anchor[i] = Vec3(p.x(), p.y(), sc.ground);
            }
        }
    }

    void control(LogRow &row) {
        const SimConfig &sc = cfg_.sim;
        const GaitSchedule &g = cfg_.gait;
        const double t = state_.t;
        const double tick_dt = sc.dt * sc.control_divisor;
        const BodyState &base = state_.base;
        const double yaw = lie::yaw_of(base.R);
        const VelocityCommand vc = cfg_.command.at(t);

        // Lift-off of feet whose stance window ended.
        auto fk = forward_kinematics(model_, base, state_.q);
        for (Leg leg : kAllLegs) {
            const std::size_t i = index(leg);
            if (state_.contact[i] && !detail::scheduled_stance(sc, g, t, leg)) {
                state_.contact[i] = false;
                swing_start_[i] = foot_position(model_, fk, leg);
            }
            if (!state_.contact[i] && !detail::scheduled_stance(sc, g, t, leg) && was_stance_[i]) {
                swing_start_[i] = foot_position(model_, fk, leg);
            }
            was_stance_[i] = detail::scheduled_stance(sc, g, t, leg);
        }

        // Reference pose: globally integrated command, tracked error saturated.
        Vec3 anchor = base.r;
        const Vec3 err = cmd_r_ - base.r;
        Vec3 planar(err.x(), err.y(), 0.0);
        if (planar.norm() > sc.position_error_limit) {
            planar *= sc.position_error_limit / planar.norm();
        }
        anchor += planar;
        anchor.z() = model_.params().nominal_height + sc.ground;
        const std::vector<BodyState> refs = build_reference(cfg_.command, t, anchor, cmd_yaw_, cfg_.mpc);

        // Contact plan and foot positions over the horizon.
        const int N = cfg_.mpc.horizon;
        std::vector<HorizonStep> horizon(static_cast<std::size_t>(N));
        for (int k = 0; k < N; ++k) {
            const double tk = t + k * cfg_.mpc.dt;
            HorizonStep &hs = horizon[static_cast<std::size_t>(k)];
            for (Leg leg : kAllLegs) {
                const std::size_t i = index(leg);
                if (k == 0) {
                    hs.contact[i] = state_.contact[i];
                    hs.feet[i] = state_.anchor[i];
                    continue;
                }
                hs.contact[i] = detail::scheduled_stance(sc, g, tk, leg);
                if (!hs.contact[i]) {
                    hs.feet[i] = state_.anchor[i];
                    continue;
                }
                const double td = detail::touchdown_time(g, tk, leg);
                if (state_.contact[i] && (sc.stand || td <= t + 1e-12)) {
                    hs.feet[i] = state_.anchor[i];
                } else {
                    hs.feet[i] = planned_touchdown(leg, base, yaw, vc, std::max(td - t, 0.0));
                }
            }
        }
        const CompositeInertia ci = composite_inertia(model_, fk, base.r);
        const MpcResult mr = mpc_.solve(base, ci.mass, ci.inertia, horizon, refs);

        // Stance legs: Jacobian-transpose torques for the MPC forces.
        JointVector tau = JointVector::Zero();
        LegMap<std::optional<Vec3>> stance_forces{};
        for (Leg leg : kAllLegs) {
            if (!state_.contact[index(leg)]) {
                continue;
            }
            const Vec3 f = mr.forces[index(leg)];
            stance_forces[index(leg)] = f;
            const Vec3 tl = joint_torques_from_force(leg_jacobian(model_, fk, leg), -f);
            for (int k = 0; k < 3; ++k) tau[static_cast<Eigen::Index>(joint_index(leg, static_cast<LegJoint>(k)))] = tl[k];
        }

        // Swing legs: Bezier targets through joint-space PD.
        LegMap<std::optional<SwingTarget>> targets{};
        for (Leg leg : kAllLegs) {
            const std::size_t i = index(leg);
            if (state_.contact[i]) {
                continue;
            }
            const double phi = leg_phase(cpg_phase(t, g), leg, g);
            SwingTarget st;
            if (!detail::scheduled_stance(sc, g, t, leg)) {
                const Vec3 end = planned_touchdown(leg, base, yaw, vc, time_to_touchdown(phi, g));
                const SwingSample ss = swing_target(phi, g, swing_start_[i], end);
                st.position = ss.position;
                st.velocity = ss.velocity;
            } else {
                // Late touchdown: keep pressing toward the ground at the landing point.
                st.position = planned_touchdown(leg, base, yaw, vc, 0.0);
                st.position.z() = sc.ground - 0.01;
            }
            targets[i] = st;
        }
        const SwingPdOutput pd = apply_swing_pd(model_, state_, targets, sc.swing_kp, sc.swing_kd);
        for (Leg leg : kAllLegs) {
            if (!state_.contact[index(leg)]) {
                for (int k = 0; k < 3; ++k) {
                    const auto j = static_cast<Eigen::Index>(joint_index(leg, static_cast<LegJoint>(k)));
                    tau[j] = pd.tau[j];
                }
            }
        }

        // Spine.
        SpineCommand sp = fixed_command();
        if (!fixed_) {
            LegMap<Vec3> feet_chassis = zero_feet(), neutrals = zero_feet();
            for (Leg leg : kAllLegs) {
                feet_chassis[index(leg)] = base.R.transpose() * (foot_position(model_, fk, leg) - base.r);
                neutrals[index(leg)] = model_.neutral_foot(leg);
            }
            const double limit = model_.actuator(0).theta_max;
            sp = spine_command(cfg_.strategy, cpg_phase(t, g), feet_chassis, neutrals, limit);
            sp.tau_ff = spine_feedforward_torque(model_, fk, stance_forces, sc.gravity);
            for (SpineJoint sj : kAllSpineJoints) {
                const auto j = static_cast<Eigen::Index>(joint_index(sj));
                tau[j] = spine_pd_torque(sp, sj, state_.q[j], state_.qd[j]);
            }
        }
        for (std::size_t j = 0; j < kNumJoints; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            tau[jj] = (fixed_ && is_spine_joint(j)) ? 0.0 : clamp_actuator(model_, j, tau[jj], state_.qd[jj]);
        }
        tau_ = tau;

        row.mpc_iterations = mr.iterations;
        row.mpc_residual = mr.residual;
        row.mpc_status = mr.status;
        row.mpc_wall_time = mr.wall_time;
        row.ref.r = Vec3(cmd_r_.x(), cmd_r_.y(), model_.params().nominal_height + sc.ground);
        row.ref.R = lie::rot_z(cmd_yaw_);
        row.ref.v = lie::rot_z(cmd_yaw_) * Vec3(vc.v.x(), vc.v.y(), 0.0);
        row.ref.w = Vec3(0, 0, vc.yaw_rate);
        row.spine_target = sp.theta_d;

        // Advance the commanded pose to the next tick.
        const VelocityCommand vn = cfg_.command.at(t + tick_dt);
        const double yaw_next = cmd_yaw_ + 0.5 * (vc.yaw_rate + vn.yaw_rate) * tick_dt;
        cmd_r_ += 0.5 * (lie::rot_z(cmd_yaw_) * Vec3(vc.v.x(), vc.v.y(), 0) +
                         lie::rot_z(yaw_next) * Vec3(vn.v.x(), vn.v.y(), 0)) *
                  tick_dt;
        cmd_yaw_ = yaw_next;
    }

    Vec3 planned_touchdown(Leg leg, const BodyState &base, double yaw, const VelocityCommand &vc,
                           double t_until) const {
        return touchdown_target(model_.neutral_foot(leg), base.r, yaw, vc.v, vc.yaw_rate, t_until, cfg_.gait,
                                cfg_.sim.ground);
    }

    const RobotModel &model_;
    EpisodeConfig cfg_;
    MpcController mpc_;
    SimState state_;
    JointVector tau_ = JointVector::Zero();
    LegMap<Vec3> swing_start_ = zero_feet();
    LegMap<bool> was_stance_{true, true, true, true};
    Vec3 cmd_r_ = Vec3::Zero();
    double cmd_yaw_ = 0;
    bool fixed_ = false;
    LogRow last_row_;
};

/// Runs one episode. Numerical divergence propagates as an Error whose message
/// carries the episode time; instability ends the episode early with
/// log.stable = false.
inline SimLog run_episode(const RobotModel &model, const EpisodeConfig &cfg) {
    Episode ep(model, cfg);
    return ep.run();
}

} // namespace quadspine
