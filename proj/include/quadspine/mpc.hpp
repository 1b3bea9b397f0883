#pragma once

// Single-rigid-body MPC on SO(3). The body is linearised in variation
// coordinates x = (dr, deta, dv, dw) about the current state, with
// R = exp(hat(deta)) R0. Stance forces over the horizon are condensed into a
// dense QP with friction pyramid and normal force bounds.

#include "quadspine/lie.hpp"
#include "quadspine/qp.hpp"
#include "quadspine/types.hpp"

#include <chrono>
#include <vector>

namespace quadspine
{

struct MpcConfig {
    int horizon = 10;
    double dt = 0.025;
    std::array<double, 12> q_weights{50, 50, 50, 50, 50, 50, 10, 10, 10, 5, 5, 5};
    double r_weight = 1e-4;
    double mu = 1.0;
    double fz_min = 0.0;
    double fz_max = 40.0;
    double gravity = 9.81;
    QpSettings qp{};
};

inline void validate(const MpcConfig &c) {
    if (c.horizon < 1 || !(c.dt > 0) || !(c.mu > 0) || !(c.fz_min >= 0) || !(c.fz_max > c.fz_min) ||
        !(c.r_weight > 0)) {
        throw Error(ErrorCode::ConfigError, "invalid MPC configuration");
    }
    for (double q : c.q_weights) {
        if (!(q >= 0)) {
            throw Error(ErrorCode::ConfigError, "MPC state weights must be non-negative");
        }
    }
}

/// Planar twist command in the heading frame.
struct VelocityCommand {
    Vec3 v = Vec3::Zero();  // m/s, z ignored
    double yaw_rate = 0;    // rad/s
};

/// Commanded twist ramping from rest at t = 0 toward a target at bounded
/// linear and angular acceleration magnitudes.
struct CommandProfile {
    VelocityCommand target{};
    double lin_accel = 0.5;  // m/s^2
    double ang_accel = 1.0;  // rad/s^2

    VelocityCommand at(double t) const {
        VelocityCommand c;
        const double speed = target.v.head<2>().norm();
        if (speed > 0) {
            const double s = std::min(speed, lin_accel * std::max(t, 0.0));
            c.v.head<2>() = target.v.head<2>() * (s / speed);
        }
        const double w = std::min(std::abs(target.yaw_rate), ang_accel * std::max(t, 0.0));
        c.yaw_rate = std::copysign(w, target.yaw_rate);
        return c;
    }

    /// Time at which both ramps are complete.
    double ramp_end() const {
        const double tl = lin_accel > 0 ? target.v.head<2>().norm() / lin_accel : 0.0;
        const double ta = ang_accel > 0 ? std::abs(target.yaw_rate) / ang_accel : 0.0;
        return std::max(tl, ta);
    }
};

/// Desired body state at horizon steps 1..N. Position and heading integrate the
/// commanded twist from the anchor pose; roll and pitch are level and the
/// height stays at the anchor height.
inline std::vector<BodyState> build_reference(const CommandProfile &cmd, double t, const Vec3 &anchor_r,
                                              double anchor_yaw, const MpcConfig &cfg) {
    std::vector<BodyState> refs(static_cast<std::size_t>(cfg.horizon));
    Vec3 r = anchor_r;
    double yaw = anchor_yaw;
    VelocityCommand prev = cmd.at(t);
    Vec3 v_prev = lie::rot_z(yaw) * Vec3(prev.v.x(), prev.v.y(), 0.0);
    for (int k = 1; k <= cfg.horizon; ++k) {
        const VelocityCommand c = cmd.at(t + k * cfg.dt);
        const double yaw_next = yaw + 0.5 * (prev.yaw_rate + c.yaw_rate) * cfg.dt;
        const Vec3 v_next = lie::rot_z(yaw_next) * Vec3(c.v.x(), c.v.y(), 0.0);
        r += 0.5 * (v_prev + v_next) * cfg.dt;
        yaw = yaw_next;
        BodyState &ref = refs[static_cast<std::size_t>(k - 1)];
        ref.r = Vec3(r.x(), r.y(), anchor_r.z());
        ref.R = lie::rot_z(yaw);
        ref.v = v_next;
        ref.w = Vec3(0, 0, c.yaw_rate);
        prev = c;
        v_prev = v_next;
    }
    return refs;
}

/// Reference anchored at the current state.
inline std::vector<BodyState> build_reference(const CommandProfile &cmd, double t, const BodyState &state,
                                              const MpcConfig &cfg) {
    return build_reference(cmd, t, state.r, lie::yaw_of(state.R), cfg);
}

using Mat12 = Eigen::Matrix<double, 12, 12>;
using Vec12 = Eigen::Matrix<double, 12, 1>;

/// x+ = A x + B u + d with u the stacked forces of the stance feet (in leg
/// order) acting on the body.
struct LinearizedDynamics {
    Mat12 A = Mat12::Identity();
    Eigen::Matrix<double, 12, Eigen::Dynamic> B;
    Vec12 d = Vec12::Zero();
    std::vector<Leg> stance;
};

namespace detail
{
/// Inverse of the right Jacobian of SO(3).
inline Mat3 right_jacobian_inverse(const Vec3 &a) {
    const double th = a.norm();
    const Mat3 K = lie::hat(a);
    if (th < 1e-6) {
        return Mat3::Identity() + 0.5 * K + (1.0 / 12.0) * K * K;
    }
    const double c = 1.0 / (th * th) - (1.0 + std::cos(th)) / (2.0 * th * std::sin(th));
    return Mat3::Identity() + 0.5 * K + c * K * K;
}

inline LinearizedDynamics linearize(const BodyState &s, const LegMap<Vec3> &feet, const LegMap<bool> &contact,
                                    const Mat3 &inertia, double mass, double dt, double gravity) {
    LinearizedDynamics lin;
    for (Leg leg : kAllLegs) {
        if (contact[index(leg)]) {
            lin.stance.push_back(leg);
        }
    }
    const auto k = static_cast<Eigen::Index>(lin.stance.size());
    const Vec3 g(0, 0, -gravity);
    const Mat3 Iinv = inertia.inverse();

    Eigen::VectorXd u0 = Eigen::VectorXd::Zero(3 * k);
    Vec3 F0 = Vec3::Zero();
    Vec3 tau0 = Vec3::Zero();
    for (Eigen::Index i = 0; i < k; ++i) {
        const Vec3 f(0, 0, mass * gravity / static_cast<double>(k));
        u0.segment<3>(3 * i) = f;
        F0 += f;
        tau0 += (feet[index(lin.stance[static_cast<std::size_t>(i)])] - s.r).cross(f);
    }
    const Vec3 Iw = inertia * s.w;
    const Vec3 y = tau0 - s.w.cross(Iw);
    const Mat3 gyro = lie::hat(Iw) - lie::hat(s.w) * inertia;

    const Vec3 a = s.w * dt;
    lin.A.block<3, 3>(0, 6) = dt * Mat3::Identity();
    lin.A.block<3, 3>(3, 3) = right_jacobian_inverse(a);
    lin.A.block<3, 3>(3, 9) = dt * Mat3::Identity();
    lin.A.block<3, 3>(9, 0) = dt * Iinv * lie::hat(F0);
    lin.A.block<3, 3>(9, 3) = dt * (-lie::hat(Iinv * y) + Iinv * lie::hat(y) +
                                     Iinv * lie::hat(s.w) * (lie::hat(Iw) - inertia * lie::hat(s.w)));
    lin.A.block<3, 3>(9, 9) = Mat3::Identity() + dt * Iinv * gyro;

    lin.B = Eigen::Matrix<double, 12, Eigen::Dynamic>::Zero(12, 3 * k);
    for (Eigen::Index i = 0; i < k; ++i) {
        const Vec3 p = feet[index(lin.stance[static_cast<std::size_t>(i)])];
        lin.B.block<3, 3>(6, 3 * i) = (dt / mass) * Mat3::Identity();
        lin.B.block<3, 3>(9, 3 * i) = dt * Iinv * lie::hat(p - s.r);
    }

    Vec12 f0;
    f0 << s.v * dt, a, (F0 / mass + g) * dt, dt * Iinv * y;
    lin.d = f0 - lin.B * u0;
    return lin;
}
} // namespace detail

/// One-step affine model about `state` for the given stance set. `inertia` is
/// the world-frame inertia about r.
inline LinearizedDynamics linearize_dynamics(const BodyState &state, const LegMap<Vec3> &feet,
                                             const LegMap<bool> &contact, const Mat3 &inertia, double mass,
                                             double dt, double gravity = 9.81) {
    if (!(contact[0] || contact[1] || contact[2] || contact[3])) {
        throw Error(ErrorCode::NoStanceFeet, "linearisation needs at least one stance foot");
    }
    return detail::linearize(state, feet, contact, inertia, mass, dt, gravity);
}

/// Variation coordinates of `x` about the operating point `x0`.
inline Vec12 variation(const BodyState &x, const BodyState &x0) {
    Vec12 out;
    out << x.r - x0.r, lie::log_so3(x.R * x0.R.transpose()), x.v - x0.v, x.w - x0.w;
    return out;
}

/// Decision layout of a condensed QP: which (step, leg) each force block is.
struct ForceSlot {
    int step = 0;
    Leg leg = Leg::FL;
};

struct MpcQp {
    QpProblem qp;
    std::vector<ForceSlot> slots;
};

/// Pyramid and normal-bound rows for one force block at column `col`.
inline void add_force_constraints(QpProblem &qp, Eigen::Index row, Eigen::Index col, const MpcConfig &cfg) {
    const double mu = cfg.mu;
    qp.G(row + 0, col + 0) = 1;
    qp.G(row + 0, col + 2) = -mu;
    qp.G(row + 1, col + 0) = -1;
    qp.G(row + 1, col + 2) = -mu;
    qp.G(row + 2, col + 1) = 1;
    qp.G(row + 2, col + 2) = -mu;
    qp.G(row + 3, col + 1) = -1;
    qp.G(row + 3, col + 2) = -mu;
    qp.G(row + 4, col + 2) = 1;
    qp.h[row + 4] = cfg.fz_max;
    qp.G(row + 5, col + 2) = -1;
    qp.h[row + 5] = -cfg.fz_min;
}

/// Condensed QP over all stance forces of the horizon. `lins[k]` maps x_k to
/// x_{k+1} with x_0 = 0; `refs[k]` is the target for x_{k+1} in variation
/// coordinates.
inline MpcQp build_qp(const std::vector<LinearizedDynamics> &lins, const std::vector<Vec12> &refs,
                      const MpcConfig &cfg) {
    const std::size_t N = lins.size();
    if (refs.size() != N) {
        throw Error(ErrorCode::InvalidParams, "reference count differs from horizon length");
    }
    MpcQp out;
    Eigen::Index n = 0;
    std::vector<Eigen::Index> col0(N);
    for (std::size_t k = 0; k < N; ++k) {
        col0[k] = n;
        for (Leg leg : lins[k].stance) {
            out.slots.push_back({static_cast<int>(k), leg});
        }
        n += lins[k].B.cols();
    }
    const auto rows = static_cast<Eigen::Index>(12 * N);
    Eigen::MatrixXd Gamma = Eigen::MatrixXd::Zero(rows, n);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(rows);
    Eigen::VectorXd target(rows);
    for (std::size_t k = 0; k < N; ++k) {
        const auto r = static_cast<Eigen::Index>(12 * k);
        const LinearizedDynamics &L = lins[k];
        if (k > 0) {
            // Columns of earlier steps only.
            Gamma.block(r, 0, 12, col0[k]).noalias() = L.A * Gamma.block(r - 12, 0, 12, col0[k]);
            c.segment<12>(r) = L.A * c.segment<12>(r - 12) + L.d;
        } else {
            c.segment<12>(r) = L.d;
        }
        Gamma.block(r, col0[k], 12, L.B.cols()) = L.B;
        target.segment<12>(r) = refs[k];
    }
    Eigen::VectorXd sq(rows);
    Eigen::VectorXd q(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        q[i] = cfg.q_weights[static_cast<std::size_t>(i % 12)];
        sq[i] = std::sqrt(q[i]);
    }
    const Eigen::MatrixXd W = sq.asDiagonal() * Gamma;
    QpProblem &qp = out.qp;
    qp.H = Eigen::MatrixXd::Zero(n, n);
    qp.H.selfadjointView<Eigen::Lower>().rankUpdate(W.transpose());
    qp.H = qp.H.selfadjointView<Eigen::Lower>();
    qp.H.diagonal().array() += cfg.r_weight;
    qp.g = Gamma.transpose() * q.cwiseProduct(c - target);

    const Eigen::Index nf = n / 3;
    qp.G = Eigen::MatrixXd::Zero(6 * nf, n);
    qp.h = Eigen::VectorXd::Zero(6 * nf);
    for (Eigen::Index i = 0; i < nf; ++i) {
        add_force_constraints(qp, 6 * i, 3 * i, cfg);
    }
    return out;
}

/// One horizon step of MPC input: contact set and foot positions used at step k.
struct HorizonStep {
    LegMap<bool> contact{};
    LegMap<Vec3> feet = zero_feet();
};

enum class MpcStatus { Ok, Degraded, Stale };

inline std::string_view to_string(MpcStatus s) {
    switch (s) {
    case MpcStatus::Ok: return "ok";
    case MpcStatus::Degraded: return "degraded";
    case MpcStatus::Stale: return "stale";
    }
    return "ok";
}

struct MpcResult {
    LegMap<Vec3> forces = zero_feet();  // ground reaction force on the body, world frame
    MpcStatus status = MpcStatus::Ok;
    int iterations = 0;
    double residual = 0;
    double wall_time = 0;  // s
};

/// MPC instance holding the last good forces for the stale fallback.
class MpcController
{
public:
    explicit MpcController(MpcConfig cfg = {}) : cfg_(std::move(cfg)) {
        validate(cfg_);
        last_.fill(Vec3::Zero());
    }

    const MpcConfig &config() const { return cfg_; }

    /// `horizon` has one entry per step (step 0 is now); `refs` the desired
    /// state after each step. `inertia` is world frame about state.r.
    MpcResult solve(const BodyState &state, double mass, const Mat3 &inertia,
                    const std::vector<HorizonStep> &horizon, const std::vector<BodyState> &refs) {
        const auto start = std::chrono::steady_clock::now();
        const std::size_t N = horizon.size();
        if (N == 0 || refs.size() != N) {
            throw Error(ErrorCode::InvalidParams, "horizon and reference lengths differ");
        }
        MpcResult res;
        res.forces.fill(Vec3::Zero());
        const auto &c0 = horizon[0].contact;
        if (!(c0[0] || c0[1] || c0[2] || c0[3])) {
            last_ = res.forces;
            res.wall_time = elapsed(start);
            return res;
        }
        std::vector<LinearizedDynamics> lins;
        std::vector<Vec12> xref;
        lins.reserve(N);
        xref.reserve(N);
        for (std::size_t k = 0; k < N; ++k) {
            lins.push_back(detail::linearize(state, horizon[k].feet, horizon[k].contact, inertia, mass, cfg_.dt,
                                             cfg_.gravity));
            xref.push_back(variation(refs[k], state));
        }
        const MpcQp mq = build_qp(lins, xref, cfg_);
        try {
            const QpResult qr = solve_qp(mq.qp, cfg_.qp);
            for (std::size_t i = 0; i < mq.slots.size() && mq.slots[i].step == 0; ++i) {
                res.forces[index(mq.slots[i].leg)] = qr.x.segment<3>(static_cast<Eigen::Index>(3 * i));
            }
            res.iterations = qr.iterations;
            res.residual = qr.residual;
            res.status = qr.degraded() ? MpcStatus::Degraded : MpcStatus::Ok;
            last_ = res.forces;
        } catch (const Error &e) {
            if (e.code() != ErrorCode::Infeasible) {
                throw;
            }
            res.forces = last_;
            for (Leg leg : kAllLegs) {
                if (!c0[index(leg)]) {
                    res.forces[index(leg)] = Vec3::Zero();
                }
            }
            res.status = MpcStatus::Stale;
        }
        res.wall_time = elapsed(start);
        return res;
    }

private:
    static double elapsed(std::chrono::steady_clock::time_point start) {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }

    MpcConfig cfg_;
    LegMap<Vec3> last_ = zero_feet();
};

/// Stateless MPC call with contacts and feet held over the horizon and the
/// reference anchored at the current state.
inline MpcResult mpc_step(const BodyState &state, const LegMap<Vec3> &feet, const LegMap<bool> &contact,
                          const CommandProfile &cmd, double t, double mass, const Mat3 &inertia,
                          const MpcConfig &cfg = {}) {
    MpcController ctl(cfg);
    const std::vector<HorizonStep> horizon(static_cast<std::size_t>(cfg.horizon), HorizonStep{contact, feet});
    return ctl.solve(state, mass, inertia, horizon, build_reference(cmd, t, state, cfg));
}

} // namespace quadspine
