#pragma once

// Robot description, forward kinematics over the body tree, analytic leg IK,
// leg Jacobians, Jacobian-transpose inverse dynamics and the actuator model.

#include "quadspine/lie.hpp"
#include "quadspine/types.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace quadspine
{

/// Floating base state: COM of the middle body, world frame.
struct BodyState {
    Vec3 r = Vec3::Zero();
    Mat3 R = Mat3::Identity();
    Vec3 v = Vec3::Zero();
    Vec3 w = Vec3::Zero();
};

/// Angles (rad), rates (rad/s) and torques (N m) of the 16 actuated joints.
struct JointState {
    JointVector q = JointVector::Zero();
    JointVector qd = JointVector::Zero();
    JointVector tau = JointVector::Zero();
};

enum class ActuatorClass : std::size_t {
    SpinePitch = 0,
    SpineYaw,
    HipRollLeft,
    HipRollRight,
    HipPitch,
    Knee,
};

inline constexpr std::size_t kNumActuatorClasses = 6;

struct Actuator {
    double omega_max = 0;  // rad/s
    double tau_max = 0;    // N m
    double theta_min = 0;  // rad
    double theta_max = 0;  // rad
    double gear_ratio = 1;
};

struct RigidBodyParams {
    double mass = 0;
    Vec3 com = Vec3::Zero();
    Mat3 inertia = Mat3::Zero();
};

struct LegParams {
    Vec3 hip = Vec3::Zero();  // hip roll joint origin in the front/back body frame
    Vec3 v0 = Vec3::Zero();   // hip roll -> hip pitch
    Vec3 v1 = Vec3::Zero();   // hip pitch -> knee
    Vec3 v2 = Vec3::Zero();   // knee -> foot
};

/// Everything the model config file holds.
struct ModelParams {
    RigidBodyParams middle, front, back;
    Vec3 front_spine_mount = Vec3::Zero();  // in the middle body frame
    Vec3 rear_spine_mount = Vec3::Zero();
    SpineMap<Vec3> spine_axes{};
    LegMap<LegParams> legs{};
    std::array<Actuator, kNumActuatorClasses> actuators{};
    double motor_kv_rpm = 270.0;
    double winding_resistance = 0.27;
    double nominal_height = 0.20;
    double leg_joint_inertia = 0.003;  // reflected rotor inertia of a swing-leg joint
};

inline Mat3 box_inertia(double mass, double lx, double ly, double lz) {
    Mat3 I = Mat3::Zero();
    I(0, 0) = mass / 12.0 * (ly * ly + lz * lz);
    I(1, 1) = mass / 12.0 * (lx * lx + lz * lz);
    I(2, 2) = mass / 12.0 * (lx * lx + ly * ly);
    return I;
}

/// Default parameters. Body masses, link lengths and mount offsets are not
/// published; they are toy-poodle scale placeholders. Actuator rows are the
/// published limits.
inline ModelParams default_model_params() {
    ModelParams p;
    p.middle = {1.6, Vec3::Zero(), box_inertia(1.6, 0.12, 0.14, 0.08)};
    p.front = {1.2, Vec3(0.06, 0, 0), box_inertia(1.2, 0.12, 0.14, 0.08)};
    p.back = {1.2, Vec3(-0.06, 0, 0), box_inertia(1.2, 0.12, 0.14, 0.08)};
    p.front_spine_mount = Vec3(0.06, 0, 0);
    p.rear_spine_mount = Vec3(-0.06, 0, 0);
    p.spine_axes = {Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(0, -1, 0), Vec3(0, 0, 1)};
    const double hip_x = 0.09, hip_y = 0.05, l0 = 0.03, l1 = 0.11, l2 = 0.11;
    for (Leg leg : kAllLegs) {
        const double sx = is_front(leg) ? 1.0 : -1.0;
        const double sy = is_left(leg) ? 1.0 : -1.0;
        LegParams &lp = p.legs[index(leg)];
        lp.hip = Vec3(sx * hip_x, sy * hip_y, 0);
        lp.v0 = Vec3(0, sy * l0, 0);
        lp.v1 = Vec3(0, 0, -l1);
        lp.v2 = Vec3(0, 0, -l2);
    }
    const double pi = kPi;
    p.actuators[0] = {46.875, 4.32, -pi / 12, pi / 12, 16.0};
    p.actuators[1] = {83.333, 2.43, -pi / 12, pi / 12, 9.0};
    p.actuators[2] = {83.333, 2.43, -pi / 18, pi / 4, 9.0};
    p.actuators[3] = {83.333, 2.43, -pi / 4, pi / 18, 9.0};
    p.actuators[4] = {46.875, 4.32, -3 * pi / 4, 3 * pi / 4, 16.0};
    p.actuators[5] = {46.875, 4.32, -4 * pi / 5, 4 * pi / 5, 16.0};
    return p;
}

/// One node of the body tree. Node 0 is the floating base (middle body).
/// Parents always precede children.
struct BodyNode {
    std::string name;
    int parent = -1;
    Vec3 offset = Vec3::Zero();  // joint origin in the parent frame
    Vec3 axis = Vec3::Zero();    // hinge axis, zero for a rigid attachment
    int joint = -1;              // actuated joint index, -1 when rigid
    double mass = 0;
    Vec3 com = Vec3::Zero();
    Mat3 inertia = Mat3::Zero();
};

class RobotModel
{
public:
    explicit RobotModel(const ModelParams &params = default_model_params()) : params_(params) {
        validate(params);
        build();
    }

    const ModelParams &params() const { return params_; }
    const std::vector<BodyNode> &bodies() const { return bodies_; }
    int parent(int body) const { return bodies_[body].parent; }

    const Actuator &actuator(std::size_t joint) const {
        return params_.actuators[static_cast<std::size_t>(actuator_class(joint))];
    }

    static ActuatorClass actuator_class(std::size_t joint) {
        if (is_spine_joint(joint)) {
            return (joint == 0 || joint == 2) ? ActuatorClass::SpinePitch : ActuatorClass::SpineYaw;
        }
        const std::size_t k = joint - kNumSpineJoints;
        const Leg leg = static_cast<Leg>(k / 3);
        switch (k % 3) {
        case 0: return is_left(leg) ? ActuatorClass::HipRollLeft : ActuatorClass::HipRollRight;
        case 1: return ActuatorClass::HipPitch;
        default: return ActuatorClass::Knee;
        }
    }

    /// Joint-level current constant: motor Kv in rad/s/V divided by the gear ratio.
    double kv_eff(std::size_t joint) const {
        return params_.motor_kv_rpm * 2.0 * kPi / 60.0 / actuator(joint).gear_ratio;
    }

    int body_of_joint(std::size_t joint) const { return joint_body_[joint]; }
    int foot_body(Leg leg) const { return foot_body_[index(leg)]; }
    int hip_parent_body(Leg leg) const { return is_front(leg) ? front_body_ : back_body_; }
    int front_body() const { return front_body_; }
    int back_body() const { return back_body_; }
    const LegParams &leg(Leg l) const { return params_.legs[index(l)]; }

    /// True when `body` lies in the subtree rooted at `root` (inclusive).
    bool in_subtree(int root, int body) const {
        for (int b = body; b >= 0; b = bodies_[b].parent) {
            if (b == root) {
                return true;
            }
        }
        return false;
    }

    double total_mass() const {
        double m = 0;
        for (const auto &b : bodies_) {
            m += b.mass;
        }
        return m;
    }

    /// Foot position in the middle body frame with the spine straight and the
    /// base at nominal height (the neutral stance point c^i).
    Vec3 neutral_foot(Leg l) const {
        const Vec3 mount = is_front(l) ? params_.front_spine_mount : params_.rear_spine_mount;
        const LegParams &lp = leg(l);
        return Vec3(mount.x() + lp.hip.x(), mount.y() + lp.hip.y() + lp.v0.y(), -params_.nominal_height);
    }

    /// Hip roll joint origin in the middle body frame with the spine straight.
    Vec3 neutral_hip(Leg l) const {
        const Vec3 mount = is_front(l) ? params_.front_spine_mount : params_.rear_spine_mount;
        return mount + leg(l).hip;
    }

private:
    static void validate(const ModelParams &p) {
        for (const auto *b : {&p.middle, &p.front, &p.back}) {
            if (!(b->mass > 0)) {
                throw Error(ErrorCode::ConfigError, "body masses must be positive");
            }
            const Mat3 sym = 0.5 * (b->inertia + b->inertia.transpose());
            if ((b->inertia - sym).norm() > 1e-12) {
                throw Error(ErrorCode::ConfigError, "inertia must be symmetric");
            }
            Eigen::SelfAdjointEigenSolver<Mat3> es(sym);
            if (es.eigenvalues().minCoeff() <= 0) {
                throw Error(ErrorCode::ConfigError, "inertia must be positive definite");
            }
        }
        for (const auto &lp : p.legs) {
            if (lp.v0.x() != 0 || lp.v0.z() != 0 || lp.v0.y() == 0) {
                throw Error(ErrorCode::ConfigError, "v0 must lie along the body y axis");
            }
            if (lp.v1.x() != 0 || lp.v1.y() != 0 || !(lp.v1.z() < 0) ||
                lp.v2.x() != 0 || lp.v2.y() != 0 || !(lp.v2.z() < 0)) {
                throw Error(ErrorCode::ConfigError, "v1 and v2 must point along -z");
            }
        }
        for (const auto &axis : p.spine_axes) {
            if (std::abs(axis.norm() - 1.0) > 1e-12) {
                throw Error(ErrorCode::ConfigError, "spine axes must be unit vectors");
            }
        }
        for (const auto &a : p.actuators) {
            if (!(a.tau_max > 0) || !(a.omega_max > 0) || !(a.theta_min < a.theta_max) || !(a.gear_ratio > 0)) {
                throw Error(ErrorCode::ConfigError, "invalid actuator row");
            }
        }
        if (!(p.nominal_height > 0) || !(p.leg_joint_inertia > 0) || !(p.winding_resistance >= 0)) {
            throw Error(ErrorCode::ConfigError, "invalid scalar model parameter");
        }
    }

    int add(BodyNode node) {
        bodies_.push_back(std::move(node));
        return static_cast<int>(bodies_.size()) - 1;
    }

    void build() {
        const auto &p = params_;
        joint_body_.fill(-1);
        add({"middle", -1, Vec3::Zero(), Vec3::Zero(), -1, p.middle.mass, p.middle.com, p.middle.inertia});
        auto spine = [&](SpineJoint j, int parent, const Vec3 &offset) {
            const int b = add({std::string(name(j)) + "_link", parent, offset, p.spine_axes[index(j)],
                               static_cast<int>(joint_index(j)), 0.0, Vec3::Zero(), Mat3::Zero()});
            joint_body_[joint_index(j)] = b;
            return b;
        };
        const int fy = spine(SpineJoint::FrontPitch, 0, p.front_spine_mount);
        front_body_ = spine(SpineJoint::FrontYaw, fy, Vec3::Zero());
        bodies_[front_body_].name = "front";
        bodies_[front_body_].mass = p.front.mass;
        bodies_[front_body_].com = p.front.com;
        bodies_[front_body_].inertia = p.front.inertia;
        const int ry = spine(SpineJoint::RearPitch, 0, p.rear_spine_mount);
        back_body_ = spine(SpineJoint::RearYaw, ry, Vec3::Zero());
        bodies_[back_body_].name = "back";
        bodies_[back_body_].mass = p.back.mass;
        bodies_[back_body_].com = p.back.com;
        bodies_[back_body_].inertia = p.back.inertia;

        static constexpr std::array<const char *, 3> suffix{"_roll_link", "_thigh", "_shank"};
        for (Leg leg : kAllLegs) {
            const LegParams &lp = p.legs[index(leg)];
            const std::array<Vec3, 3> offsets{lp.hip, lp.v0, lp.v1};
            const std::array<Vec3, 3> axes{Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitY()};
            int parent = hip_parent_body(leg);
            for (std::size_t k = 0; k < 3; ++k) {
                const std::size_t j = joint_index(leg, static_cast<LegJoint>(k));
                parent = add({std::string(name(leg)) + suffix[k], parent, offsets[k], axes[k],
                              static_cast<int>(j), 0.0, Vec3::Zero(), Mat3::Zero()});
                joint_body_[j] = parent;
            }
            foot_body_[index(leg)] = add({std::string(name(leg)) + "_foot", parent, lp.v2, Vec3::Zero(), -1,
                                          0.0, Vec3::Zero(), Mat3::Zero()});
        }
    }

    ModelParams params_;
    std::vector<BodyNode> bodies_;
    std::array<int, kNumJoints> joint_body_{};
    LegMap<int> foot_body_{};
    int front_body_ = -1;
    int back_body_ = -1;
};

/// World transform of every body node: T_i = T_parent(i) * T_joint(i).
inline std::vector<Transform> forward_kinematics(const RobotModel &model, const BodyState &base,
                                                 const JointVector &q) {
    const auto &bodies = model.bodies();
    std::vector<Transform> T(bodies.size());
    T[0].linear() = base.R;
    T[0].translation() = base.r;
    for (std::size_t i = 1; i < bodies.size(); ++i) {
        const BodyNode &b = bodies[i];
        Transform local = Transform::Identity();
        local.translation() = b.offset;
        if (b.joint >= 0) {
            local.linear() = lie::exp_so3(b.axis * q[b.joint]);
        }
        T[i] = T[b.parent] * local;
    }
    return T;
}

inline Vec3 foot_position(const RobotModel &model, const std::vector<Transform> &fk, Leg leg) {
    return fk[model.foot_body(leg)].translation();
}

/// Hip roll joint frame (before the roll rotation) in world coordinates.
inline Transform hip_frame(const RobotModel &model, const std::vector<Transform> &fk, Leg leg) {
    Transform local = Transform::Identity();
    local.translation() = model.leg(leg).hip;
    return fk[model.hip_parent_body(leg)] * local;
}

using LegAngles = Vec3;  // hip roll, hip pitch, knee

enum class IkStatus { Ok, Unreachable, OutOfLimits };

struct IkResult {
    LegAngles angles = LegAngles::Zero();
    IkStatus status = IkStatus::Ok;
};

namespace detail
{
inline double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * kPi);
    return a;
}

inline bool within_limits(const RobotModel &model, Leg leg, const LegAngles &a) {
    for (std::size_t k = 0; k < 3; ++k) {
        const Actuator &act = model.actuator(joint_index(leg, static_cast<LegJoint>(k)));
        if (a[k] < act.theta_min - 1e-12 || a[k] > act.theta_max + 1e-12) {
            return false;
        }
    }
    return true;
}
} // namespace detail

/// Closed-form leg IK, non-throwing. Returns the knee-backward solution when it
/// respects the joint limits, else the knee-forward one, else the knee-backward
/// solution flagged OutOfLimits. An unreachable target yields the closest
/// straight-leg pose flagged Unreachable.
inline IkResult solve_leg_ik(const RobotModel &model, Leg leg, const Transform &hip, const Vec3 &foot_world) {
    const LegParams &lp = model.leg(leg);
    const double l0 = lp.v0.y();
    const double l1 = -lp.v1.z();
    const double l2 = -lp.v2.z();
    const Vec3 p = hip.inverse() * foot_world;

    IkResult out;
    const double ryz2 = p.y() * p.y() + p.z() * p.z();
    double qz2 = ryz2 - l0 * l0;
    if (qz2 < 0) {
        out.status = IkStatus::Unreachable;
        qz2 = 0;
    }
    const double qz = -std::sqrt(qz2);
    const double roll = detail::wrap_angle(std::atan2(p.z(), p.y()) - std::atan2(qz, l0));

    const double x = p.x();
    const double d2 = x * x + qz * qz;
    double c = (d2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
    if (c > 1.0 + 1e-12 || c < -1.0 - 1e-12) {
        out.status = IkStatus::Unreachable;
    }
    c = std::clamp(c, -1.0, 1.0);
    const double fold = std::acos(c);

    auto solve = [&](double knee) {
        const double a = l1 + l2 * std::cos(knee);
        const double b = l2 * std::sin(knee);
        const double hip_pitch = detail::wrap_angle(std::atan2(-x, -qz) - std::atan2(b, a));
        return LegAngles(roll, hip_pitch, knee);
    };
    // Knee-backward: knee point behind the hip-foot line, i.e. knee <= 0 with
    // +y pitch axes. The fold singularity resolves to +pi.
    const double backward_knee = (fold == kPi) ? kPi : -fold;
    const LegAngles backward = solve(backward_knee);
    if (out.status == IkStatus::Unreachable) {
        out.angles = backward;
        return out;
    }
    if (detail::within_limits(model, leg, backward)) {
        out.angles = backward;
        return out;
    }
    const LegAngles forward = solve(fold);
    if (detail::within_limits(model, leg, forward)) {
        out.angles = forward;
        return out;
    }
    out.angles = backward;
    out.status = IkStatus::OutOfLimits;
    return out;
}

/// Throwing leg IK: Unreachable outside the reachable annulus, OutOfLimits when
/// every solution violates a joint limit.
inline LegAngles leg_ik(const RobotModel &model, Leg leg, const Transform &hip, const Vec3 &foot_world) {
    const IkResult r = solve_leg_ik(model, leg, hip, foot_world);
    switch (r.status) {
    case IkStatus::Unreachable:
        throw Error(ErrorCode::Unreachable, "foot target outside the reachable workspace of leg " +
                                                std::string(name(leg)));
    case IkStatus::OutOfLimits:
        throw Error(ErrorCode::OutOfLimits, "only limit-violating IK solutions for leg " + std::string(name(leg)));
    case IkStatus::Ok:
        break;
    }
    return r.angles;
}

inline void set_leg_angles(JointVector &q, Leg leg, const LegAngles &a) {
    for (std::size_t k = 0; k < 3; ++k) {
        q[joint_index(leg, static_cast<LegJoint>(k))] = a[k];
    }
}

inline LegAngles leg_angles(const JointVector &q, Leg leg) {
    return LegAngles(q[joint_index(leg, LegJoint::HipRoll)], q[joint_index(leg, LegJoint::HipPitch)],
                     q[joint_index(leg, LegJoint::Knee)]);
}

/// World-frame axis and origin of the hinge at body node `b`.
inline std::pair<Vec3, Vec3> joint_axis_world(const RobotModel &model, const std::vector<Transform> &fk, int b) {
    return {fk[b].linear() * model.bodies()[b].axis, fk[b].translation()};
}

/// d(foot world position)/d(leg joint angles) with the base and spine held fixed.
inline Mat3 leg_jacobian(const RobotModel &model, const std::vector<Transform> &fk, Leg leg) {
    const Vec3 foot = foot_position(model, fk, leg);
    Mat3 J;
    for (std::size_t k = 0; k < 3; ++k) {
        const int b = model.body_of_joint(joint_index(leg, static_cast<LegJoint>(k)));
        const auto [u, o] = joint_axis_world(model, fk, b);
        J.col(static_cast<Eigen::Index>(k)) = u.cross(foot - o);
    }
    return J;
}

inline Mat3 leg_jacobian(const RobotModel &model, const BodyState &base, const JointVector &q, Leg leg) {
    return leg_jacobian(model, forward_kinematics(model, base, q), leg);
}

/// Jacobian-transpose inverse dynamics, tau = J^T f, where f is the force the
/// foot exerts on its environment.
inline Vec3 joint_torques_from_force(const Mat3 &J, const Vec3 &f) { return J.transpose() * f; }

/// Static spine torques: each spine joint balances the gravity wrench of the
/// bodies distal to it plus the moments of the ground reaction forces (forces
/// on the robot) at distal stance feet. Swing feet must carry nullopt.
inline SpineMap<double> spine_feedforward_torque(const RobotModel &model, const std::vector<Transform> &fk,
                                                 const LegMap<std::optional<Vec3>> &stance_forces,
                                                 double gravity = 9.81) {
    SpineMap<double> tau{};
    const auto &bodies = model.bodies();
    const Vec3 g(0, 0, -gravity);
    for (SpineJoint sj : kAllSpineJoints) {
        const int jb = model.body_of_joint(joint_index(sj));
        const auto [u, o] = joint_axis_world(model, fk, jb);
        Vec3 moment = Vec3::Zero();
        for (std::size_t b = 0; b < bodies.size(); ++b) {
            if (bodies[b].mass > 0 && model.in_subtree(jb, static_cast<int>(b))) {
                const Vec3 c = fk[b] * bodies[b].com;
                moment += (c - o).cross(bodies[b].mass * g);
            }
        }
        for (Leg leg : kAllLegs) {
            const auto &f = stance_forces[index(leg)];
            if (f && model.in_subtree(jb, model.foot_body(leg))) {
                moment += (foot_position(model, fk, leg) - o).cross(*f);
            }
        }
        tau[index(sj)] = -u.dot(moment);
    }
    return tau;
}

inline SpineMap<double> spine_feedforward_torque(const RobotModel &model, const BodyState &base,
                                                 const JointVector &q,
                                                 const LegMap<std::optional<Vec3>> &stance_forces,
                                                 double gravity = 9.81) {
    return spine_feedforward_torque(model, forward_kinematics(model, base, q), stance_forces, gravity);
}

/// Torque and speed saturation. Torque is limited to +-tau_max; torque that
/// would push a joint already at or beyond omega_max further in the same
/// direction is zeroed. Braking torque is always allowed.
inline double clamp_actuator(const RobotModel &model, std::size_t joint, double tau, double qd) {
    const Actuator &a = model.actuator(joint);
    double out = std::clamp(tau, -a.tau_max, a.tau_max);
    if (std::abs(qd) >= a.omega_max && out * qd > 0) {
        out = 0.0;
    }
    return out;
}

/// Copper loss plus mechanical power, (tau Kv)^2 R + tau qd, in W.
inline double electrical_power(const RobotModel &model, std::size_t joint, double tau, double qd) {
    const double current = tau * model.kv_eff(joint);
    return current * current * model.params().winding_resistance + tau * qd;
}

/// Mass, world COM and world-frame inertia about `about` of all bodies.
struct CompositeInertia {
    double mass = 0;
    Vec3 com = Vec3::Zero();
    Mat3 inertia = Mat3::Zero();
};

inline CompositeInertia composite_inertia(const RobotModel &model, const std::vector<Transform> &fk,
                                          const Vec3 &about) {
    CompositeInertia out;
    const auto &bodies = model.bodies();
    for (std::size_t b = 0; b < bodies.size(); ++b) {
        if (bodies[b].mass <= 0) {
            continue;
        }
        const Mat3 Rb = fk[b].linear();
        const Vec3 c = fk[b] * bodies[b].com;
        const Vec3 d = c - about;
        out.mass += bodies[b].mass;
        out.com += bodies[b].mass * c;
        out.inertia += Rb * bodies[b].inertia * Rb.transpose() +
                       bodies[b].mass * (d.squaredNorm() * Mat3::Identity() - d * d.transpose());
    }
    out.com /= out.mass;
    return out;
}

/// Joint angles with the spine straight and every foot at its neutral stance
/// point, base at nominal height.
inline JointVector standing_pose(const RobotModel &model) {
    JointVector q = JointVector::Zero();
    BodyState base;
    base.r = Vec3(0, 0, model.params().nominal_height);
    const auto fk = forward_kinematics(model, base, q);
    for (Leg leg : kAllLegs) {
        const Vec3 target = base.r + model.neutral_foot(leg);
        set_leg_angles(q, leg, leg_ik(model, leg, hip_frame(model, fk, leg), target));
    }
    return q;
}

} // namespace quadspine
