#include "oracles.hpp"
#include "quadspine/model.hpp"
#include "quadspine/mpc.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace quadspine;

namespace
{

struct Standing {
    RobotModel model;
    BodyState state;
    LegMap<Vec3> feet{};
    double mass = 0;
    Mat3 inertia = Mat3::Zero();

    Standing() {
        state.r = Vec3(0, 0, model.params().nominal_height);
        const auto fk = forward_kinematics(model, state, standing_pose(model));
        for (Leg leg : kAllLegs) feet[index(leg)] = foot_position(model, fk, leg);
        const CompositeInertia ci = composite_inertia(model, fk, state.r);
        mass = ci.mass;
        inertia = ci.inertia;
    }
};

Vec3 oracle_log(const Mat3 &R) {
    const Eigen::AngleAxisd aa(R);
    return aa.angle() * aa.axis();
}

} // namespace

TEST(Reference, ZeroCommandHoldsPose) {
    BodyState s;
    s.r = Vec3(0.3, -0.1, 0.2);
    s.R = lie::rot_z(0.4);
    const auto refs = build_reference(CommandProfile{}, 0.0, s, MpcConfig{});
    ASSERT_EQ(refs.size(), 10u);
    for (const auto &r : refs) {
        EXPECT_LT((r.r - s.r).norm(), 1e-15);
        EXPECT_LT((r.R - s.R).norm(), 1e-15);
        EXPECT_EQ(r.v, Vec3::Zero());
    }
}

TEST(Reference, AtSpeedAdvancesOneStep) {
    MpcConfig cfg;
    cfg.horizon = 1;
    CommandProfile cmd;
    cmd.target.v = Vec3(0.3, 0, 0);
    const auto refs = build_reference(cmd, 5.0, BodyState{}, cfg);
    EXPECT_NEAR(refs[0].r.x(), 0.0075, 1e-15);
}

TEST(Reference, YawRateRotatesHeading) {
    CommandProfile cmd;
    cmd.target.yaw_rate = -0.5;
    const MpcConfig cfg;
    const auto refs = build_reference(cmd, 5.0, BodyState{}, cfg);
    for (int k = 1; k <= cfg.horizon; ++k) {
        EXPECT_LT((refs[static_cast<std::size_t>(k - 1)].R - oracle::series_exp(Vec3(0, 0, -0.5 * k * cfg.dt))).norm(),
                  1e-12);
    }
}

TEST(Reference, RampLimitsAcceleration) {
    CommandProfile cmd;
    cmd.target.v = Vec3(0.6, 0, 0);
    cmd.target.yaw_rate = -0.5;
    EXPECT_NEAR(cmd.at(0.5).v.x(), 0.25, 1e-15);
    EXPECT_NEAR(cmd.at(0.2).yaw_rate, -0.2, 1e-15);
    EXPECT_EQ(cmd.at(3.0).v.x(), 0.6);
    EXPECT_NEAR(cmd.ramp_end(), 1.2, 1e-15);
}

TEST(Linearize, BalancedForcesKeepVelocity) {
    Standing s;
    const LegMap<bool> all{true, true, true, true};
    const auto lin = linearize_dynamics(s.state, s.feet, all, s.inertia, s.mass, 0.025);
    Eigen::VectorXd u(12);
    for (int i = 0; i < 4; ++i) u.segment<3>(3 * i) = Vec3(0, 0, s.mass * 9.81 / 4);
    const Vec12 x1 = lin.A * Vec12::Zero() + lin.B * u + lin.d;
    EXPECT_LT(x1.segment<3>(6).norm(), 1e-15);
    EXPECT_LT(x1.segment<3>(9).norm(), 1e-12);
}

TEST(Linearize, ZeroForcesFreeFall) {
    Standing s;
    const LegMap<bool> all{true, true, true, true};
    const auto lin = linearize_dynamics(s.state, s.feet, all, s.inertia, s.mass, 0.025);
    const Vec12 x1 = lin.B * Eigen::VectorXd::Zero(12) + lin.d;
    EXPECT_NEAR(x1[8], -9.81 * 0.025, 1e-15);
}

TEST(Linearize, NoStanceFeetRaises) {
    Standing s;
    try {
        linearize_dynamics(s.state, s.feet, LegMap<bool>{}, s.inertia, s.mass, 0.025);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::NoStanceFeet);
    }
}

TEST(Linearize, SwingColumnsAbsent) {
    Standing s;
    const auto lin = linearize_dynamics(s.state, s.feet, {true, false, false, true}, s.inertia, s.mass, 0.025);
    EXPECT_EQ(lin.B.cols(), 6);
    EXPECT_EQ(lin.stance, (std::vector<Leg>{Leg::FL, Leg::RR}));
}

TEST(Linearize, SecondOrderErrorAgainstNonlinearStep) {
    Standing s;
    std::mt19937_64 rng(37);
    std::normal_distribution<double> N(0.0, 1.0);
    BodyState x0 = s.state;
    x0.R = lie::exp_so3(Vec3(0.1, -0.05, 0.3));
    x0.v = Vec3(0.3, 0.05, -0.02);
    x0.w = Vec3(0.4, -0.6, 0.8);
    const LegMap<bool> contact{true, true, false, true};
    const double dt = 0.025;
    const auto lin = linearize_dynamics(x0, s.feet, contact, s.inertia, s.mass, dt);
    Vec12 dx;
    for (int i = 0; i < 12; ++i) dx[i] = N(rng);
    Eigen::VectorXd du(9), u0(9);
    for (int i = 0; i < 9; ++i) du[i] = 10.0 * N(rng);
    for (int i = 0; i < 3; ++i) u0.segment<3>(3 * i) = Vec3(0, 0, s.mass * 9.81 / 3);

    std::vector<double> le, lh;
    for (double eps : {1e-2, 1e-3, 1e-4, 1e-5}) {
        oracle::SrbState xs{x0.r + eps * dx.segment<3>(0), x0.v + eps * dx.segment<3>(6),
                            x0.w + eps * dx.segment<3>(9), oracle::series_exp(eps * dx.segment<3>(3)) * x0.R};
        const Eigen::VectorXd u = u0 + eps * du;
        std::vector<Vec3> feet, forces;
        for (int i = 0; i < 3; ++i) {
            feet.push_back(s.feet[index(lin.stance[static_cast<std::size_t>(i)])]);
            forces.push_back(u.segment<3>(3 * i));
        }
        const oracle::SrbState xn = oracle::srb_step(xs, x0.R, s.inertia, s.mass, feet, forces, dt, 9.81);
        Vec12 truth;
        truth << xn.r - x0.r, oracle_log(xn.R * x0.R.transpose()), xn.v - x0.v, xn.w - x0.w;
        const Vec12 pred = lin.A * (eps * dx) + lin.B * u + lin.d;
        le.push_back(std::log((truth - pred).norm()));
        lh.push_back(std::log(eps));
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < le.size(); ++i) {
        mx += lh[i];
        my += le[i];
    }
    mx /= le.size();
    my /= le.size();
    double num = 0, den = 0;
    for (std::size_t i = 0; i < le.size(); ++i) {
        num += (lh[i] - mx) * (le[i] - my);
        den += (lh[i] - mx) * (lh[i] - mx);
    }
    EXPECT_GE(num / den, 1.8);
}

TEST(BuildQp, OneFootOneStepHandAssembly) {
    Standing s;
    MpcConfig cfg;
    cfg.q_weights.fill(1.0);
    cfg.r_weight = 1.0;
    const double dt = 0.025;
    const auto lin = linearize_dynamics(s.state, s.feet, {true, false, false, false}, s.inertia, s.mass, dt);
    Vec12 ref;
    for (int i = 0; i < 12; ++i) ref[i] = 0.01 * i;
    const MpcQp mq = build_qp({lin}, {ref}, cfg);
    ASSERT_EQ(mq.qp.n(), 3);

    const Vec3 p = s.feet[0] - s.state.r;
    Mat3 P;
    P << 0, -p.z(), p.y(), p.z(), 0, -p.x(), -p.y(), p.x(), 0;
    const Mat3 Bw = dt * s.inertia.inverse() * P;
    const Mat3 Bv = dt / s.mass * Mat3::Identity();
    const Mat3 H = Bv.transpose() * Bv + Bw.transpose() * Bw + Mat3::Identity();
    const Vec12 e = lin.d - ref;
    const Vec3 g = Bv.transpose() * e.segment<3>(6) + Bw.transpose() * e.segment<3>(9);
    EXPECT_LT((mq.qp.H - H).norm(), 1e-14);
    EXPECT_LT((mq.qp.g - g).norm(), 1e-14);
    EXPECT_EQ(mq.qp.m(), 6);
}

TEST(BuildQp, DecisionDimensionCountsStanceFeet) {
    Standing s;
    MpcConfig cfg;
    std::vector<LinearizedDynamics> lins;
    std::vector<Vec12> refs;
    for (int k = 0; k < cfg.horizon; ++k) {
        const LegMap<bool> c = (k % 2) ? LegMap<bool>{true, false, false, true} : LegMap<bool>{true, true, true, false};
        lins.push_back(linearize_dynamics(s.state, s.feet, c, s.inertia, s.mass, cfg.dt));
        refs.push_back(Vec12::Zero());
    }
    const MpcQp mq = build_qp(lins, refs, cfg);
    EXPECT_EQ(mq.qp.n(), 3 * (5 * 2 + 5 * 3));
}

TEST(BuildQp, PyramidRowViolation) {
    QpProblem qp;
    qp.G = Eigen::MatrixXd::Zero(6, 3);
    qp.h = Eigen::VectorXd::Zero(6);
    add_force_constraints(qp, 0, 0, MpcConfig{});
    const Eigen::VectorXd slack = qp.G * Vec3(2, 0, 1) - qp.h;
    EXPECT_EQ(slack[0], 1.0);
    EXPECT_LE(slack.tail<5>().maxCoeff(), 0.0);
}

TEST(MpcStep, StandingSymmetricSupport) {
    Standing s;
    const MpcResult r = mpc_step(s.state, s.feet, {true, true, true, true}, CommandProfile{}, 0.0, s.mass, s.inertia);
    const double mg = s.mass * 9.81;
    double fz = 0;
    for (const Vec3 &f : r.forces) {
        fz += f.z();
        EXPECT_NEAR(f.z(), mg / 4, 0.02 * mg / 4);
        EXPECT_LT(f.head<2>().norm(), 0.05 * mg);
    }
    EXPECT_NEAR(fz, mg, 0.01 * mg);
    EXPECT_EQ(r.status, MpcStatus::Ok);
}

TEST(MpcStep, ForcesSatisfyPyramid) {
    Standing s;
    BodyState x = s.state;
    x.v = Vec3(-0.3, 0.2, 0.1);
    x.w = Vec3(0.5, -0.5, 0.3);
    CommandProfile cmd;
    cmd.target.v = Vec3(0.6, 0, 0);
    const MpcResult r = mpc_step(x, s.feet, {true, false, false, true}, cmd, 3.0, s.mass, s.inertia);
    for (Leg leg : kAllLegs) {
        const Vec3 &f = r.forces[index(leg)];
        EXPECT_LE(std::abs(f.x()) - f.z(), 1e-8);
        EXPECT_LE(std::abs(f.y()) - f.z(), 1e-8);
        EXPECT_GE(f.z(), -1e-8);
        EXPECT_LE(f.z(), 40.0 + 1e-8);
    }
    EXPECT_EQ(r.forces[1], Vec3::Zero());
    EXPECT_EQ(r.forces[2], Vec3::Zero());
}

TEST(MpcStep, Deterministic) {
    Standing s;
    BodyState x = s.state;
    x.w = Vec3(0.1, 0.2, -0.1);
    const MpcResult a = mpc_step(x, s.feet, {true, true, false, true}, CommandProfile{}, 0.0, s.mass, s.inertia);
    const MpcResult b = mpc_step(x, s.feet, {true, true, false, true}, CommandProfile{}, 0.0, s.mass, s.inertia);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a.forces[i], b.forces[i]);
}
