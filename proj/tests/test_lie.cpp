#include "oracles.hpp"
#include "quadspine/lie.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace quadspine;
using namespace quadspine::lie;

TEST(Hat, ZeroVectorGivesZeroMatrix) { EXPECT_EQ(hat(Vec3::Zero()), Mat3::Zero()); }

TEST(Hat, ThirdGenerator) {
    Mat3 G2;
    G2 << 0, -1, 0, 1, 0, 0, 0, 0, 0;
    EXPECT_EQ(hat(Vec3(0, 0, 1)), G2);
}

TEST(Hat, ActsAsCrossProduct) {
    const Vec3 out = hat(Vec3(1, 2, 3)) * Vec3(4, 5, 6);
    EXPECT_EQ(out, Vec3(-3, 6, -3));
}

TEST(Hat, IsLinear) {
    const Vec3 a(0.3, -1.2, 2.5), b(-0.7, 0.1, 0.9);
    EXPECT_EQ(hat(2.0 * a + 3.0 * b), 2.0 * hat(a) + 3.0 * hat(b));
}

TEST(Vee, RoundTripsHat) {
    EXPECT_EQ(vee(hat(Vec3(1, 2, 3))), Vec3(1, 2, 3));
    EXPECT_EQ(vee(Mat3::Zero()), Vec3::Zero());
}

TEST(Vee, FirstGenerator) {
    Mat3 G0;
    G0 << 0, 0, 0, 0, 0, -1, 0, 1, 0;
    EXPECT_EQ(vee(G0), Vec3(1, 0, 0));
}

TEST(Vee, RejectsNonSkew) {
    Mat3 W = hat(Vec3(1, 2, 3));
    W(0, 0) = 1e-6;
    try {
        vee(W);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::NotSkew);
    }
}

TEST(ExpSo3, ZeroIsIdentity) { EXPECT_EQ(exp_so3(Vec3::Zero()), Mat3::Identity()); }

TEST(ExpSo3, QuarterTurnMatchesSeries) {
    const Vec3 w(0, 0, kPi / 2);
    EXPECT_LT((exp_so3(w) - oracle::series_exp(w)).norm(), 1e-12);
}

TEST(ExpSo3, RandomMatchesSeries) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int i = 0; i < 2000; ++i) {
        Vec3 w(U(rng), U(rng), U(rng));
        w = w.normalized() * 3.0 * std::abs(U(rng));
        EXPECT_LT((exp_so3(w) - oracle::series_exp(w)).norm(), 1e-10);
    }
}

TEST(ExpSo3, SmallAngleBranchIsRotation) {
    const Mat3 R = exp_so3(Vec3(3e-9, -2e-9, 1e-9));
    EXPECT_LT((R * R.transpose() - Mat3::Identity()).norm(), 1e-15);
    EXPECT_NEAR(R.determinant(), 1.0, 1e-15);
}

TEST(ExpSo3, InverseIsNegation) {
    const Vec3 w(0.4, -1.1, 2.0);
    EXPECT_LT((exp_so3(w) * exp_so3(-w) - Mat3::Identity()).norm(), 1e-10);
}

TEST(LogSo3, IdentityIsZero) { EXPECT_EQ(log_so3(Mat3::Identity()), Vec3::Zero()); }

TEST(LogSo3, RoundTrip) {
    const Vec3 w(0.1, -0.2, 0.3);
    EXPECT_LT((log_so3(exp_so3(w)) - w).norm(), 1e-10);
}

TEST(LogSo3, SeriesRotation) {
    EXPECT_LT((log_so3(oracle::series_exp(Vec3(0, 1.0, 0))) - Vec3(0, 1.0, 0)).norm(), 1e-10);
}

TEST(LogSo3, LargeAngleBranch) {
    const Vec3 w = Vec3(0.3, -0.5, 0.8).normalized() * 3.0;
    EXPECT_LT((log_so3(exp_so3(w)) - w).norm(), 1e-9);
}

TEST(LogSo3, NearPiRaises) {
    try {
        log_so3(exp_so3(Vec3(0, 0, kPi - 1e-8)));
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::NearPiRotation);
    }
}

TEST(LogSo3, ExpOfLogReproducesRandomRotations) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int i = 0; i < 2000; ++i) {
        Vec3 w(U(rng), U(rng), U(rng));
        w = w.normalized() * (kPi - 1e-3) * std::abs(U(rng));
        const Mat3 R = oracle::series_exp(w);
        EXPECT_LT((exp_so3(log_so3(R)) - R).norm(), 1e-9);
    }
}

TEST(Angles, RollPitchYawOfElementaryRotations) {
    EXPECT_NEAR(yaw_of(rot_z(0.4)), 0.4, 1e-15);
    EXPECT_NEAR(roll_of(rot_x(-0.3)), -0.3, 1e-15);
    EXPECT_NEAR(pitch_of(rot_y(0.2)), 0.2, 1e-15);
}
