#pragma once

// SO(3) / so(3) maps used by kinematics, the MPC linearisation and the
// orientation term of the strategy cost.

#include "quadspine/types.hpp"

#include <algorithm>
#include <cmath>

namespace quadspine::lie
{

/// Skew-symmetric matrix with hat(w) * u == w.cross(u).
inline Mat3 hat(const Vec3 &w) {
    Mat3 m;
    m << 0.0, -w.z(), w.y(),
         w.z(), 0.0, -w.x(),
         -w.y(), w.x(), 0.0;
    return m;
}

/// Inverse of hat. Throws NotSkew when |W + W^T| >= 1e-9.
inline Vec3 vee(const Mat3 &W) {
    if ((W + W.transpose()).norm() >= 1e-9) {
        throw Error(ErrorCode::NotSkew, "matrix is not skew-symmetric");
    }
    return Vec3(W(2, 1), W(0, 2), W(1, 0));
}

inline constexpr double kSmallAngle = 1e-8;

/// Rotation matrix exp(hat(w)). Rodrigues formula, with a second order
/// Taylor expansion below kSmallAngle.
inline Mat3 exp_so3(const Vec3 &w) {
    const double theta = w.norm();
    const Mat3 K = hat(w);
    if (theta < kSmallAngle) {
        return Mat3::Identity() + K + 0.5 * K * K;
    }
    const double a = std::sin(theta) / theta;
    const double b = (1.0 - std::cos(theta)) / (theta * theta);
    return Mat3::Identity() + a * K + b * K * K;
}

/// Rotation angle of R in [0, pi].
inline double rotation_angle(const Mat3 &R) {
    const double c = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
    return std::acos(c);
}

/// vee(log(R)). Throws NearPiRotation when the angle is within 1e-6 of pi,
/// where the axis sign is not recoverable with useful accuracy.
inline Vec3 log_so3(const Mat3 &R) {
    const double cos_theta = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
    const double theta = std::acos(cos_theta);
    if (kPi - theta < 1e-6) {
        throw Error(ErrorCode::NearPiRotation, "rotation angle within 1e-6 of pi");
    }
    const Vec3 s(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
    if (theta < kSmallAngle) {
        return 0.5 * (1.0 + theta * theta / 6.0) * s;
    }
    if (cos_theta > -0.7) {
        return (0.5 * theta / std::sin(theta)) * s;
    }
    // Near pi the antisymmetric part vanishes; recover the axis from the
    // symmetric part (1 - cos) n n^T and take the sign from s.
    const Mat3 S = 0.5 * (R + R.transpose()) - cos_theta * Mat3::Identity();
    Eigen::Index k = 0;
    S.diagonal().maxCoeff(&k);
    Vec3 axis = S.col(k) / std::sqrt(S(k, k) * (1.0 - cos_theta));
    axis.normalize();
    if (axis.dot(s) < 0.0) {
        axis = -axis;
    }
    return theta * axis;
}

/// Closest rotation to an almost-orthonormal matrix (removes integration drift).
inline Mat3 orthonormalize(const Mat3 &R) {
    Eigen::JacobiSVD<Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 out = svd.matrixU() * svd.matrixV().transpose();
    if (out.determinant() < 0.0) {
        Mat3 U = svd.matrixU();
        U.col(2) = -U.col(2);
        out = U * svd.matrixV().transpose();
    }
    return out;
}

inline Mat3 rot_x(double a) { return exp_so3(Vec3(a, 0, 0)); }
inline Mat3 rot_y(double a) { return exp_so3(Vec3(0, a, 0)); }
inline Mat3 rot_z(double a) { return exp_so3(Vec3(0, 0, a)); }

/// Heading (yaw about world z) of a rotation, from its x axis.
inline double yaw_of(const Mat3 &R) { return std::atan2(R(1, 0), R(0, 0)); }

/// Roll (about x) and pitch (about y) of a ZYX decomposition.
inline double roll_of(const Mat3 &R) { return std::atan2(R(2, 1), R(2, 2)); }
inline double pitch_of(const Mat3 &R) { return std::asin(std::clamp(-R(2, 0), -1.0, 1.0)); }

} // namespace quadspine::lie
