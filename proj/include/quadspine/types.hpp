#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace quadspine
{

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Transform = Eigen::Isometry3d;

// Error kinds named after the failure they report. Every throwing operation
// raises quadspine::Error carrying one of these.
enum class ErrorCode {
    NotSkew,
    NearPiRotation,
    Unreachable,
    OutOfLimits,
    NotInSwing,
    InvalidParams,
    DegenerateFeet,
    NoStanceFeet,
    MaxIterations,
    Infeasible,
    NumericalDivergence,
    ZeroVelocity,
    TooShort,
    NoCrossing,
    MultipleCrossings,
    UnstableCandidate,
    SchemaError,
    BaselineMissing,
    EmptyInput,
    ConfigError,
    IoError,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::NotSkew: return "NotSkew";
    case ErrorCode::NearPiRotation: return "NearPiRotation";
    case ErrorCode::Unreachable: return "Unreachable";
    case ErrorCode::OutOfLimits: return "OutOfLimits";
    case ErrorCode::NotInSwing: return "NotInSwing";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::DegenerateFeet: return "DegenerateFeet";
    case ErrorCode::NoStanceFeet: return "NoStanceFeet";
    case ErrorCode::MaxIterations: return "MaxIterations";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::NumericalDivergence: return "NumericalDivergence";
    case ErrorCode::ZeroVelocity: return "ZeroVelocity";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::NoCrossing: return "NoCrossing";
    case ErrorCode::MultipleCrossings: return "MultipleCrossings";
    case ErrorCode::UnstableCandidate: return "UnstableCandidate";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::BaselineMissing: return "BaselineMissing";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

class Error : public std::runtime_error
{
public:
    Error(ErrorCode code, const std::string &what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

enum class Leg : std::size_t { FL = 0, FR = 1, RL = 2, RR = 3 };
enum class SpineJoint : std::size_t { FrontPitch = 0, FrontYaw = 1, RearPitch = 2, RearYaw = 3 };
enum class LegJoint : std::size_t { HipRoll = 0, HipPitch = 1, Knee = 2 };

inline constexpr std::size_t kNumLegs = 4;
inline constexpr std::size_t kNumSpineJoints = 4;
inline constexpr std::size_t kNumJoints = 16;

inline constexpr std::array<Leg, 4> kAllLegs{Leg::FL, Leg::FR, Leg::RL, Leg::RR};
inline constexpr std::array<SpineJoint, 4> kAllSpineJoints{
    SpineJoint::FrontPitch, SpineJoint::FrontYaw, SpineJoint::RearPitch, SpineJoint::RearYaw};

inline constexpr std::size_t index(Leg leg) { return static_cast<std::size_t>(leg); }
inline constexpr std::size_t index(SpineJoint j) { return static_cast<std::size_t>(j); }

// Actuated joint ordering: the four spine joints (fy, fz, ry, rz) first,
// then hip roll / hip pitch / knee for fl, fr, rl, rr.
inline constexpr std::size_t joint_index(SpineJoint j) { return index(j); }
inline constexpr std::size_t joint_index(Leg leg, LegJoint j) {
    return kNumSpineJoints + 3 * index(leg) + static_cast<std::size_t>(j);
}
inline constexpr bool is_spine_joint(std::size_t joint) { return joint < kNumSpineJoints; }

inline constexpr bool is_front(Leg leg) { return leg == Leg::FL || leg == Leg::FR; }
inline constexpr bool is_left(Leg leg) { return leg == Leg::FL || leg == Leg::RL; }

inline constexpr std::array<std::string_view, 4> kLegNames{"fl", "fr", "rl", "rr"};
inline constexpr std::array<std::string_view, 4> kSpineNames{"fy", "fz", "ry", "rz"};

inline std::string_view name(Leg leg) { return kLegNames[index(leg)]; }
inline std::string_view name(SpineJoint j) { return kSpineNames[index(j)]; }

inline std::string joint_name(std::size_t joint) {
    static constexpr std::array<std::string_view, 3> leg_joint{"roll", "hip", "knee"};
    if (is_spine_joint(joint)) {
        return std::string(kSpineNames[joint]);
    }
    const std::size_t k = joint - kNumSpineJoints;
    return std::string(kLegNames[k / 3]) + "_" + std::string(leg_joint[k % 3]);
}

template <typename T>
using LegMap = std::array<T, kNumLegs>;

template <typename T>
using SpineMap = std::array<T, kNumSpineJoints>;

using JointVector = Eigen::Matrix<double, 16, 1>;

/// Four zero vectors. `LegMap<Vec3>{}` leaves Eigen storage uninitialised.
inline LegMap<Vec3> zero_feet() { return {Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()}; }

inline constexpr double kPi = 3.14159265358979323846;

} // namespace quadspine
