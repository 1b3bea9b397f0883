#pragma once

// SimLog CSV. Metadata precedes the header as "# key=value" lines; every
// number is written with 17 significant digits so a read-back is exact.

#include "quadspine/sim.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace quadspine
{

inline std::vector<std::string> log_columns(bool timing = false) {
    std::vector<std::string> c{"t"};
    for (const char *a : {"x", "y", "z"}) c.push_back(std::string("r_") + a);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) c.push_back("R_" + std::to_string(i) + std::to_string(j));
    for (const char *a : {"x", "y", "z"}) c.push_back(std::string("v_") + a);
    for (const char *a : {"x", "y", "z"}) c.push_back(std::string("w_") + a);
    for (const char *pre : {"q_", "qd_", "tau_"})
        for (std::size_t j = 0; j < kNumJoints; ++j) c.push_back(pre + joint_name(j));
    for (Leg leg : kAllLegs)
        for (const char *a : {"x", "y", "z"}) c.push_back("f_" + std::string(name(leg)) + "_" + a);
    for (Leg leg : kAllLegs) c.push_back("contact_" + std::string(name(leg)));
    for (std::size_t j = 0; j < kNumJoints; ++j) c.push_back("power_" + joint_name(j));
    for (const char *s : {"mpc_tick", "mpc_iterations", "mpc_residual", "mpc_status"}) c.emplace_back(s);
    c.emplace_back("phase");
    for (Leg leg : kAllLegs) c.push_back("scheduled_" + std::string(name(leg)));
    for (const char *a : {"x", "y", "z"}) c.push_back(std::string("ref_r_") + a);
    c.emplace_back("ref_yaw");
    for (const char *a : {"x", "y", "z"}) c.push_back(std::string("ref_v_") + a);
    for (const char *a : {"x", "y", "z"}) c.push_back(std::string("ref_w_") + a);
    for (SpineJoint sj : kAllSpineJoints) c.push_back("target_" + std::string(name(sj)));
    if (timing) c.emplace_back("mpc_wall_time");
    return c;
}

namespace detail
{
inline void put(std::string &line, double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    if (!line.empty()) line += ',';
    line += buf;
}
} // namespace detail

/// Wall-clock telemetry is only written with `timing`, keeping logs of
/// repeated runs byte-identical by default.
inline void write_log_csv(std::ostream &os, const SimLog &log, bool timing = false) {
    char buf[64];
    auto meta = [&](const char *key, double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << "# " << key << '=' << buf << '\n';
    };
    meta("dt", log.dt);
    meta("mass", log.mass);
    meta("nominal_height", log.nominal_height);
    meta("ramp_end", log.ramp_end);
    meta("t_stance", log.gait.t_stance);
    meta("t_swing", log.gait.t_swing);
    for (Leg leg : kAllLegs) meta(("offset_" + std::string(name(leg))).c_str(), log.gait.offsets[index(leg)]);
    os << "# gait=" << to_string(log.gait.id) << '\n';
    os << "# strategy=" << to_string(log.strategy) << '\n';
    os << "# stable=" << (log.stable ? 1 : 0) << '\n';
    if (!log.failure.empty()) os << "# failure=" << log.failure << '\n';
    const auto cols = log_columns(timing);
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << '\n';
    std::string line;
    for (const LogRow &r : log.rows) {
        line.clear();
        detail::put(line, r.t);
        for (int i = 0; i < 3; ++i) detail::put(line, r.base.r[i]);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) detail::put(line, r.base.R(i, j));
        for (int i = 0; i < 3; ++i) detail::put(line, r.base.v[i]);
        for (int i = 0; i < 3; ++i) detail::put(line, r.base.w[i]);
        for (const JointVector *v : {&r.q, &r.qd, &r.tau})
            for (int j = 0; j < 16; ++j) detail::put(line, (*v)[j]);
        for (const Vec3 &f : r.grf)
            for (int i = 0; i < 3; ++i) detail::put(line, f[i]);
        for (bool c : r.contact) detail::put(line, c ? 1 : 0);
        for (int j = 0; j < 16; ++j) detail::put(line, r.power[j]);
        detail::put(line, r.mpc_tick ? 1 : 0);
        detail::put(line, r.mpc_iterations);
        detail::put(line, r.mpc_residual);
        detail::put(line, static_cast<double>(static_cast<int>(r.mpc_status)));
        detail::put(line, r.phase);
        for (bool c : r.scheduled) detail::put(line, c ? 1 : 0);
        for (int i = 0; i < 3; ++i) detail::put(line, r.ref.r[i]);
        detail::put(line, lie::yaw_of(r.ref.R));
        for (int i = 0; i < 3; ++i) detail::put(line, r.ref.v[i]);
        for (int i = 0; i < 3; ++i) detail::put(line, r.ref.w[i]);
        for (double x : r.spine_target) detail::put(line, x);
        if (timing) detail::put(line, r.mpc_wall_time);
        os << line << '\n';
    }
}

inline SimLog read_log_csv(std::istream &is) {
    SimLog log;
    std::string line;
    int lineno = 0;
    std::size_t ncols = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.rfind("# ", 0) == 0) {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = line.substr(2, eq - 2), val = line.substr(eq + 1);
            auto num = [&] { return std::stod(val); };
            if (key == "dt") log.dt = num();
            else if (key == "mass") log.mass = num();
            else if (key == "nominal_height") log.nominal_height = num();
            else if (key == "ramp_end") log.ramp_end = num();
            else if (key == "t_stance") log.gait.t_stance = num();
            else if (key == "t_swing") log.gait.t_swing = num();
            else if (key == "gait") log.gait.id = gait_from_string(val);
            else if (key == "strategy") log.strategy = strategy_from_string(val);
            else if (key == "stable") log.stable = val == "1";
            else if (key == "failure") log.failure = val;
            else if (key.rfind("offset_", 0) == 0) {
                for (Leg leg : kAllLegs)
                    if (key == "offset_" + std::string(name(leg))) log.gait.offsets[index(leg)] = num();
            }
            continue;
        }
        if (ncols == 0) {
            ncols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
            if (ncols != log_columns(false).size() && ncols != log_columns(true).size()) {
                throw Error(ErrorCode::SchemaError, "line " + std::to_string(lineno) + ": unexpected column count");
            }
            continue;
        }
        std::vector<double> v;
        v.reserve(ncols);
        const char *p = line.c_str();
        while (*p) {
            char *end = nullptr;
            v.push_back(std::strtod(p, &end));
            if (end == p) break;
            p = end;
            if (*p == ',') ++p;
        }
        if (v.size() != ncols) {
            throw Error(ErrorCode::SchemaError, "line " + std::to_string(lineno) + ": expected " +
                                                    std::to_string(ncols) + " values");
        }
        LogRow r;
        std::size_t k = 0;
        r.t = v[k++];
        for (int i = 0; i < 3; ++i) r.base.r[i] = v[k++];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r.base.R(i, j) = v[k++];
        for (int i = 0; i < 3; ++i) r.base.v[i] = v[k++];
        for (int i = 0; i < 3; ++i) r.base.w[i] = v[k++];
        for (JointVector *jv : {&r.q, &r.qd, &r.tau})
            for (int j = 0; j < 16; ++j) (*jv)[j] = v[k++];
        for (Vec3 &f : r.grf)
            for (int i = 0; i < 3; ++i) f[i] = v[k++];
        for (bool &c : r.contact) c = v[k++] != 0;
        for (int j = 0; j < 16; ++j) r.power[j] = v[k++];
        r.mpc_tick = v[k++] != 0;
        r.mpc_iterations = static_cast<int>(v[k++]);
        r.mpc_residual = v[k++];
        r.mpc_status = static_cast<MpcStatus>(static_cast<int>(v[k++]));
        r.phase = v[k++];
        for (bool &c : r.scheduled) c = v[k++] != 0;
        for (int i = 0; i < 3; ++i) r.ref.r[i] = v[k++];
        r.ref.R = lie::rot_z(v[k++]);
        for (int i = 0; i < 3; ++i) r.ref.v[i] = v[k++];
        for (int i = 0; i < 3; ++i) r.ref.w[i] = v[k++];
        for (double &x : r.spine_target) x = v[k++];
        if (k < ncols) r.mpc_wall_time = v[k++];
        log.rows.push_back(r);
    }
    if (ncols == 0) {
        throw Error(ErrorCode::SchemaError, "log has no header");
    }
    return log;
}

} // namespace quadspine
