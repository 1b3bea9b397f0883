#pragma once

// Cost of transport, Hildebrand footfall grids, gait transition finder and
// the strategy cost used by the parameter search.

#include "quadspine/gait.hpp"
#include "quadspine/lie.hpp"
#include "quadspine/model.hpp"
#include "quadspine/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace quadspine
{

/// Averaging window over a log. By default the command ramp plus a settling
/// period is discarded; `full` averages every row.
struct Window {
    bool full = false;
    double settle = 1.0;  // s after the ramp ends
};

namespace detail
{
inline std::pair<std::size_t, std::size_t> window_rows(const SimLog &log, const Window &w) {
    std::size_t first = 0;
    if (!w.full) {
        const double start = log.ramp_end + w.settle;
        while (first < log.rows.size() && log.rows[first].t < start - 1e-9) {
            ++first;
        }
    }
    if (first >= log.rows.size()) {
        throw Error(ErrorCode::TooShort, "log has no rows in the averaging window");
    }
    return {first, log.rows.size()};
}
} // namespace detail

/// Mean summed electrical power (W) over the window, optionally without the
/// spine joints.
inline double mean_power(const SimLog &log, bool include_spine, const Window &w = {}) {
    const auto [a, b] = detail::window_rows(log, w);
    double legs = 0, spine = 0;
    for (std::size_t k = a; k < b; ++k) {
        const JointVector &p = log.rows[k].power;
        legs += p.tail<kNumJoints - kNumSpineJoints>().sum();
        spine += p.head<kNumSpineJoints>().sum();
    }
    // Summed separately so zero spine power leaves the result bitwise unchanged.
    return (include_spine ? legs + spine : legs) / static_cast<double>(b - a);
}

inline double mean_planar_speed(const SimLog &log, const Window &w = {}) {
    const auto [a, b] = detail::window_rows(log, w);
    double sum = 0;
    for (std::size_t k = a; k < b; ++k) {
        sum += log.rows[k].base.v.head<2>().norm();
    }
    return sum / static_cast<double>(b - a);
}

/// P / (m g v) with the mean power and mean planar speed over the window.
inline double cost_of_transport(const SimLog &log, bool include_spine, const Window &w = {},
                                double gravity = 9.81) {
    const double v = mean_planar_speed(log, w);
    if (v <= 0.01) {
        throw Error(ErrorCode::ZeroVelocity, "mean speed " + std::to_string(v) + " m/s is too small for CoT");
    }
    return mean_power(log, include_spine, w) / (log.mass * gravity * v);
}

// Hildebrand grids -------------------------------------------------------------

/// Mean stance fraction per (leg, phase bin), values in [0, 1].
using HildebrandGrid = Eigen::Matrix<double, 4, Eigen::Dynamic>;

struct HildebrandResult {
    HildebrandGrid grid;
    ContactGrid reference;
    int cycles = 0;
};

/// Averages the logged contact flags per phase bin over every complete gait
/// cycle in the log. Cycles are delimited by wraps of the gait phase.
inline HildebrandResult hildebrand(const SimLog &log, int n_bins, const GaitSchedule &g) {
    if (n_bins < 8) {
        throw Error(ErrorCode::InvalidParams, "Hildebrand grids need at least 8 bins");
    }
    std::vector<std::size_t> starts;
    double prev = 0;
    for (std::size_t k = 0; k < log.rows.size(); ++k) {
        const double phi = cpg_phase(log.rows[k].t, g);
        if ((k == 0 && phi == 0.0) || (k > 0 && phi < prev)) {
            starts.push_back(k);
        }
        prev = phi;
    }
    if (starts.size() < 3) {
        throw Error(ErrorCode::TooShort, "log covers fewer than 2 complete gait cycles");
    }
    HildebrandResult out;
    out.cycles = static_cast<int>(starts.size()) - 1;
    Eigen::Matrix<double, 4, Eigen::Dynamic> sum = Eigen::Matrix<double, 4, Eigen::Dynamic>::Zero(4, n_bins);
    Eigen::RowVectorXd count = Eigen::RowVectorXd::Zero(n_bins);
    for (std::size_t k = starts.front(); k < starts.back(); ++k) {
        const double phi = cpg_phase(log.rows[k].t, g);
        const int bin = std::min(n_bins - 1, static_cast<int>(std::floor(phi * n_bins)));
        for (Leg leg : kAllLegs) {
            sum(static_cast<Eigen::Index>(index(leg)), bin) += log.rows[k].contact[index(leg)] ? 1.0 : 0.0;
        }
        count[bin] += 1.0;
    }
    out.grid.resize(4, n_bins);
    for (int b = 0; b < n_bins; ++b) {
        if (count[b] == 0) {
            throw Error(ErrorCode::TooShort, "phase bin " + std::to_string(b) + " has no samples");
        }
        out.grid.col(b) = sum.col(b) / count[b];
    }
    out.reference = footfall_reference(g, n_bins);
    return out;
}

/// Mean absolute difference between a measured grid and a reference pattern.
inline double footfall_consistency(const HildebrandGrid &grid, const ContactGrid &reference) {
    if (grid.rows() != reference.rows() || grid.cols() != reference.cols() || grid.size() == 0) {
        throw Error(ErrorCode::InvalidParams, "grid shapes differ");
    }
    return (grid - reference.cast<double>()).cwiseAbs().mean();
}

/// Binary PGM (P5), one pixel per cell, black = full stance.
inline void write_pgm(std::ostream &os, const HildebrandGrid &grid) {
    os << "P5\n" << grid.cols() << ' ' << grid.rows() << "\n255\n";
    for (Eigen::Index r = 0; r < grid.rows(); ++r) {
        for (Eigen::Index c = 0; c < grid.cols(); ++c) {
            const double v = std::clamp(grid(r, c), 0.0, 1.0);
            os.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * (1.0 - v)))));
        }
    }
}

inline void write_svg(std::ostream &os, const HildebrandGrid &grid, double cell = 12.0) {
    const double w = cell * static_cast<double>(grid.cols()), h = cell * static_cast<double>(grid.rows());
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    for (Eigen::Index r = 0; r < grid.rows(); ++r) {
        for (Eigen::Index c = 0; c < grid.cols(); ++c) {
            const long shade = std::lround(255.0 * (1.0 - std::clamp(grid(r, c), 0.0, 1.0)));
            os << "  <rect x=\"" << cell * static_cast<double>(c) << "\" y=\"" << cell * static_cast<double>(r)
               << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\"rgb(" << shade << ',' << shade
               << ',' << shade << ")\"/>\n";
        }
    }
    os << "</svg>\n";
}

// Gait transition ---------------------------------------------------------------

struct CotPoint {
    double velocity = 0;
    double cot = 0;
    double cot_no_spine = 0;
    bool stable = true;
};

struct CotCurve {
    std::vector<CotPoint> points;
};

inline void validate(const CotCurve &c) {
    if (c.points.size() < 2) {
        throw Error(ErrorCode::InvalidParams, "CoT curve needs at least two points");
    }
    for (std::size_t i = 0; i < c.points.size(); ++i) {
        if (!std::isfinite(c.points[i].cot) || (i > 0 && !(c.points[i].velocity > c.points[i - 1].velocity))) {
            throw Error(ErrorCode::InvalidParams, "CoT curve velocities must be strictly increasing");
        }
    }
}

/// The curve restricted to its stable points.
inline CotCurve stable_only(const CotCurve &c) {
    CotCurve out;
    std::copy_if(c.points.begin(), c.points.end(), std::back_inserter(out.points),
                 [](const CotPoint &p) { return p.stable; });
    return out;
}

/// Piecewise-linear interpolation of a curve at v (inside its range).
inline double interpolate(const CotCurve &c, double v) {
    const auto &p = c.points;
    auto it = std::upper_bound(p.begin(), p.end(), v,
                               [](double x, const CotPoint &q) { return x < q.velocity; });
    if (it == p.begin()) return p.front().cot;
    if (it == p.end()) return p.back().cot;
    const CotPoint &b = *it;
    const CotPoint &a = *(it - 1);
    const double s = (v - a.velocity) / (b.velocity - a.velocity);
    return a.cot + s * (b.cot - a.cot);
}

struct TransitionResult {
    std::vector<double> crossings;
    bool multiple() const { return crossings.size() > 1; }
};

/// Every velocity in the overlap where walking and trotting CoT cross, each
/// located by bisection on the interpolated difference.
inline TransitionResult gait_transitions(const CotCurve &walk, const CotCurve &trot, double tol = 1e-4) {
    validate(walk);
    validate(trot);
    const double lo = std::max(walk.points.front().velocity, trot.points.front().velocity);
    const double hi = std::min(walk.points.back().velocity, trot.points.back().velocity);
    if (!(hi > lo)) {
        throw Error(ErrorCode::NoCrossing, "CoT curves do not overlap in velocity");
    }
    std::vector<double> knots{lo, hi};
    for (const CotCurve *c : {&walk, &trot}) {
        for (const CotPoint &p : c->points) {
            if (p.velocity > lo && p.velocity < hi) knots.push_back(p.velocity);
        }
    }
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
    auto diff = [&](double v) { return interpolate(walk, v) - interpolate(trot, v); };

    TransitionResult out;
    int prev_sign = 0;
    double prev_v = lo;
    for (double v : knots) {
        const double d = diff(v);
        const int sign = (d > 0) - (d < 0);
        if (sign == 0) {
            continue;
        }
        if (prev_sign != 0 && sign != prev_sign) {
            double a = prev_v, b = v;
            const double da = diff(a);
            while (b - a > tol) {
                const double m = 0.5 * (a + b);
                const double dm = diff(m);
                if (dm == 0) {
                    a = b = m;
                    break;
                }
                if ((dm > 0) == (da > 0)) {
                    a = m;
                } else {
                    b = m;
                }
            }
            out.crossings.push_back(0.5 * (a + b));
        }
        prev_sign = sign;
        prev_v = v;
    }
    return out;
}

/// Single walk-to-trot transition velocity.
inline double gait_transition(const CotCurve &walk, const CotCurve &trot, double tol = 1e-4) {
    const TransitionResult r = gait_transitions(walk, trot, tol);
    if (r.crossings.empty()) {
        throw Error(ErrorCode::NoCrossing, "walk and trot CoT curves never cross");
    }
    if (r.multiple()) {
        std::ostringstream msg;
        msg << "CoT curves cross " << r.crossings.size() << " times at";
        for (double v : r.crossings) msg << ' ' << v;
        throw Error(ErrorCode::MultipleCrossings, msg.str());
    }
    return r.crossings.front();
}

inline void write_cot_csv(std::ostream &os, const CotCurve &c) {
    os << "velocity,cot,cot_no_spine,stable\n";
    char buf[128];
    for (const CotPoint &p : c.points) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%d\n", p.velocity, p.cot, p.cot_no_spine,
                      p.stable ? 1 : 0);
        os << buf;
    }
}

inline CotCurve read_cot_csv(std::istream &is) {
    CotCurve c;
    std::string line;
    if (!std::getline(is, line)) {
        throw Error(ErrorCode::SchemaError, "empty CoT curve file");
    }
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        CotPoint p;
        int stable = 1;
        const int n = std::sscanf(line.c_str(), "%lf,%lf,%lf,%d", &p.velocity, &p.cot, &p.cot_no_spine, &stable);
        if (n < 2) {
            throw Error(ErrorCode::SchemaError, "line " + std::to_string(lineno) + ": expected velocity,cot");
        }
        if (n < 3) p.cot_no_spine = p.cot;
        p.stable = stable != 0;
        c.points.push_back(p);
    }
    return c;
}

// Strategy cost -----------------------------------------------------------------

/// W1..W11 of the parameter-search cost.
struct CostWeights {
    std::array<double, 11> w{50, 50, 50, 10, 4, 4, 0.1, 1.0 / 800.0, 10, 0, 0.002};

    bool operator==(const CostWeights &) const = default;
};

/// Published weight rows: stiffness rewards range of motion instead of
/// penalising target error.
inline CostWeights default_weights(Strategy s) {
    CostWeights c;
    if (s == Strategy::Stiffness) {
        c.w[8] = 0;
        c.w[9] = -2;
    }
    return c;
}

/// The eleven unweighted terms; the cost is their dot product with W.
struct CostTerms {
    std::array<double, 11> t{};

    double weighted(const CostWeights &w) const {
        double c = 0;
        for (std::size_t i = 0; i < 11; ++i) c += w.w[i] * t[i];
        return c;
    }
};

inline CostTerms strategy_cost_terms(const SimLog &log, const Window &win = {}) {
    const auto [a, b] = detail::window_rows(log, win);
    const double n = static_cast<double>(b - a);
    CostTerms out;
    auto &t = out.t;
    LegMap<double> fsum{}, fsq{}, fmax{};
    SpineMap<double> emean{}, qmin{}, qmax{};
    qmin.fill(std::numeric_limits<double>::infinity());
    qmax.fill(-std::numeric_limits<double>::infinity());
    double power = 0;
    for (std::size_t k = a; k < b; ++k) {
        const LogRow &row = log.rows[k];
        t[0] += (row.ref.r - row.base.r).norm();
        t[1] += lie::log_so3(row.base.R * row.ref.R.transpose()).norm();
        t[2] += (row.ref.v - row.base.v).norm();
        t[3] += (row.ref.w - row.base.w).norm();
        for (Leg leg : kAllLegs) {
            const double f = row.grf[index(leg)].norm();
            fsum[index(leg)] += f;
            fsq[index(leg)] += f * f;
            fmax[index(leg)] = std::max(fmax[index(leg)], f);
        }
        for (SpineJoint sj : kAllSpineJoints) {
            const double q = row.q[static_cast<Eigen::Index>(joint_index(sj))];
            emean[index(sj)] += std::abs(row.spine_target[index(sj)] - q);
            qmin[index(sj)] = std::min(qmin[index(sj)], q);
            qmax[index(sj)] = std::max(qmax[index(sj)], q);
        }
        power += row.power.head<kNumSpineJoints>().sum();
    }
    for (int i = 0; i < 4; ++i) t[static_cast<std::size_t>(i)] /= n;
    for (Leg leg : kAllLegs) {
        const std::size_t i = index(leg);
        const double mean = fsum[i] / n;
        const double sigma = std::sqrt(std::max(0.0, fsq[i] / n - mean * mean));
        t[4] += sigma;
        t[5] += sigma;
        t[6] += mean;
        t[7] += fmax[i];
    }
    for (SpineJoint sj : kAllSpineJoints) {
        const std::size_t i = index(sj);
        t[8] += emean[i] / n;
        t[9] += qmax[i] - qmin[i];
    }
    t[10] = power / n;
    return out;
}

inline double strategy_cost(const SimLog &log, const CostWeights &w, const Window &win = {}) {
    return strategy_cost_terms(log, win).weighted(w);
}

} // namespace quadspine
