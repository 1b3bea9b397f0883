#pragma once

// Exhaustive grid search over spine strategy constants.

#include "quadspine/config.hpp"
#include "quadspine/metrics.hpp"
#include "quadspine/sim.hpp"
#include "quadspine/spine.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <limits>
#include <string>
#include <thread>
#include <vector>

namespace quadspine
{

/// One searched constant. `name` is "<joint>.c1".."<joint>.c4" or
/// "<joint>.frequency" with joint fy, fz, ry, rz, or "*" for all four joints.
struct GridAxis {
    std::string name;
    double min = 0;
    double max = 0;
    int steps = 1;

    double value(int i) const { return steps == 1 ? min : min + (max - min) * i / (steps - 1); }
};

struct ParamGrid {
    Strategy strategy = Strategy::TimeOpt;
    GaitId gait = GaitId::Walk;
    StrategyParams base;  // constants not on an axis
    std::vector<GridAxis> axes;
    std::size_t cap = 10000;

    std::size_t size() const {
        std::size_t n = 1;
        for (const GridAxis &a : axes) n *= static_cast<std::size_t>(std::max(a.steps, 0));
        return n;
    }
};

namespace detail
{
struct AxisTarget {
    std::vector<std::size_t> joints;
    int constant = -1;  // 0..3, or -1 for frequency
};

inline AxisTarget parse_axis(const std::string &n) {
    const auto dot = n.find('.');
    if (dot == std::string::npos) throw Error(ErrorCode::InvalidParams, "bad grid axis name '" + n + "'");
    const std::string joint = n.substr(0, dot), field = n.substr(dot + 1);
    AxisTarget t;
    for (SpineJoint sj : kAllSpineJoints) {
        if (joint == "*" || joint == name(sj)) t.joints.push_back(index(sj));
    }
    if (t.joints.empty()) throw Error(ErrorCode::InvalidParams, "unknown spine joint in grid axis '" + n + "'");
    if (field == "frequency") {
        t.constant = -1;
    } else if (field.size() == 2 && field[0] == 'c' && field[1] >= '1' && field[1] <= '4') {
        t.constant = field[1] - '1';
    } else {
        throw Error(ErrorCode::InvalidParams, "unknown constant in grid axis '" + n + "'");
    }
    return t;
}
} // namespace detail

inline void validate(const ParamGrid &g) {
    if (g.axes.empty()) throw Error(ErrorCode::InvalidParams, "grid has no axes");
    for (const GridAxis &a : g.axes) {
        detail::parse_axis(a.name);
        if (a.steps < 1 || !(a.min <= a.max)) {
            throw Error(ErrorCode::InvalidParams, "grid axis " + a.name + " needs steps >= 1 and min <= max");
        }
    }
    if (g.size() > g.cap) {
        throw Error(ErrorCode::InvalidParams,
                    "grid has " + std::to_string(g.size()) + " candidates, cap is " + std::to_string(g.cap));
    }
}

/// Lattice point `i` in row-major order (last axis fastest).
inline std::vector<double> grid_point(const ParamGrid &g, std::size_t i) {
    std::vector<double> v(g.axes.size());
    for (std::size_t a = g.axes.size(); a-- > 0;) {
        const auto s = static_cast<std::size_t>(g.axes[a].steps);
        v[a] = g.axes[a].value(static_cast<int>(i % s));
        i /= s;
    }
    return v;
}

inline StrategyParams apply_point(const ParamGrid &g, const std::vector<double> &values) {
    StrategyParams p = g.base;
    p.strategy = g.strategy;
    for (std::size_t a = 0; a < g.axes.size(); ++a) {
        const auto t = detail::parse_axis(g.axes[a].name);
        for (std::size_t j : t.joints) {
            if (t.constant < 0) {
                p.joints[j].frequency = values[a];
            } else {
                p.joints[j].c[static_cast<std::size_t>(t.constant)] = values[a];
            }
        }
    }
    return p;
}

struct Evaluation {
    double cost = 0;
    bool stable = true;
    double mean_speed = 0;
    std::string failure;
};

struct Candidate {
    std::vector<double> values;
    StrategyParams params;
    double cost = std::numeric_limits<double>::infinity();
    bool stable = false;
    double mean_speed = 0;
    std::string failure;
};

using Evaluator = std::function<Evaluation(const StrategyParams &)>;

/// Calls f(i) for i in [0, n) on `threads` workers (0: one per core). f must
/// not throw.
template <typename F>
inline void parallel_for(std::size_t n, unsigned threads, F &&f) {
    if (n == 0) return;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) f(i);
    };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto &t : pool) t.join();
}

/// run_episode + strategy_cost, averaged over the whole episode.
inline Evaluator episode_evaluator(const RobotModel &model, EpisodeConfig base, CostWeights weights,
                                   Window window = {true, 0.0}) {
    return [&model, base = std::move(base), weights, window](const StrategyParams &p) {
        EpisodeConfig cfg = base;
        cfg.strategy = p;
        const SimLog log = run_episode(model, cfg);
        Evaluation e;
        e.stable = log.stable;
        e.failure = log.failure;
        if (log.stable) {
            e.cost = strategy_cost(log, weights, window);
            e.mean_speed = mean_planar_speed(log, window);
        }
        return e;
    };
}

/// Evaluates every lattice point, in parallel over `threads` workers, and
/// returns candidates sorted by (stability, cost, parameter values). Failed
/// or unstable candidates carry +inf cost.
inline std::vector<Candidate> grid_search(const ParamGrid &grid, const Evaluator &eval, unsigned threads = 0) {
    validate(grid);
    std::vector<Candidate> out(grid.size());
    parallel_for(out.size(), threads, [&](std::size_t i) {
        Candidate &c = out[i];
        c.values = grid_point(grid, i);
        c.params = apply_point(grid, c.values);
        try {
            validate(c.params);
            const Evaluation e = eval(c.params);
            c.stable = e.stable && std::isfinite(e.cost);
            c.cost = c.stable ? e.cost : std::numeric_limits<double>::infinity();
            c.mean_speed = e.mean_speed;
            c.failure = e.failure;
        } catch (const std::exception &ex) {
            c.stable = false;
            c.cost = std::numeric_limits<double>::infinity();
            c.failure = ex.what();
        }
    });
    std::sort(out.begin(), out.end(), [](const Candidate &a, const Candidate &b) {
        if (a.stable != b.stable) return a.stable;
        if (a.cost != b.cost) return a.cost < b.cost;
        return a.values < b.values;
    });
    return out;
}

inline std::vector<Candidate> grid_search(const RobotModel &model, const ParamGrid &grid, const CostWeights &weights,
                                          const EpisodeConfig &base, unsigned threads = 0) {
    return grid_search(grid, episode_evaluator(model, base, weights), threads);
}

/// Preset file entry for a stable candidate.
inline json export_preset(const Candidate &c, Strategy strategy, GaitId gait, const std::string &note = {}) {
    if (!c.stable) {
        throw Error(ErrorCode::UnstableCandidate, "cannot export an unstable candidate");
    }
    Preset p;
    p.gait = gait;
    p.params = c.params;
    p.params.strategy = strategy;
    p.note = note;
    return to_json(p);
}

inline json to_json(const ParamGrid &g) {
    json j{{"strategy", std::string(to_string(g.strategy))}, {"gait", std::string(to_string(g.gait))}, {"cap", g.cap}};
    j["base"] = to_json(g.base);
    for (const GridAxis &a : g.axes) j["axes"].push_back({{"name", a.name}, {"min", a.min}, {"max", a.max}, {"steps", a.steps}});
    return j;
}

inline ParamGrid grid_from_json(const json &j) {
    return detail::guarded("grid", [&] {
        ParamGrid g;
        g.strategy = strategy_from_string(j.at("strategy").get<std::string>());
        g.gait = gait_from_string(j.at("gait").get<std::string>());
        if (j.contains("base")) {
            json b = j["base"];
            b["strategy"] = j["strategy"];
            g.base = strategy_from_json(b);
        } else {
            g.base.strategy = g.strategy;
            for (SpineJoint sj : kAllSpineJoints) g.base.joints[index(sj)].frequency = default_frequency(sj);
        }
        detail::get_if(j, "cap", g.cap);
        for (const json &a : j.at("axes")) {
            g.axes.push_back({a.at("name").get<std::string>(), a.at("min").get<double>(), a.at("max").get<double>(),
                              a.at("steps").get<int>()});
        }
        validate(g);
        return g;
    });
}

} // namespace quadspine
