#include "quadspine/optimize.hpp"

#include <gtest/gtest.h>

#include <mutex>
#include <set>

using namespace quadspine;

namespace
{
ParamGrid grid_2d(int n1, int n2) {
    ParamGrid g;
    g.strategy = Strategy::TimeOpt;
    g.gait = GaitId::Walk;
    g.base = uniform_params(Strategy::TimeOpt, {0.08, 0.5, 10, 0.08});
    g.axes = {{"*.c1", 0.0, 0.1, n1}, {"*.c2", 0.0, 2.0, n2}};
    return g;
}

// Convex bowl with its minimum at lattice point (0.05, 1.0).
Evaluation bowl(const StrategyParams &p) {
    const double a = p.joints[0].c[0] - 0.05, b = p.joints[0].c[1] - 1.0;
    return {100 * a * a + b * b, true, 0.3, ""};
}
} // namespace

TEST(GridSearch, SinglePointMatchesDirectEpisode) {
    const RobotModel model(default_model_params());
    ParamGrid g;
    g.strategy = Strategy::TimeOpt;
    g.gait = GaitId::Walk;
    g.base = uniform_params(Strategy::TimeOpt, {0.08, 0.5, 10, 0.08});
    g.axes = {{"*.c1", 0.08, 0.08, 1}};
    EpisodeConfig base;
    base.gait = named_gait(GaitId::Walk);
    base.command = default_command(GaitId::Walk);
    base.sim.duration = 3.0;
    const CostWeights w = default_weights(Strategy::TimeOpt);
    const auto out = grid_search(model, g, w, base, 1);
    ASSERT_EQ(out.size(), 1u);
    ASSERT_TRUE(out[0].stable) << out[0].failure;
    EpisodeConfig direct = base;
    direct.strategy = g.base;
    EXPECT_EQ(out[0].cost, strategy_cost(run_episode(model, direct), w, Window{true, 0.0}));
}

TEST(GridSearch, FailuresRankLastWithInfiniteCost) {
    ParamGrid g = grid_2d(2, 1);
    const auto out = grid_search(g, [](const StrategyParams &p) {
        if (p.joints[0].c[0] > 0.05) throw Error(ErrorCode::NumericalDivergence, "diverged");
        return Evaluation{1.0, true, 0.3, ""};
    });
    ASSERT_EQ(out.size(), 2u);
    EXPECT_TRUE(out[0].stable);
    EXPECT_FALSE(out[1].stable);
    EXPECT_EQ(out[1].cost, std::numeric_limits<double>::infinity());
    EXPECT_NE(out[1].failure.find("diverged"), std::string::npos);
}

TEST(GridSearch, UnstableEpisodeRanksLast) {
    ParamGrid g = grid_2d(3, 1);
    const auto out = grid_search(g, [](const StrategyParams &p) {
        return Evaluation{-p.joints[0].c[0], p.joints[0].c[0] < 0.09, 0.0, ""};
    });
    EXPECT_EQ(out.back().values[0], 0.1);
    EXPECT_FALSE(out.back().stable);
    EXPECT_EQ(out[0].values[0], 0.05);
}

TEST(GridSearch, FindsMockMinimiser) {
    const auto out = grid_search(grid_2d(3, 3), bowl, 4);
    ASSERT_EQ(out.size(), 9u);
    EXPECT_EQ(out[0].values, (std::vector<double>{0.05, 1.0}));
    EXPECT_EQ(out[0].cost, 0.0);
    for (std::size_t i = 1; i < out.size(); ++i) EXPECT_LE(out[i - 1].cost, out[i].cost);
}

TEST(GridSearch, EvaluatesEveryLatticePointOnce) {
    const ParamGrid g = grid_2d(4, 5);
    std::mutex m;
    std::multiset<std::pair<double, double>> seen;
    const auto out = grid_search(
        g,
        [&](const StrategyParams &p) {
            std::lock_guard lock(m);
            seen.insert({p.joints[0].c[0], p.joints[3].c[1]});
            return Evaluation{0.0, true, 0.0, ""};
        },
        3);
    EXPECT_EQ(seen.size(), 20u);
    for (const auto &v : seen) EXPECT_EQ(seen.count(v), 1u);
    std::set<std::vector<double>> values;
    for (const Candidate &c : out) values.insert(c.values);
    EXPECT_EQ(values.size(), 20u);
}

TEST(GridSearch, TiesBreakLexicographically) {
    const auto out = grid_search(grid_2d(3, 2), [](const StrategyParams &) { return Evaluation{1.0, true, 0.0, ""}; }, 4);
    for (std::size_t i = 1; i < out.size(); ++i) EXPECT_LT(out[i - 1].values, out[i].values);
}

TEST(GridSearch, DeterministicAcrossThreadCounts) {
    const auto a = grid_search(grid_2d(5, 4), bowl, 1);
    const auto b = grid_search(grid_2d(5, 4), bowl, 8);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].values, b[i].values);
        EXPECT_EQ(a[i].cost, b[i].cost);
    }
}

TEST(GridSearch, AxisTargets) {
    ParamGrid g = grid_2d(1, 1);
    g.axes = {{"fz.c3", 7, 7, 1}, {"ry.frequency", 3, 3, 1}};
    const StrategyParams p = apply_point(g, grid_point(g, 0));
    EXPECT_EQ(p.joints[index(SpineJoint::FrontYaw)].c[2], 7.0);
    EXPECT_EQ(p.joints[index(SpineJoint::FrontPitch)].c[2], 10.0);
    EXPECT_EQ(p.joints[index(SpineJoint::RearPitch)].frequency, 3.0);
}

TEST(GridValidation, Errors) {
    auto bad = [](ParamGrid g) {
        try {
            validate(g);
        } catch (const Error &e) {
            return e.code() == ErrorCode::InvalidParams;
        }
        return false;
    };
    ParamGrid g = grid_2d(3, 3);
    g.cap = 8;
    EXPECT_TRUE(bad(g));
    EXPECT_TRUE(bad(grid_2d(0, 3)));
    ParamGrid inverted = grid_2d(2, 2);
    inverted.axes[0].min = 1.0;
    EXPECT_TRUE(bad(inverted));
    ParamGrid unknown = grid_2d(2, 2);
    unknown.axes[0].name = "tail.c1";
    EXPECT_TRUE(bad(unknown));
    unknown.axes[0].name = "fy.c5";
    EXPECT_TRUE(bad(unknown));
}

TEST(GridJson, RoundTrip) {
    const ParamGrid g = grid_2d(3, 4);
    const ParamGrid back = grid_from_json(json::parse(to_json(g).dump()));
    EXPECT_EQ(back.size(), 12u);
    EXPECT_EQ(back.axes[1].name, "*.c2");
    EXPECT_EQ(back.base.joints[2].c, g.base.joints[2].c);
    const ParamGrid shipped = grid_from_json(
        detail::read_json(fs::path(QUADSPINE_SOURCE_DIR) / "configs" / "optimize_time_opt_walk.json"));
    EXPECT_EQ(shipped.strategy, Strategy::TimeOpt);
}

TEST(ExportPreset, RoundTripsThroughLoader) {
    const auto out = grid_search(grid_2d(3, 3), bowl, 2);
    const json j{{"presets", {export_preset(out[0], Strategy::TimeOpt, GaitId::Walk, "best")}}};
    const StrategyParams p = find_preset(presets_from_json(json::parse(j.dump())), Strategy::TimeOpt, GaitId::Walk);
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_EQ(p.joints[k].c, out[0].params.joints[k].c);
        EXPECT_EQ(p.joints[k].frequency, out[0].params.joints[k].frequency);
    }
}

TEST(ExportPreset, UnstableRejected) {
    Candidate c;
    try {
        export_preset(c, Strategy::TimeOpt, GaitId::Walk);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::UnstableCandidate);
    }
}

TEST(ExportPreset, ExportedPresetRuns) {
    const RobotModel model(default_model_params());
    const auto out = grid_search(grid_2d(3, 3), bowl, 2);
    const Preset p = preset_from_json(export_preset(out[0], Strategy::TimeOpt, GaitId::Walk));
    EpisodeConfig cfg;
    cfg.gait = named_gait(GaitId::Walk);
    cfg.command = default_command(GaitId::Walk);
    cfg.strategy = p.params;
    cfg.sim.duration = 3.0;
    const SimLog log = run_episode(model, cfg);
    EXPECT_TRUE(log.stable) << log.failure;
}
