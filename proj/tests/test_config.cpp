#include "quadspine/config.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace quadspine;

namespace
{
const fs::path kConfigs = fs::path(QUADSPINE_SOURCE_DIR) / "configs";

ErrorCode code_of(const std::function<void()> &f) {
    try {
        f();
    } catch (const Error &e) {
        return e.code();
    }
    ADD_FAILURE() << "no error";
    return ErrorCode::IoError;
}

fs::path scratch(const std::string &name) {
    const fs::path d = fs::temp_directory_path() / ("quadspine_config_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}
} // namespace

TEST(ModelConfig, ShippedFileMatchesBuiltIn) {
    EXPECT_EQ(to_json(load_model(kConfigs / "model.json")), to_json(default_model_params()));
}

TEST(ModelConfig, RoundTrip) {
    ModelParams p = default_model_params();
    p.nominal_height = 0.21;
    EXPECT_EQ(to_json(model_from_json(to_json(p))), to_json(p));
}

TEST(ModelConfig, MissingFileIsConfigError) {
    EXPECT_EQ(code_of([] { load_model(kConfigs / "absent.json"); }), ErrorCode::ConfigError);
}

TEST(GaitConfig, ShippedFileMatchesBuiltIn) {
    const auto gaits = load_gaits(kConfigs / "gaits.json");
    for (GaitId id : {GaitId::Walk, GaitId::Trot, GaitId::Turn}) {
        EXPECT_EQ(to_json(gaits.at(id)), to_json(named_gait(id))) << to_string(id);
    }
}

TEST(GaitConfig, PartialOverride) {
    const GaitSchedule g = gait_from_json(GaitId::Trot, json{{"t_stance", 0.25}});
    EXPECT_EQ(g.t_stance, 0.25);
    EXPECT_EQ(g.t_swing, named_gait(GaitId::Trot).t_swing);
    EXPECT_EQ(code_of([] { gait_from_json(GaitId::Walk, json{{"t_stance", -1.0}}); }), ErrorCode::ConfigError);
}

TEST(Presets, ShippedFileCoversEveryActiveStrategyAndGait) {
    const auto presets = load_presets(kConfigs / "presets.json");
    for (Strategy s : {Strategy::Stiffness, Strategy::FootTracking, Strategy::TimeReal, Strategy::TimeOpt}) {
        for (GaitId g : {GaitId::Walk, GaitId::Trot, GaitId::Turn}) {
            EXPECT_NO_THROW(find_preset(presets, s, g)) << to_string(s) << " " << to_string(g);
        }
    }
    EXPECT_EQ(find_preset(presets, Strategy::Fixed, GaitId::Walk).strategy, Strategy::Fixed);
}

TEST(Presets, RoundTripBitExact) {
    StrategyParams p = uniform_params(Strategy::TimeOpt, {0.1 + 0.2, 1.0 / 3.0, 10, 0.08});
    p.joints[1].frequency = 3;
    Preset pr{GaitId::Trot, p, "x"};
    const Preset back = preset_from_json(json::parse(to_json(pr).dump()));
    EXPECT_EQ(back.gait, GaitId::Trot);
    EXPECT_EQ(back.note, "x");
    for (std::size_t j = 0; j < 4; ++j) {
        EXPECT_EQ(back.params.joints[j].c, p.joints[j].c);
        EXPECT_EQ(back.params.joints[j].frequency, p.joints[j].frequency);
    }
}

TEST(Presets, LaterEntryWins) {
    json j{{"presets", json::array()}};
    for (double c1 : {1.0, 2.0}) {
        Preset p{GaitId::Walk, uniform_params(Strategy::Stiffness, {c1, 0, 10, 0.08}), ""};
        j["presets"].push_back(to_json(p));
    }
    EXPECT_EQ(find_preset(presets_from_json(j), Strategy::Stiffness, GaitId::Walk).joints[0].c[0], 2.0);
    EXPECT_EQ(code_of([&] { find_preset(presets_from_json(j), Strategy::TimeOpt, GaitId::Walk); }),
              ErrorCode::ConfigError);
    EXPECT_EQ(code_of([] { presets_from_json(json::object()); }), ErrorCode::ConfigError);
}

TEST(Experiment, DefaultsFollowGait) {
    const ExperimentConfig e = experiment_from_json(json{{"gait", "turn"}}, ".");
    EXPECT_EQ(e.command.target.v.x(), 0.3);
    EXPECT_EQ(e.command.target.yaw_rate, -0.5);
    EXPECT_EQ(e.command.lin_accel, 0.5);
    EXPECT_EQ(e.command.ang_accel, 1.0);
    EXPECT_EQ(default_command(GaitId::Trot).target.v.x(), 0.6);
}

TEST(Experiment, ShippedFilesResolve) {
    for (const auto &entry : fs::directory_iterator(kConfigs / "experiments")) {
        const ExperimentConfig e = load_experiment(entry.path());
        const ResolvedExperiment r = resolve(e);
        EXPECT_EQ(r.episode.strategy.strategy, e.strategy) << entry.path();
        EXPECT_EQ(r.episode.sim.duration, 10.0);
    }
}

TEST(Experiment, RelativePathsResolveAgainstTheFile) {
    const fs::path d = scratch("relative");
    fs::create_directories(d / "sub");
    fs::copy_file(kConfigs / "model.json", d / "m.json");
    std::ofstream(d / "sub" / "e.json") << R"({"model": "../m.json", "strategy": "fixed"})";
    const ExperimentConfig e = load_experiment(d / "sub" / "e.json");
    EXPECT_TRUE(fs::equivalent(e.model_path, d / "m.json"));
    EXPECT_NO_THROW(resolve(e));
}

TEST(Experiment, Errors) {
    const fs::path d = scratch("errors");
    std::ofstream(d / "missing.json") << R"({"model": "nope.json"})";
    EXPECT_EQ(code_of([&] { load_experiment(d / "missing.json"); }), ErrorCode::ConfigError);
    std::ofstream(d / "bad.json") << "{ not json";
    EXPECT_EQ(code_of([&] { load_experiment(d / "bad.json"); }), ErrorCode::ConfigError);
    EXPECT_EQ(code_of([] { experiment_from_json(json{{"command", {{"v", {1.0}}}}}, "."); }), ErrorCode::ConfigError);
    EXPECT_EQ(code_of([] { experiment_from_json(json{{"gait", "gallop"}}, "."); }), ErrorCode::ConfigError);
    EXPECT_EQ(code_of([] { resolve(experiment_from_json(json{{"strategy", "time_opt"}}, ".")); }),
              ErrorCode::ConfigError);
}

TEST(MpcSimConfig, RoundTrip) {
    MpcConfig m;
    m.horizon = 7;
    EXPECT_EQ(to_json(mpc_from_json(to_json(m))), to_json(m));
    SimConfig s;
    s.duration = 3.5;
    s.stand = true;
    EXPECT_EQ(to_json(sim_from_json(to_json(s))), to_json(s));
    EXPECT_EQ(code_of([] { sim_from_json(json{{"control_divisor", 0}}); }), ErrorCode::ConfigError);
}
