// quadspine: run episodes, sweep CoT curves, find gait transitions, render
// Hildebrand grids, grid-search spine constants and score vote files.

#include "quadspine/quadspine.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

using namespace quadspine;

namespace
{
enum Exit : int {
    kOk = 0,
    kInternal = 1,
    kUsage = 2,
    kConfig = 3,
    kIo = 4,
    kInput = 5,
    kAnalysis = 6,
    kUnstable = 7,
    kNumerical = 8,
};

int exit_code(ErrorCode c) {
    switch (c) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidParams: return kConfig;
    case ErrorCode::IoError: return kIo;
    case ErrorCode::SchemaError:
    case ErrorCode::EmptyInput:
    case ErrorCode::BaselineMissing:
    case ErrorCode::TooShort: return kInput;
    case ErrorCode::NoCrossing:
    case ErrorCode::MultipleCrossings:
    case ErrorCode::ZeroVelocity: return kAnalysis;
    case ErrorCode::UnstableCandidate: return kUnstable;
    default: return kNumerical;
    }
}

/// Output directories resolve under $QUADSPINE_OUTPUT_ROOT when it is set.
fs::path output_path(const fs::path &dir) {
    if (dir.is_absolute()) return dir;
    const char *root = std::getenv("QUADSPINE_OUTPUT_ROOT");
    return root && *root ? fs::path(root) / dir : dir;
}

/// Files are collected in memory and written together once a command has
/// succeeded, so a failing command leaves nothing behind.
class Outputs {
  public:
    explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

    std::ostream &file(const std::string &name) {
        files_.emplace_back(name, std::make_unique<std::ostringstream>());
        return *files_.back().second;
    }

    void commit() const {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir_.string() + ": " + ec.message());
        for (const auto &[name, content] : files_) {
            const fs::path p = dir_ / name;
            fs::create_directories(p.parent_path(), ec);
            std::ofstream out(p, std::ios::binary);
            out << content->str();
            if (!out) throw Error(ErrorCode::IoError, "cannot write " + p.string());
        }
    }

    const fs::path &dir() const { return dir_; }

  private:
    fs::path dir_;
    std::vector<std::pair<std::string, std::unique_ptr<std::ostringstream>>> files_;
};

template <typename F>
json metric_or_null(F &&f) {
    try {
        return f();
    } catch (const Error &) {
        return nullptr;
    }
}

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// simulate -----------------------------------------------------------------------

struct SimulateArgs {
    std::string config;
    std::optional<std::string> gait, strategy, output_dir;
    std::optional<double> duration, vx, vy, yaw_rate;
    std::optional<std::uint64_t> seed;
    bool timing = false;
};

json experiment_json(const SimulateArgs &a) {
    json j = detail::read_json(a.config);
    if (a.gait) j["gait"] = *a.gait;
    if (a.strategy) j["strategy"] = *a.strategy;
    if (a.output_dir) j["output_dir"] = *a.output_dir;
    if (a.duration) j["duration"] = *a.duration;
    if (a.seed) j["seed"] = *a.seed;
    if (a.vx || a.vy) {
        const GaitId g = gait_from_string(j.value("gait", std::string("walk")));
        const CommandProfile def = default_command(g);
        j["command"]["v"] = {a.vx.value_or(def.target.v.x()), a.vy.value_or(def.target.v.y())};
    }
    if (a.yaw_rate) j["command"]["yaw_rate"] = *a.yaw_rate;
    return j;
}

json episode_summary(const SimLog &log, const ExperimentConfig &e) {
    json s{{"gait", std::string(to_string(e.gait))},
           {"strategy", std::string(to_string(e.strategy))},
           {"command", {{"v", {e.command.target.v.x(), e.command.target.v.y()}}, {"yaw_rate", e.command.target.yaw_rate}}},
           {"seed", e.seed},
           {"stable", log.stable},
           {"failure", log.failure},
           {"duration", log.duration()},
           {"rows", log.rows.size()}};
    if (!log.rows.empty()) {
        s["mean_speed"] = metric_or_null([&] { return mean_planar_speed(log); });
        s["mean_power"] = metric_or_null([&] { return mean_power(log, true); });
        s["cot"] = metric_or_null([&] { return cost_of_transport(log, true); });
        s["cot_no_spine"] = metric_or_null([&] { return cost_of_transport(log, false); });
        s["footfall_consistency"] = metric_or_null([&] {
            const HildebrandResult h = hildebrand(log, 20, log.gait);
            return footfall_consistency(h.grid, h.reference);
        });
        s["strategy_cost"] = metric_or_null([&] { return strategy_cost(log, default_weights(e.strategy)); });
    }
    return s;
}

int cmd_simulate(const SimulateArgs &a) {
    const ExperimentConfig e = experiment_from_json(experiment_json(a), fs::path(a.config).parent_path());
    const ResolvedExperiment r = resolve(e);
    const RobotModel model(r.model);
    const SimLog log = run_episode(model, r.episode);
    Outputs out(output_path(e.output_dir));
    write_log_csv(out.file("log.csv"), log, a.timing);
    out.file("summary.json") << episode_summary(log, e).dump(2) << '\n';
    out.commit();
    std::cout << (log.stable ? "stable" : "unstable: " + log.failure) << ", outputs in " << out.dir().string() << '\n';
    return log.stable ? kOk : kUnstable;
}

// sweep --------------------------------------------------------------------------

struct SweepArgs {
    std::string config;
    std::optional<std::string> output_dir;
    std::optional<double> vmin, vmax, duration;
    std::optional<int> steps;
    std::vector<std::string> strategies;
    unsigned threads = 0;
};

json transition_entry(const CotCurve &walk, const CotCurve &trot) {
    try {
        return {{"velocity", gait_transition(stable_only(walk), stable_only(trot))}};
    } catch (const Error &err) {
        return {{"velocity", nullptr}, {"error", std::string(to_string(err.code()))}, {"message", err.what()}};
    }
}

CotCurve spine_excluded(CotCurve c) {
    for (CotPoint &p : c.points) p.cot = p.cot_no_spine;
    return c;
}

int cmd_sweep(const SweepArgs &a) {
    json j = detail::read_json(a.config);
    const fs::path base = fs::path(a.config).parent_path();
    if (a.output_dir) j["output_dir"] = *a.output_dir;
    if (a.duration) j["duration"] = *a.duration;
    if (a.vmin) j["sweep"]["velocities"]["min"] = *a.vmin;
    if (a.vmax) j["sweep"]["velocities"]["max"] = *a.vmax;
    if (a.steps) j["sweep"]["velocities"]["steps"] = *a.steps;
    if (!a.strategies.empty()) j["sweep"]["strategies"] = a.strategies;

    struct Job {
        GaitId gait;
        Strategy strategy;
        double v;
        ResolvedExperiment r;
        CotPoint point;
    };
    std::vector<GaitId> gaits;
    std::vector<Strategy> strategies;
    std::vector<double> velocities;
    fs::path out_dir;
    std::vector<Job> jobs;
    detail::guarded("sweep", [&] {
        const json &axes = j.at("sweep");
        for (const auto &g : axes.at("gaits")) gaits.push_back(gait_from_string(g.get<std::string>()));
        for (const auto &s : axes.at("strategies")) strategies.push_back(strategy_from_string(s.get<std::string>()));
        const json &vs = axes.at("velocities");
        const double lo = vs.at("min").get<double>(), hi = vs.at("max").get<double>();
        const int n = vs.at("steps").get<int>();
        if (n < 1 || !(lo > 0) || !(hi >= lo)) {
            throw Error(ErrorCode::ConfigError, "sweep velocities need 0 < min <= max and steps >= 1");
        }
        for (int i = 0; i < n; ++i) velocities.push_back(n == 1 ? lo : lo + (hi - lo) * i / (n - 1));
        out_dir = j.value("output_dir", std::string("sweep"));
        for (GaitId g : gaits) {
            for (Strategy s : strategies) {
                json ej = j;
                ej.erase("sweep");
                ej["gait"] = std::string(to_string(g));
                ej["strategy"] = std::string(to_string(s));
                const ExperimentConfig base_cfg = experiment_from_json(ej, base);
                const ResolvedExperiment r = resolve(base_cfg);
                for (double v : velocities) {
                    Job job{g, s, v, r, {}};
                    job.r.episode.command.target.v = Vec3(v, 0, 0);
                    jobs.push_back(std::move(job));
                }
            }
        }
        return 0;
    });

    const RobotModel model(jobs.empty() ? default_model_params() : jobs.front().r.model);
    parallel_for(jobs.size(), a.threads, [&](std::size_t i) {
        Job &job = jobs[i];
        CotPoint &p = job.point;
        p.velocity = job.v;
        p.cot = p.cot_no_spine = std::numeric_limits<double>::quiet_NaN();
        try {
            const SimLog log = run_episode(model, job.r.episode);
            p.stable = log.stable;
            if (log.stable) {
                p.cot = cost_of_transport(log, true);
                p.cot_no_spine = cost_of_transport(log, false);
            }
        } catch (const std::exception &) {
            p.stable = false;
        }
    });

    std::map<std::pair<GaitId, Strategy>, CotCurve> curves;
    for (const Job &job : jobs) curves[{job.gait, job.strategy}].points.push_back(job.point);
    Outputs out(output_path(out_dir));
    int unstable = 0;
    for (const auto &[key, c] : curves) {
        write_cot_csv(out.file("cot/" + std::string(to_string(key.second)) + "_" + std::string(to_string(key.first)) + ".csv"), c);
        for (const CotPoint &p : c.points) unstable += !p.stable;
    }
    const bool pair = std::count(gaits.begin(), gaits.end(), GaitId::Walk) && std::count(gaits.begin(), gaits.end(), GaitId::Trot);
    if (pair) {
        json t;
        for (Strategy s : strategies) {
            const CotCurve &w = curves.at({GaitId::Walk, s}), &tr = curves.at({GaitId::Trot, s});
            t[std::string(to_string(s))] = {{"with_spine", transition_entry(w, tr)},
                                            {"without_spine", transition_entry(spine_excluded(w), spine_excluded(tr))}};
        }
        out.file("transitions.json") << t.dump(2) << '\n';
    }
    out.commit();
    std::cout << jobs.size() << " episodes, " << unstable << " unstable, outputs in " << out.dir().string() << '\n';
    return kOk;
}

// transition ---------------------------------------------------------------------

CotCurve read_curve(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    return read_cot_csv(in);
}

int cmd_transition(const std::string &walk_path, const std::string &trot_path, bool exclude_spine,
                   const std::optional<std::string> &output_dir) {
    CotCurve walk = stable_only(read_curve(walk_path)), trot = stable_only(read_curve(trot_path));
    if (exclude_spine) {
        walk = spine_excluded(walk);
        trot = spine_excluded(trot);
    }
    const double v = gait_transition(walk, trot);
    std::cout << fmt(v) << '\n';
    if (output_dir) {
        Outputs out(output_path(*output_dir));
        out.file("transition.json") << json{{"velocity", v}, {"walk", walk_path}, {"trot", trot_path},
                                             {"spine_power", !exclude_spine}}.dump(2)
                                    << '\n';
        out.commit();
    }
    return kOk;
}

// hildebrand ---------------------------------------------------------------------

int cmd_hildebrand(const std::string &log_path, int bins, const std::string &output_dir) {
    std::ifstream in(log_path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + log_path);
    const SimLog log = read_log_csv(in);
    const HildebrandResult h = hildebrand(log, bins, log.gait);
    Outputs out(output_path(output_dir));
    auto grid_csv = [&](std::ostream &os, auto cell) {
        os << "leg";
        for (int b = 0; b < bins; ++b) os << ",bin" << b;
        os << '\n';
        for (Leg leg : kAllLegs) {
            os << name(leg);
            for (int b = 0; b < bins; ++b) os << ',' << cell(static_cast<Eigen::Index>(index(leg)), b);
            os << '\n';
        }
    };
    grid_csv(out.file("hildebrand.csv"), [&](Eigen::Index l, int b) { return fmt(h.grid(l, b)); });
    grid_csv(out.file("reference.csv"), [&](Eigen::Index l, int b) { return h.reference(l, b) ? 1 : 0; });
    write_pgm(out.file("hildebrand.pgm"), h.grid);
    write_svg(out.file("hildebrand.svg"), h.grid);
    write_pgm(out.file("reference.pgm"), h.reference.cast<double>());
    const double consistency = footfall_consistency(h.grid, h.reference);
    out.file("hildebrand.json") << json{{"bins", bins}, {"cycles", h.cycles}, {"consistency", consistency},
                                         {"gait", std::string(to_string(log.gait.id))}}.dump(2)
                                << '\n';
    out.commit();
    std::cout << h.cycles << " cycles, consistency " << fmt(consistency) << '\n';
    return kOk;
}

// optimize -----------------------------------------------------------------------

struct OptimizeArgs {
    std::string grid;
    std::optional<std::string> experiment, output_dir;
    std::optional<double> duration;
    unsigned threads = 0;
    int top = 5;
};

int cmd_optimize(const OptimizeArgs &a) {
    const json gj = detail::read_json(a.grid);
    const ParamGrid grid = detail::guarded("grid", [&] {
        try {
            return grid_from_json(gj);
        } catch (const Error &e) {
            throw Error(ErrorCode::ConfigError, e.what());
        }
    });
    CostWeights weights = default_weights(grid.strategy);
    if (gj.contains("weights")) {
        detail::guarded("weights", [&] {
            const auto w = gj["weights"].get<std::vector<double>>();
            if (w.size() != weights.w.size()) throw Error(ErrorCode::ConfigError, "weights need 11 values");
            std::copy(w.begin(), w.end(), weights.w.begin());
            return 0;
        });
    }
    json ej = a.experiment ? detail::read_json(*a.experiment) : json::object();
    const fs::path base = a.experiment ? fs::path(*a.experiment).parent_path() : fs::path(a.grid).parent_path();
    ej["gait"] = std::string(to_string(grid.gait));
    ej["strategy"] = "fixed";
    if (a.duration) ej["duration"] = *a.duration;
    const ExperimentConfig e = experiment_from_json(ej, base);
    const ResolvedExperiment r = resolve(e);
    const RobotModel model(r.model);
    const std::vector<Candidate> ranked = grid_search(model, grid, weights, r.episode, a.threads);

    Outputs out(output_path(a.output_dir.value_or(gj.value("output_dir", std::string("optimize")))));
    std::ostream &csv = out.file("candidates.csv");
    csv << "rank";
    for (const GridAxis &ax : grid.axes) csv << ',' << ax.name;
    csv << ",cost,stable,mean_speed,failure\n";
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        const Candidate &c = ranked[i];
        csv << i + 1;
        for (double v : c.values) csv << ',' << fmt(v);
        std::string failure = c.failure;
        std::replace(failure.begin(), failure.end(), ',', ';');
        csv << ',' << fmt(c.cost) << ',' << (c.stable ? 1 : 0) << ',' << fmt(c.mean_speed) << ',' << failure << '\n';
    }
    json summary{{"grid", to_json(grid)}, {"weights", weights.w}, {"candidates", ranked.size()}};
    const auto stable = std::count_if(ranked.begin(), ranked.end(), [](const Candidate &c) { return c.stable; });
    summary["stable"] = stable;
    for (std::size_t i = 0; i < std::min<std::size_t>(static_cast<std::size_t>(a.top), static_cast<std::size_t>(stable)); ++i) {
        summary["top"].push_back({{"rank", i + 1}, {"values", ranked[i].values}, {"cost", ranked[i].cost},
                                  {"mean_speed", ranked[i].mean_speed}, {"params", to_json(ranked[i].params)}});
    }
    out.file("summary.json") << summary.dump(2) << '\n';
    if (stable > 0) {
        const json preset{{"presets", {export_preset(ranked.front(), grid.strategy, grid.gait, "grid search rank 1")}}};
        out.file("preset.json") << preset.dump(2) << '\n';
    }
    out.commit();
    std::cout << ranked.size() << " candidates, " << stable << " stable, outputs in " << out.dir().string() << '\n';
    return stable > 0 ? kOk : kUnstable;
}

// score --------------------------------------------------------------------------

int cmd_score(const std::string &votes_path, const std::string &baseline, int threshold, const std::string &output_dir) {
    std::ifstream in(votes_path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + votes_path);
    const std::vector<VoteRecord> records = parse_votes(in);
    const ScreenedVotes sv = validate_participants(records, threshold);
    const double match = interact_match_rate(sv.kept);
    const ScoreReport rep = naturalness_scores(sv.kept, baseline);

    Outputs out(output_path(output_dir));
    json counts;
    for (const auto &[s, c] : rep.counts) {
        const bool halve = s == rep.baseline && rep.baseline_counts_halved;
        const double k = halve ? 0.5 : 1.0;
        counts[s] = {{"shown", c.shown}, {"most_natural", c.most_natural * k}, {"least_natural", c.least_natural * k},
                     {"most_interact", c.most_interact * k}, {"halved", halve}};
    }
    const json report{{"baseline", rep.baseline},
                      {"scores", rep.scores},
                      {"total", rep.total},
                      {"by_gait", rep.by_gait},
                      {"counts", counts},
                      {"interact_match_rate", match},
                      {"records", records.size()},
                      {"kept_records", sv.kept.size()},
                      {"dropped_participants", sv.dropped}};
    out.file("report.json") << report.dump(2) << '\n';
    std::ostream &csv = out.file("by_gait.csv");
    csv << "gait,strategy,score\n";
    for (const auto &[g, m] : rep.by_gait) {
        for (const auto &[s, v] : m) csv << g << ',' << s << ',' << fmt(v) << '\n';
    }
    std::ostream &dropped = out.file("dropped.txt");
    for (const std::string &p : sv.dropped) dropped << p << '\n';
    out.commit();
    std::cout << "match rate " << fmt(match) << ", " << sv.dropped.size() << " participants dropped\n";
    return kOk;
}
} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Quadruped spine locomotion toolkit"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto *simulate = app.add_subcommand("simulate", "Run one episode and write its log and summary");
    simulate->add_option("config", sim.config, "Experiment JSON")->required();
    simulate->add_option("--gait", sim.gait);
    simulate->add_option("--strategy", sim.strategy);
    simulate->add_option("--output-dir", sim.output_dir);
    simulate->add_option("--duration", sim.duration);
    simulate->add_option("--vx", sim.vx);
    simulate->add_option("--vy", sim.vy);
    simulate->add_option("--yaw-rate", sim.yaw_rate);
    simulate->add_option("--seed", sim.seed);
    simulate->add_flag("--timing", sim.timing, "Log MPC wall time per row");

    SweepArgs sw;
    auto *sweep = app.add_subcommand("sweep", "CoT curves over a velocity range");
    sweep->add_option("config", sw.config, "Sweep JSON")->required();
    sweep->add_option("--output-dir", sw.output_dir);
    sweep->add_option("--vmin", sw.vmin);
    sweep->add_option("--vmax", sw.vmax);
    sweep->add_option("--steps", sw.steps);
    sweep->add_option("--duration", sw.duration);
    sweep->add_option("--strategies", sw.strategies);
    sweep->add_option("--threads", sw.threads);

    std::string walk_csv, trot_csv;
    std::optional<std::string> transition_out;
    bool exclude_spine = false;
    auto *transition = app.add_subcommand("transition", "Walk-to-trot transition velocity of two CoT curves");
    transition->add_option("walk", walk_csv)->required();
    transition->add_option("trot", trot_csv)->required();
    transition->add_flag("--exclude-spine", exclude_spine, "Use the spine-excluded CoT column");
    transition->add_option("--output-dir", transition_out);

    std::string log_csv, hildebrand_out = "hildebrand";
    int bins = 20;
    auto *hb = app.add_subcommand("hildebrand", "Footfall grid of a logged episode");
    hb->add_option("log", log_csv)->required();
    hb->add_option("--bins", bins);
    hb->add_option("--output-dir", hildebrand_out);

    OptimizeArgs opt;
    auto *optimize = app.add_subcommand("optimize", "Grid search over spine strategy constants");
    optimize->add_option("grid", opt.grid, "Grid JSON")->required();
    optimize->add_option("--experiment", opt.experiment, "Experiment JSON for model, gaits and command");
    optimize->add_option("--output-dir", opt.output_dir);
    optimize->add_option("--duration", opt.duration);
    optimize->add_option("--threads", opt.threads);
    optimize->add_option("--top", opt.top);

    std::string votes_csv, baseline = "fixed", score_out = "score";
    int threshold = 2;
    auto *score = app.add_subcommand("score", "Naturalness scores and interaction match rate of a vote file");
    score->add_option("votes", votes_csv)->required();
    score->add_option("--baseline", baseline);
    score->add_option("--threshold", threshold);
    score->add_option("--output-dir", score_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*simulate) return cmd_simulate(sim);
        if (*sweep) return cmd_sweep(sw);
        if (*transition) return cmd_transition(walk_csv, trot_csv, exclude_spine, transition_out);
        if (*hb) return cmd_hildebrand(log_csv, bins, hildebrand_out);
        if (*optimize) return cmd_optimize(opt);
        if (*score) return cmd_score(votes_csv, baseline, threshold, score_out);
    } catch (const Error &e) {
        std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
        return exit_code(e.code());
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInternal;
    }
    return kUsage;
}
