#include "quadspine/study.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

using namespace quadspine;

namespace
{
const std::string kVotes = std::string(QUADSPINE_SOURCE_DIR) + "/data/fixtures/votes/";
const std::string kBase = "fixed";

std::vector<VoteRecord> load(const std::string &name) {
    std::ifstream in(kVotes + name);
    EXPECT_TRUE(in.good()) << name;
    return parse_votes(in);
}

VoteRecord vote(const std::string &a, const std::string &b, const std::string &most, const std::string &least,
                const std::string &gait = "walk") {
    return {"p", gait + "_" + a + "_" + b, gait, {kBase, a, b}, most, least, most};
}

// Case table written out per outcome, independent of the rank formulation.
double enumerate_score(const std::vector<VoteRecord> &rs, const std::string &s) {
    long sum = 0, n = 0;
    for (const VoteRecord &r : rs) {
        if (std::find(r.shown.begin(), r.shown.end(), s) == r.shown.end()) continue;
        ++n;
        if (r.most_natural == r.least_natural) continue;  // contradictory vote ranks nobody
        const bool s_most = r.most_natural == s, s_least = r.least_natural == s;
        const bool b_most = r.most_natural == kBase, b_least = r.least_natural == kBase;
        if (s_most && !b_most) {
            sum += 1;
        } else if (b_least && !s_least) {
            sum += 1;
        } else if (b_most && !s_most) {
            sum -= 1;
        } else if (s_least && !b_least) {
            sum -= 1;
        }
    }
    return static_cast<double>(sum) / static_cast<double>(n);
}

std::vector<VoteRecord> mixed_ten() {
    return {vote("stiffness", "time_opt", "stiffness", "fixed"),
            vote("stiffness", "time_opt", "time_opt", "stiffness"),
            vote("stiffness", "time_opt", "fixed", "time_opt"),
            vote("stiffness", "time_real", "time_real", "fixed"),
            vote("stiffness", "time_real", "time_real", "stiffness"),
            vote("foot_tracking", "time_real", "fixed", "foot_tracking", "trot"),
            vote("foot_tracking", "time_real", "foot_tracking", "time_real", "trot"),
            vote("foot_tracking", "time_opt", "time_opt", "foot_tracking", "trot"),
            vote("foot_tracking", "time_opt", "fixed", "fixed", "turn"),
            vote("stiffness", "foot_tracking", "foot_tracking", "fixed", "turn")};
}

std::string swap_label(const std::string &x, const std::string &s) {
    if (x == s) return kBase;
    if (x == kBase) return s;
    return x;
}
} // namespace

TEST(Votes, ParseAndRoundTrip) {
    const auto rs = load("small.csv");
    ASSERT_EQ(rs.size(), 6u);
    EXPECT_EQ(rs[0].participant, "s0");
    EXPECT_EQ(rs[0].shown[2], "foot_tracking");
    std::stringstream ss;
    write_votes(ss, rs);
    EXPECT_EQ(parse_votes(ss), rs);
}

TEST(Votes, SchemaErrorsNameTheLine) {
    auto expect_schema = [](const std::string &text, const std::string &where) {
        std::istringstream in(text);
        try {
            parse_votes(in);
            FAIL() << text;
        } catch (const Error &e) {
            EXPECT_EQ(e.code(), ErrorCode::SchemaError);
            EXPECT_NE(std::string(e.what()).find(where), std::string::npos) << e.what();
        }
    };
    const std::string h = std::string(kVoteHeader) + "\n";
    expect_schema("participant,video\n", "header");
    expect_schema(h + "a,v,walk,fixed,stiffness,time_opt,fixed,stiffness,fixed\na,v,walk,fixed\n", "line 3");
    expect_schema(h + "a,v,walk,fixed,stiffness,time_opt,time_real,stiffness,fixed\n", "line 2");
}

TEST(Votes, EmptyFileHasNoRecords) {
    EXPECT_TRUE(load("empty.csv").empty());
    EXPECT_THROW(interact_match_rate(load("empty.csv")), Error);
}

TEST(Screening, ThresholdRule) {
    const auto rs = load("screening.csv");
    const ScreenedVotes sv = validate_participants(rs);
    EXPECT_EQ(sv.dropped, std::vector<std::string>{"c3"});
    for (const VoteRecord &r : sv.kept) EXPECT_NE(r.participant, "c3");
    EXPECT_EQ(sv.kept.size(), rs.size() - 18);
    EXPECT_EQ(validate_participants(rs, 1).dropped, (std::vector<std::string>{"c1", "c3"}));
    EXPECT_TRUE(validate_participants(load("match_862_20.csv")).dropped.empty());
}

TEST(Naturalness, ScoreBoundsReached) {
    const ScoreReport hi = naturalness_scores(load("extremes.csv"), kBase);
    EXPECT_EQ(hi.scores.at("time_opt"), 1.0);
    const ScoreReport lo = naturalness_scores(load("baseline_best.csv"), kBase);
    for (const auto &[s, v] : lo.scores) EXPECT_EQ(v, -1.0) << s;
    EXPECT_EQ(lo.total, -1.0);
    EXPECT_EQ(lo.scores.size(), 4u);
}

TEST(Naturalness, MatchesEnumerationOracle) {
    const auto rs = mixed_ten();
    const ScoreReport rep = naturalness_scores(rs, kBase);
    double total = 0;
    for (const std::string s : {"stiffness", "foot_tracking", "time_opt", "time_real"}) {
        EXPECT_DOUBLE_EQ(rep.scores.at(s), enumerate_score(rs, s)) << s;
        total += enumerate_score(rs, s);
    }
    EXPECT_DOUBLE_EQ(rep.total, total / 4);
    EXPECT_EQ(rep.counts.at(kBase).shown, 10);
    EXPECT_EQ(rep.counts.at("stiffness").most_natural, 1);
}

TEST(Naturalness, AntisymmetricUnderLabelSwap) {
    const auto rs = load("match_862_20.csv");
    const ScoreReport rep = naturalness_scores(rs, kBase);
    for (const auto &[s, v] : rep.scores) {
        auto swapped = rs;
        for (VoteRecord &r : swapped) {
            if (!r.shows(s)) continue;
            r.most_natural = swap_label(r.most_natural, s);
            r.least_natural = swap_label(r.least_natural, s);
        }
        EXPECT_EQ(naturalness_scores(swapped, kBase).scores.at(s), -v) << s;
    }
}

TEST(Naturalness, UnrankedVoteShrinksTowardZero) {
    auto rs = mixed_ten();
    const double before = naturalness_scores(rs, kBase).scores.at("time_opt");
    ASSERT_NE(before, 0.0);
    rs.push_back(vote("time_opt", "stiffness", "stiffness", "stiffness"));
    const double after = naturalness_scores(rs, kBase).scores.at("time_opt");
    EXPECT_LT(std::abs(after), std::abs(before));
    EXPECT_GT(after * before, 0.0);
}

TEST(Naturalness, OrderInvariant) {
    auto rs = load("match_862_20.csv");
    const ScoreReport a = naturalness_scores(rs, kBase);
    std::mt19937 rng(3);
    std::shuffle(rs.begin(), rs.end(), rng);
    const ScoreReport b = naturalness_scores(rs, kBase);
    EXPECT_EQ(a.scores, b.scores);
    EXPECT_EQ(a.by_gait, b.by_gait);
    EXPECT_EQ(a.total, b.total);
    EXPECT_EQ(interact_match_rate(rs), 862.0 / 882.0);
}

TEST(Naturalness, BaselineMissing) {
    auto rs = mixed_ten();
    rs[3].shown[0] = "stiffness";
    try {
        naturalness_scores(rs, kBase);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::BaselineMissing);
    }
}

TEST(InteractMatch, Fixture) {
    const auto rs = load("match_862_20.csv");
    ASSERT_EQ(rs.size(), 882u);
    EXPECT_NEAR(interact_match_rate(rs), 0.9773, 1e-4);
}

TEST(InteractMatch, Extremes) {
    auto rs = mixed_ten();
    EXPECT_EQ(interact_match_rate(rs), 1.0);
    for (VoteRecord &r : rs) r.most_interact = r.most_natural == kBase ? "stiffness" : kBase;
    EXPECT_EQ(interact_match_rate(rs), 0.0);
}
