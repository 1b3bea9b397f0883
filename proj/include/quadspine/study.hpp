#pragma once

// Subjective-study analytics: vote ingestion, participant screening, the
// baseline-relative naturalness score and the naturalness/interaction match
// rate.

#include "quadspine/types.hpp"

#include <algorithm>
#include <array>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace quadspine
{

struct VoteRecord {
    std::string participant;
    std::string video;
    std::string gait;
    std::array<std::string, 3> shown;
    std::string most_natural;
    std::string least_natural;
    std::string most_interact;

    bool shows(const std::string &s) const { return std::find(shown.begin(), shown.end(), s) != shown.end(); }
    bool operator==(const VoteRecord &) const = default;
};

inline constexpr const char *kVoteHeader =
    "participant,video,gait,shown_1,shown_2,shown_3,most_natural,least_natural,most_interact";

namespace detail
{
inline std::vector<std::string> split_csv(const std::string &line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}
} // namespace detail

/// Parses the vote CSV. The header must match kVoteHeader; every row is
/// checked for distinct shown strategies and votes among them.
inline std::vector<VoteRecord> parse_votes(std::istream &is) {
    std::string line;
    if (!std::getline(is, line)) {
        throw Error(ErrorCode::SchemaError, "line 1: missing header");
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kVoteHeader) {
        throw Error(ErrorCode::SchemaError, "line 1: unexpected header '" + line + "'");
    }
    std::vector<VoteRecord> out;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto f = detail::split_csv(line);
        const std::string where = "line " + std::to_string(lineno) + ": ";
        if (f.size() != 9) {
            throw Error(ErrorCode::SchemaError, where + "expected 9 fields, got " + std::to_string(f.size()));
        }
        for (const std::string &s : f) {
            if (s.empty()) throw Error(ErrorCode::SchemaError, where + "empty field");
        }
        VoteRecord r{f[0], f[1], f[2], {f[3], f[4], f[5]}, f[6], f[7], f[8]};
        if (r.shown[0] == r.shown[1] || r.shown[0] == r.shown[2] || r.shown[1] == r.shown[2]) {
            throw Error(ErrorCode::SchemaError, where + "shown strategies must be distinct");
        }
        for (const std::string *v : {&r.most_natural, &r.least_natural, &r.most_interact}) {
            if (!r.shows(*v)) {
                throw Error(ErrorCode::SchemaError, where + "vote for '" + *v + "' which was not shown");
            }
        }
        out.push_back(std::move(r));
    }
    return out;
}

inline void write_votes(std::ostream &os, const std::vector<VoteRecord> &records) {
    os << kVoteHeader << '\n';
    for (const VoteRecord &r : records) {
        os << r.participant << ',' << r.video << ',' << r.gait << ',' << r.shown[0] << ',' << r.shown[1] << ','
           << r.shown[2] << ',' << r.most_natural << ',' << r.least_natural << ',' << r.most_interact << '\n';
    }
}

struct ScreenedVotes {
    std::vector<VoteRecord> kept;
    std::vector<std::string> dropped;  // sorted participant ids
};

/// Drops every participant who named the same strategy most and least
/// natural in at least `threshold` of their records.
inline ScreenedVotes validate_participants(const std::vector<VoteRecord> &records, int threshold = 2) {
    std::map<std::string, int> contradictions;
    for (const VoteRecord &r : records) {
        if (r.most_natural == r.least_natural) ++contradictions[r.participant];
    }
    std::set<std::string> drop;
    for (const auto &[p, n] : contradictions) {
        if (n >= threshold) drop.insert(p);
    }
    ScreenedVotes out;
    out.dropped.assign(drop.begin(), drop.end());
    for (const VoteRecord &r : records) {
        if (!drop.count(r.participant)) out.kept.push_back(r);
    }
    return out;
}

/// +1 when `s` is ranked above `baseline` in this vote, -1 when below, 0 when
/// the vote does not order them. Most natural ranks +1, least natural -1.
inline int pairwise_vote(const VoteRecord &r, const std::string &s, const std::string &baseline) {
    auto rank = [&](const std::string &x) { return (r.most_natural == x ? 1 : 0) - (r.least_natural == x ? 1 : 0); };
    const int d = rank(s) - rank(baseline);
    return (d > 0) - (d < 0);
}

struct VoteCounts {
    int most_natural = 0;
    int least_natural = 0;
    int most_interact = 0;
    int shown = 0;
};

struct ScoreReport {
    std::string baseline;
    std::map<std::string, double> scores;                         // strategy -> score in [-1, 1]
    std::map<std::string, std::map<std::string, double>> by_gait;  // gait -> strategy -> score
    std::map<std::string, VoteCounts> counts;                      // raw counts per strategy
    bool baseline_counts_halved = true;  // baseline appears in every video; display its counts halved
    double total = 0;                    // mean of the per-strategy scores
};

/// Baseline-relative naturalness of every other strategy: the mean pairwise
/// vote over the records showing it.
inline ScoreReport naturalness_scores(const std::vector<VoteRecord> &records, const std::string &baseline) {
    ScoreReport rep;
    rep.baseline = baseline;
    std::map<std::string, std::pair<long, long>> acc;
    std::map<std::string, std::map<std::string, std::pair<long, long>>> gacc;
    for (const VoteRecord &r : records) {
        if (!r.shows(baseline)) {
            throw Error(ErrorCode::BaselineMissing,
                        "video " + r.video + " of participant " + r.participant + " does not show " + baseline);
        }
        for (const std::string &s : r.shown) {
            VoteCounts &c = rep.counts[s];
            ++c.shown;
            c.most_natural += r.most_natural == s;
            c.least_natural += r.least_natural == s;
            c.most_interact += r.most_interact == s;
            if (s == baseline) continue;
            const int v = pairwise_vote(r, s, baseline);
            acc[s].first += v;
            acc[s].second += 1;
            gacc[r.gait][s].first += v;
            gacc[r.gait][s].second += 1;
        }
    }
    if (records.empty()) {
        throw Error(ErrorCode::BaselineMissing, "no records show " + baseline);
    }
    for (const auto &[s, a] : acc) {
        rep.scores[s] = static_cast<double>(a.first) / static_cast<double>(a.second);
        rep.total += rep.scores[s];
    }
    if (!rep.scores.empty()) rep.total /= static_cast<double>(rep.scores.size());
    for (const auto &[g, m] : gacc) {
        for (const auto &[s, a] : m) {
            rep.by_gait[g][s] = static_cast<double>(a.first) / static_cast<double>(a.second);
        }
    }
    return rep;
}

/// Fraction of records whose most natural pick is also the one the
/// participant would most like to interact with.
inline double interact_match_rate(const std::vector<VoteRecord> &records) {
    if (records.empty()) {
        throw Error(ErrorCode::EmptyInput, "no vote records");
    }
    const auto n = std::count_if(records.begin(), records.end(),
                                 [](const VoteRecord &r) { return r.most_natural == r.most_interact; });
    return static_cast<double>(n) / static_cast<double>(records.size());
}

} // namespace quadspine
