#include "oracles.hpp"
#include "quadspine/qp.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace quadspine;

namespace
{

QpProblem scalar(double H, double g, std::vector<std::pair<double, double>> rows) {
    QpProblem qp;
    qp.H = MatrixXd::Constant(1, 1, H);
    qp.g = VectorXd::Constant(1, g);
    qp.G.resize(static_cast<Eigen::Index>(rows.size()), 1);
    qp.h.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        qp.G(static_cast<Eigen::Index>(i), 0) = rows[i].first;
        qp.h[static_cast<Eigen::Index>(i)] = rows[i].second;
    }
    return qp;
}

} // namespace

TEST(SolveQp, UnconstrainedStationaryPoint) {
    const QpResult r = solve_qp(scalar(1.0, -1.0, {}));
    EXPECT_NEAR(r.x[0], 1.0, 1e-12);
    EXPECT_FALSE(r.degraded());
}

TEST(SolveQp, ActiveLowerBound) {
    const QpResult r = solve_qp(scalar(1.0, 0.0, {{-1.0, -2.0}}));
    EXPECT_NEAR(r.x[0], 2.0, 1e-8);
    EXPECT_LE(r.residual, 1e-6);
}

TEST(SolveQp, InactiveConstraint) {
    const QpResult r = solve_qp(scalar(1.0, -1.0, {{1.0, 5.0}}));
    EXPECT_NEAR(r.x[0], 1.0, 1e-8);
}

TEST(SolveQp, InfeasibleRaises) {
    try {
        solve_qp(scalar(1.0, 0.0, {{1.0, -1.0}, {-1.0, -1.0}}));
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), ErrorCode::Infeasible);
    }
}

TEST(SolveQp, IterationCapReturnsDegradedBestIterate) {
    QpSettings s;
    s.max_iterations = 2;
    const QpResult r = solve_qp(scalar(1.0, 0.0, {{-1.0, -2.0}}), s);
    EXPECT_TRUE(r.degraded());
    EXPECT_EQ(r.status, QpStatus::MaxIterations);
    EXPECT_TRUE(r.x.allFinite());
}

TEST(SolveQp, MatchesActiveSetOracle) {
    std::mt19937_64 rng(29);
    for (int i = 0; i < 200; ++i) {
        const QpProblem qp = oracle::random_qp(rng, 6, 8);
        const auto ref = oracle::active_set_qp(qp.H, qp.g, qp.G, qp.h);
        ASSERT_TRUE(ref.has_value());
        const QpResult r = solve_qp(qp);
        EXPECT_FALSE(r.degraded());
        EXPECT_LE(r.residual, 1e-6);
        EXPECT_NEAR(qp_objective(qp, r.x), qp_objective(qp, *ref), 1e-6);
        EXPECT_LT((r.x - *ref).norm(), 1e-5);
    }
}

TEST(SolveQp, Deterministic) {
    std::mt19937_64 rng(31);
    const QpProblem qp = oracle::random_qp(rng, 10, 14);
    const QpResult a = solve_qp(qp);
    const QpResult b = solve_qp(qp);
    EXPECT_EQ(a.x, b.x);
    EXPECT_EQ(a.iterations, b.iterations);
}
