#pragma once

// Dense convex QP solver:  min 1/2 x'Hx + g'x  subject to  Gx <= h.
// Primal-dual interior point with Mehrotra predictor-corrector. The normal
// equations use the row sparsity of G, which is very sparse for contact
// constraints.

#include "quadspine/types.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace quadspine
{

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct QpProblem {
    MatrixXd H;
    VectorXd g;
    MatrixXd G;  // m x n, may have zero rows
    VectorXd h;

    Eigen::Index n() const { return g.size(); }
    Eigen::Index m() const { return h.size(); }
};

enum class QpStatus { Optimal, MaxIterations };

struct QpSettings {
    int max_iterations = 100;
    double tolerance = 1e-10;
};

struct QpResult {
    VectorXd x;
    VectorXd z;  // inequality multipliers
    QpStatus status = QpStatus::Optimal;
    int iterations = 0;
    double residual = 0;  // KKT residual of the returned iterate

    bool degraded() const { return status != QpStatus::Optimal; }
};

inline double qp_objective(const QpProblem &qp, const VectorXd &x) {
    return 0.5 * x.dot(qp.H * x) + qp.g.dot(x);
}

/// Infinity norm of stationarity, primal infeasibility and complementarity.
inline double kkt_residual(const QpProblem &qp, const VectorXd &x, const VectorXd &z) {
    double r = (qp.H * x + qp.g + qp.G.transpose() * z).lpNorm<Eigen::Infinity>();
    if (qp.m() > 0) {
        const VectorXd slack = qp.h - qp.G * x;
        r = std::max(r, (-slack).cwiseMax(0.0).maxCoeff());
        r = std::max(r, (-z).cwiseMax(0.0).maxCoeff());
        r = std::max(r, z.cwiseProduct(slack).cwiseAbs().maxCoeff());
    }
    return r;
}

namespace detail
{
inline double max_step(const VectorXd &v, const VectorXd &dv) {
    double a = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (dv[i] < 0) {
            a = std::min(a, -v[i] / dv[i]);
        }
    }
    return a;
}
} // namespace detail

/// Solves the QP. Throws Infeasible when a Farkas certificate is found. When
/// the iteration cap is hit the best iterate seen is returned flagged
/// MaxIterations.
inline QpResult solve_qp(const QpProblem &qp, const QpSettings &settings = {}) {
    const Eigen::Index n = qp.n();
    const Eigen::Index m = qp.m();
    if (qp.H.rows() != n || qp.H.cols() != n || qp.G.rows() != m || (m > 0 && qp.G.cols() != n)) {
        throw Error(ErrorCode::InvalidParams, "QP dimensions are inconsistent");
    }

    QpResult res;
    if (m == 0) {
        Eigen::LDLT<MatrixXd> ldlt(qp.H);
        res.x = ldlt.solve(-qp.g);
        res.z = VectorXd::Zero(0);
        res.residual = kkt_residual(qp, res.x, res.z);
        return res;
    }

    std::vector<std::vector<Eigen::Index>> nz(static_cast<std::size_t>(m));
    for (Eigen::Index r = 0; r < m; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) {
            if (qp.G(r, c) != 0.0) {
                nz[static_cast<std::size_t>(r)].push_back(c);
            }
        }
    }
    const MatrixXd Gt = qp.G.transpose();

    auto factor = [&](const VectorXd &d) {
        MatrixXd K = qp.H;
        for (Eigen::Index r = 0; r < m; ++r) {
            const auto &idx = nz[static_cast<std::size_t>(r)];
            for (Eigen::Index a : idx) {
                const double ga = d[r] * qp.G(r, a);
                for (Eigen::Index b : idx) {
                    K(a, b) += ga * qp.G(r, b);
                }
            }
        }
        Eigen::LLT<MatrixXd> llt(K);
        if (llt.info() != Eigen::Success) {
            K.diagonal().array() += 1e-10 * (1.0 + K.diagonal().cwiseAbs().maxCoeff());
            llt.compute(K);
        }
        return llt;
    };

    // Start from the unconstrained-ish minimiser with unit slack and multipliers.
    VectorXd x;
    {
        Eigen::LLT<MatrixXd> llt = factor(VectorXd::Ones(m));
        x = llt.solve(-qp.g);
    }
    VectorXd s = qp.h - qp.G * x;
    const double shift = std::max(1.0, -s.minCoeff() + 1.0);
    s = s.cwiseMax(0.0).array() + shift;
    VectorXd z = VectorXd::Ones(m);

    const double scale_d = 1.0 + qp.g.lpNorm<Eigen::Infinity>();
    const double scale_p = 1.0 + qp.h.lpNorm<Eigen::Infinity>();

    VectorXd best_x = x, best_z = z;
    double best_res = std::numeric_limits<double>::infinity();

    for (int it = 0; it < settings.max_iterations; ++it) {
        const VectorXd rd = qp.H * x + qp.g + Gt * z;
        const VectorXd rp = qp.G * x + s - qp.h;
        const double mu = s.dot(z) / static_cast<double>(m);
        res.iterations = it;

        const double kkt = kkt_residual(qp, x, z);
        if (kkt < best_res) {
            best_res = kkt;
            best_x = x;
            best_z = z;
        }
        if (rd.lpNorm<Eigen::Infinity>() <= settings.tolerance * scale_d &&
            rp.lpNorm<Eigen::Infinity>() <= settings.tolerance * scale_p && mu <= settings.tolerance) {
            res.x = x;
            res.z = z;
            res.residual = kkt;
            return res;
        }

        // Farkas certificate: z >= 0, G'z ~ 0, h'z < 0.
        const double hz = qp.h.dot(z);
        if (hz < 0.0 && (Gt * z).lpNorm<Eigen::Infinity>() <= 1e-9 * -hz && z.maxCoeff() > 1e6) {
            throw Error(ErrorCode::Infeasible, "QP constraints are infeasible");
        }

        const VectorXd d = z.cwiseQuotient(s);
        const Eigen::LLT<MatrixXd> llt = factor(d);

        auto direction = [&](const VectorXd &rc, VectorXd &dx, VectorXd &ds, VectorXd &dz) {
            const VectorXd rc_s = rc.cwiseQuotient(s);
            dx = llt.solve(-rd - Gt * (d.cwiseProduct(rp) - rc_s));
            ds = -rp - qp.G * dx;
            dz = d.cwiseProduct(qp.G * dx + rp) - rc_s;
        };

        VectorXd dx, ds, dz;
        const VectorXd sz = s.cwiseProduct(z);
        direction(sz, dx, ds, dz);
        const double a_aff = std::min(detail::max_step(s, ds), detail::max_step(z, dz));
        const double mu_aff = (s + a_aff * ds).dot(z + a_aff * dz) / static_cast<double>(m);
        const double sigma = std::pow(mu_aff / mu, 3);

        const VectorXd centre = VectorXd::Constant(m, std::min(sigma, 1.0) * mu);
        auto step = [&](const VectorXd &rc) {
            direction(rc, dx, ds, dz);
            return std::min(1.0, 0.99 * std::min(detail::max_step(s, ds), detail::max_step(z, dz)));
        };
        double alpha = step(sz + ds.cwiseProduct(dz) - centre);
        // The second-order correction can cycle near degenerate vertices. Fall
        // back to the plain centred direction and backtrack until
        // complementarity decreases while staying away from the boundary.
        auto acceptable = [&](double a) {
            const VectorXd s_new = s + a * ds, z_new = z + a * dz;
            const double mu_new = s_new.dot(z_new) / static_cast<double>(m);
            return mu_new <= (1.0 - 0.01 * a) * mu && s_new.cwiseProduct(z_new).minCoeff() >= 1e-3 * mu_new;
        };
        if (!acceptable(alpha)) {
            alpha = step(sz - VectorXd::Constant(m, std::clamp(sigma, 0.1, 0.9) * mu));
            for (int k = 0; k < 30 && !acceptable(alpha); ++k) {
                alpha *= 0.5;
            }
        }

        x += alpha * dx;
        s += alpha * ds;
        z += alpha * dz;

        if (!x.allFinite() || !s.allFinite() || !z.allFinite()) {
            break;
        }
    }

    res.status = QpStatus::MaxIterations;
    res.iterations = settings.max_iterations;
    res.x = best_x;
    res.z = best_z;
    res.residual = best_res;
    return res;
}

} // namespace quadspine
