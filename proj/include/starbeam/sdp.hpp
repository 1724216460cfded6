// SPDX-License-Identifier: Apache-2.0
//
// Dense linear-cost semidefinite solver for the lifted surface-coefficient
// subproblem. The problem class is deliberately narrow:
//
//   minimize    sum_s tr(C_s V_s) + sum_s c_s^T diag_elems(V_s)
//   subject to  diag element slots paired across sides (rho_t + rho_r = 1)
//               or pinned to given values, auxiliary slot pinned to 1,
//               V_t, V_r Hermitian positive semidefinite.
//
// Method: primal-dual interior point with the HKM direction and a Mehrotra
// predictor-corrector. Every constraint reads one diagonal slot per side, so
// the dual slack is S_s = C_s + diag(shift_s(nu)); it is rebuilt from the
// multipliers each iteration, which keeps dual feasibility exact, and the
// constrained diagonal entries of the primal blocks are re-pinned after each
// step, which keeps primal feasibility exact. The only residual the iteration
// has to work down is the duality gap tr(V S), and both blocks stay strictly
// positive definite throughout, so the reported multipliers certify the
// solution without any post-hoc fitting.
#ifndef STARBEAM_SDP_HPP
#define STARBEAM_SDP_HPP

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

#include "starbeam/types.hpp"

namespace starbeam {

struct LinearSdpProblem {
    std::array<CMat, 2> cost;      // (N+1) x (N+1) Hermitian cost per side
    std::array<RVec, 2> rho_cost;  // optional linear cost on element splits (size 0 or N)
    std::optional<RVec> fixed_rho_t;  // pin element splits instead of free pairing
    double tol = 1e-7;

    int n_elements() const { return static_cast<int>(cost[0].rows()) - 1; }
};

enum class SdpStatus { optimal, iteration_limit, infeasible };

struct SdpKkt {
    double primal_residual = 0.0;   // worst equality-constraint violation
    double psd_min_eig = 0.0;       // most negative block eigenvalue (>= 0 is clean)
    double box_violation = 0.0;     // worst diag excursion outside [0, 1]
    double dual_min_eig = 0.0;      // most negative dual-block eigenvalue
    double complementarity = 0.0;   // duality-gap surrogate |tr(S V)|
    double cost_scale = 1.0;        // largest |cost entry|, >= 1

    // Largest residual. Primal-side terms are already on the O(1) scale set
    // by the unit diagonal constraints; the dual-side terms live on the cost
    // scale, so dual infeasibility is reported relative to it and the gap
    // relative to the objective (the usual DIMACS-style error measures).
    double worst(double objective) const {
        double w = primal_residual;
        w = std::max(w, std::max(0.0, -psd_min_eig));
        w = std::max(w, box_violation);
        w = std::max(w, std::max(0.0, -dual_min_eig) / (1.0 + cost_scale));
        w = std::max(w, complementarity / (1.0 + std::abs(objective)));
        return w;
    }
};

struct SdpIterationRow {
    int iteration = 0;
    double mu = 0.0;         // complementarity per dimension
    double gap = 0.0;        // duality gap tr(V S), normalized cost units
    double objective = 0.0;  // linear objective, normalized cost units
    double sigma = 0.0;      // centering weight chosen by the predictor
    double step = 0.0;       // accepted step length (min of primal and dual)
};

struct SdpSolution {
    std::array<CMat, 2> v;        // full-size PSD blocks (dropped slots zeroed)
    std::array<RVec, 2> rho;      // element splits, length N
    double objective = 0.0;
    SdpKkt kkt;
    SdpStatus status = SdpStatus::optimal;
    int newton_iterations = 0;
    std::array<RVec, 2> dual_diag;  // dual of the diagonal constraints, length N+1 per side
    std::vector<SdpIterationRow> log;
};

// Hermitian-to-real-symmetric embedding. PSD-ness, diagonal constraints and
// (up to a factor 2) traces are preserved.
inline RMat embed_hermitian(const CMat& x) {
    const Eigen::Index n = x.rows();
    RMat y(2 * n, 2 * n);
    y.topLeftCorner(n, n) = x.real();
    y.topRightCorner(n, n) = -x.imag();
    y.bottomLeftCorner(n, n) = x.imag();
    y.bottomRightCorner(n, n) = x.real();
    return y;
}

inline CMat unembed_hermitian(const RMat& y) {
    const Eigen::Index n = y.rows() / 2;
    const RMat re = 0.5 * (y.topLeftCorner(n, n) + y.bottomRightCorner(n, n));
    const RMat im = 0.5 * (y.bottomLeftCorner(n, n) - y.topRightCorner(n, n));
    CMat x = re.cast<cx>() + cx(0.0, 1.0) * im.cast<cx>();
    return 0.5 * (x + x.adjoint()).eval();
}

// Objective value of the embedded representation, 0.5 tr(C_embedded V_embedded).
inline double embedded_objective(const RMat& cost_embedded, const RMat& v_embedded) {
    return 0.5 * cost_embedded.cwiseProduct(v_embedded).sum();
}

namespace detail {

inline bool is_pd_with_margin(const CMat& x, double margin) {
    Eigen::SelfAdjointEigenSolver<CMat> eig(x, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff() > margin;
}

// Largest step in (0, 1] that keeps x + alpha dx positive definite, or zero
// if even a vanishing step fails. The feasible alphas form an interval, so
// backtracking is exact up to its grid.
inline double max_pd_step(const CMat& x, const CMat& dx) {
    double alpha = 1.0;
    for (int i = 0; i < 110; ++i) {
        CMat trial = x + alpha * dx;
        trial = (0.5 * (trial + trial.adjoint())).eval();
        Eigen::LLT<CMat> llt(trial);
        if (llt.info() == Eigen::Success) return alpha;
        alpha *= 0.8;
    }
    return 0.0;
}

struct SdpConstraintRow {
    bool paired = false;
    int side = 0;      // for fixed rows
    int pos_t = -1;    // reduced slot index on side t (paired rows)
    int pos_r = -1;    // reduced slot index on side r (paired rows)
    int pos = -1;      // reduced slot index (fixed rows)
    double target = 1.0;
};

}  // namespace detail

// Interior-point solve. `warm` may carry full-size blocks from a previous
// related solve; they are repaired onto the constraint set and blended toward
// the default interior point until strictly positive definite.
inline SdpSolution solve_linear_sdp(const LinearSdpProblem& prob,
                                    const std::optional<std::array<CMat, 2>>& warm = std::nullopt,
                                    std::ostream* dump = nullptr) {
    const int n = prob.n_elements();
    require(n >= 1, "solve_linear_sdp: empty problem");
    for (int s = 0; s < 2; ++s) {
        require(prob.cost[s].rows() == n + 1 && prob.cost[s].cols() == n + 1,
                "solve_linear_sdp: cost block size mismatch");
        require(prob.rho_cost[s].size() == 0 || prob.rho_cost[s].size() == n,
                "solve_linear_sdp: rho cost size mismatch");
    }
    if (prob.fixed_rho_t) {
        require(prob.fixed_rho_t->size() == n, "solve_linear_sdp: fixed split size mismatch");
        for (int i = 0; i < n; ++i)
            require((*prob.fixed_rho_t)(i) >= 0.0 && (*prob.fixed_rho_t)(i) <= 1.0,
                    "solve_linear_sdp: fixed split out of [0,1]");
    }

    // Keep lists: drop element slots whose pinned diagonal is exactly zero.
    std::array<std::vector<int>, 2> keep;
    for (int s = 0; s < 2; ++s) {
        for (int i = 0; i < n; ++i) {
            const double pinned = prob.fixed_rho_t ? (s == 0 ? (*prob.fixed_rho_t)(i)
                                                             : 1.0 - (*prob.fixed_rho_t)(i))
                                                   : 1.0;
            if (pinned > 0.0) keep[s].push_back(i);
        }
        keep[s].push_back(n);  // auxiliary slot always present
    }

    // Cost normalization keeps the step sizes and stopping rules scale-free.
    double scale = 1.0;
    for (int s = 0; s < 2; ++s) {
        scale = std::max(scale, prob.cost[s].cwiseAbs().maxCoeff());
        if (prob.rho_cost[s].size() > 0)
            scale = std::max(scale, prob.rho_cost[s].cwiseAbs().maxCoeff());
    }

    std::array<CMat, 2> cost_red;
    std::array<int, 2> h{};  // reduced complex dimensions
    for (int s = 0; s < 2; ++s) {
        const auto& ks = keep[s];
        const int hs = static_cast<int>(ks.size());
        h[s] = hs;
        CMat c(hs, hs);
        for (int a = 0; a < hs; ++a)
            for (int b = 0; b < hs; ++b) c(a, b) = prob.cost[s](ks[a], ks[b]);
        c = (0.5 * (c + c.adjoint())).eval();
        if (prob.rho_cost[s].size() > 0)
            for (int a = 0; a + 1 < hs; ++a) c(a, a) += prob.rho_cost[s](ks[a]);
        cost_red[s] = c / scale;
    }

    // Constraint rows over reduced slots.
    std::vector<detail::SdpConstraintRow> rows;
    if (!prob.fixed_rho_t) {
        for (int i = 0; i < n; ++i) {
            detail::SdpConstraintRow r;
            r.paired = true;
            r.pos_t = i;  // keep lists are the identity when nothing is dropped
            r.pos_r = i;
            r.target = 1.0;
            rows.push_back(r);
        }
    } else {
        for (int s = 0; s < 2; ++s) {
            for (int a = 0; a + 1 < h[s]; ++a) {
                detail::SdpConstraintRow r;
                r.side = s;
                r.pos = a;
                r.target = (s == 0) ? (*prob.fixed_rho_t)(keep[s][a])
                                    : 1.0 - (*prob.fixed_rho_t)(keep[s][a]);
                rows.push_back(r);
            }
        }
    }
    for (int s = 0; s < 2; ++s) {
        detail::SdpConstraintRow r;
        r.side = s;
        r.pos = h[s] - 1;
        r.target = 1.0;
        rows.push_back(r);
    }
    const int m_rows = static_cast<int>(rows.size());
    const double n_dim = static_cast<double>(h[0] + h[1]);

    // Each constraint row reads exactly one diagonal slot per side (paired
    // rows one on each, fixed rows one on their own side), and together the
    // rows cover every kept slot exactly once.
    const auto slot_of = [&](const detail::SdpConstraintRow& r, int s) {
        if (r.paired) return (s == 0) ? r.pos_t : r.pos_r;
        return (r.side == s) ? r.pos : -1;
    };

    // Default strictly feasible point: diagonal with an even split nudged off
    // center so the paired sums stay exact.
    const auto default_point = [&](int s) {
        RVec diag = RVec::Ones(h[s]);
        if (!prob.fixed_rho_t) {
            const double jitter = 1e-6;
            for (int a = 0; a + 1 < h[s]; ++a) diag(a) = (s == 0) ? 0.5 + jitter : 0.5 - jitter;
        } else {
            for (int a = 0; a + 1 < h[s]; ++a)
                diag(a) = (s == 0) ? (*prob.fixed_rho_t)(keep[s][a])
                                   : 1.0 - (*prob.fixed_rho_t)(keep[s][a]);
        }
        return CMat(diag.cast<cx>().asDiagonal());
    };

    // Exact re-pin of the constrained diagonal entries (paired sums and fixed
    // values) on the iterate; positive definiteness of both sides keeps free
    // splits inside (0, 1) on its own.
    const auto repin_diag = [&](std::array<CMat, 2>& x) {
        for (const auto& r : rows) {
            if (r.paired) {
                double rho = 0.5 * (x[0](r.pos_t, r.pos_t).real() + 1.0 -
                                    x[1](r.pos_r, r.pos_r).real());
                rho = std::min(std::max(rho, 0.0), 1.0);
                x[0](r.pos_t, r.pos_t) = rho;
                x[1](r.pos_r, r.pos_r) = 1.0 - rho;
            } else {
                x[r.side](r.pos, r.pos) = r.target;
            }
        }
    };

    // Starting point: warm blocks if usable, blended toward the default
    // interior point until strictly positive definite.
    std::array<CMat, 2> v;
    {
        std::array<CMat, 2> start;
        for (int s = 0; s < 2; ++s) {
            start[s] = default_point(s);
            if (warm) {
                const auto& full = (*warm)[static_cast<std::size_t>(s)];
                if (full.rows() == n + 1 && full.cols() == n + 1) {
                    CMat red(h[s], h[s]);
                    for (int a = 0; a < h[s]; ++a)
                        for (int b = 0; b < h[s]; ++b) red(a, b) = full(keep[s][a], keep[s][b]);
                    start[s] = (0.5 * (red + red.adjoint())).eval();
                }
            }
        }
        bool ok = false;
        if (warm) {
            for (const double gamma : {0.05, 0.2, 0.5}) {
                std::array<CMat, 2> cand;
                for (int s = 0; s < 2; ++s)
                    cand[s] = (1.0 - gamma) * start[s] + gamma * default_point(s);
                repin_diag(cand);
                bool pd = true;
                for (int s = 0; s < 2; ++s)
                    pd = pd && detail::is_pd_with_margin(
                                   cand[s], 1e-8 * (1.0 + cand[s].trace().real() / cand[s].rows()));
                if (pd) {
                    v = cand;
                    ok = true;
                    break;
                }
            }
        }
        if (!ok) {
            for (int s = 0; s < 2; ++s) v[s] = default_point(s);
            repin_diag(v);
        }
    }

    // Dual slack from multipliers; rebuilt in full after every multiplier
    // update so dual feasibility never drifts.
    const auto slack_of = [&](const RVec& mult) {
        std::array<CMat, 2> out;
        for (int s = 0; s < 2; ++s) {
            out[s] = cost_red[s];
            for (int i = 0; i < m_rows; ++i) {
                const int p = slot_of(rows[i], s);
                if (p >= 0) out[s](p, p) += mult(i);
            }
        }
        return out;
    };

    // Dual start: a Gershgorin shift per covered slot makes the slack
    // strictly diagonally dominant.
    RVec nu = RVec::Zero(m_rows);
    for (int i = 0; i < m_rows; ++i) {
        double need = 0.1;
        for (int s = 0; s < 2; ++s) {
            const int p = slot_of(rows[i], s);
            if (p < 0) continue;
            double off = 0.0;
            for (int q = 0; q < h[s]; ++q)
                if (q != p) off += std::abs(cost_red[s](p, q));
            need = std::max(need, off - cost_red[s](p, p).real() + 0.1);
        }
        nu(i) = need;
    }

    SdpSolution sol;
    sol.status = SdpStatus::iteration_limit;

    const auto real_inner = [](const CMat& a, const CMat& b) {
        return a.cwiseProduct(b.conjugate()).sum().real();  // tr(a b) for Hermitian a, b
    };

    std::array<CMat, 2> slack = slack_of(nu);
    const int max_iterations = 100;
    for (int iter = 0; iter < max_iterations; ++iter) {
        std::array<CMat, 2> sinv;
        for (int s = 0; s < 2; ++s) {
            Eigen::LLT<CMat> llt(slack[s]);
            if (llt.info() != Eigen::Success)
                throw solver_error("solve_linear_sdp: dual slack lost positive definiteness");
            sinv[s] = llt.solve(CMat::Identity(h[s], h[s]));
            sinv[s] = (0.5 * (sinv[s] + sinv[s].adjoint())).eval();
        }

        double gap = 0.0, obj_norm = 0.0;
        for (int s = 0; s < 2; ++s) {
            gap += real_inner(v[s], slack[s]);
            obj_norm += real_inner(v[s], cost_red[s]);
        }
        const double mu = gap / n_dim;
        if (scale * gap <= 0.25 * prob.tol * (1.0 + scale * std::abs(obj_norm)) || mu < 1e-15) {
            sol.status = SdpStatus::optimal;
            sol.log.push_back({iter, mu, gap, obj_norm, 0.0, 0.0});
            break;
        }

        // Schur complement over the constraint multipliers. It is symmetric
        // positive definite; Jacobi equilibration plus one refinement pass
        // keeps the solves accurate once the iterates near the boundary.
        RMat m = RMat::Zero(m_rows, m_rows);
        for (int i = 0; i < m_rows; ++i)
            for (int j = 0; j < m_rows; ++j) {
                double acc = 0.0;
                for (int s = 0; s < 2; ++s) {
                    const int p = slot_of(rows[i], s);
                    const int q = slot_of(rows[j], s);
                    if (p >= 0 && q >= 0) acc += (v[s](p, q) * sinv[s](q, p)).real();
                }
                m(i, j) = acc;
            }
        const RVec dj = m.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
        Eigen::LDLT<RMat> mfac((dj.asDiagonal() * m * dj.asDiagonal()).eval());
        const auto msolve = [&](const RVec& rhs) {
            RVec x = dj.asDiagonal() * mfac.solve((dj.asDiagonal() * rhs).eval());
            x += dj.asDiagonal() * mfac.solve((dj.asDiagonal() * (rhs - m * x)).eval());
            return x;
        };

        // HKM direction for a given complementarity residual R: solve
        // A(Herm((R - V dS) S^{-1})) = 0 for the multiplier step, then back
        // out dS (diagonal) and dV.
        const auto direction = [&](const std::array<CMat, 2>& rmat, RVec& dnu_out,
                                   std::array<RVec, 2>& dshift_out, std::array<CMat, 2>& dv_out) {
            RVec rhs = RVec::Zero(m_rows);
            for (int i = 0; i < m_rows; ++i) {
                double acc = 0.0;
                for (int s = 0; s < 2; ++s) {
                    const int p = slot_of(rows[i], s);
                    if (p >= 0) acc += (rmat[s].row(p) * sinv[s].col(p)).value().real();
                }
                rhs(i) = acc;
            }
            dnu_out = msolve(rhs);
            for (int s = 0; s < 2; ++s) {
                RVec shift = RVec::Zero(h[s]);
                for (int i = 0; i < m_rows; ++i) {
                    const int p = slot_of(rows[i], s);
                    if (p >= 0) shift(p) += dnu_out(i);
                }
                dshift_out[s] = shift;
                const CMat dv = (rmat[s] - v[s] * shift.cast<cx>().asDiagonal()) * sinv[s];
                dv_out[s] = (0.5 * (dv + dv.adjoint())).eval();
            }
        };

        // Predictor: pure affine step, used only to pick the centering weight.
        std::array<CMat, 2> r_aff;
        for (int s = 0; s < 2; ++s) r_aff[s] = -(v[s] * slack[s]);
        RVec dnu_aff;
        std::array<RVec, 2> dshift_aff;
        std::array<CMat, 2> dv_aff;
        direction(r_aff, dnu_aff, dshift_aff, dv_aff);
        double alpha_aff = 1.0;
        for (int s = 0; s < 2; ++s) {
            alpha_aff = std::min(alpha_aff, detail::max_pd_step(v[s], dv_aff[s]));
            alpha_aff = std::min(alpha_aff, detail::max_pd_step(
                                                slack[s], CMat(dshift_aff[s].cast<cx>().asDiagonal())));
        }
        double gap_aff = 0.0;
        for (int s = 0; s < 2; ++s) {
            const CMat vn = v[s] + alpha_aff * dv_aff[s];
            CMat sn = slack[s];
            sn.diagonal() += alpha_aff * dshift_aff[s].cast<cx>();
            gap_aff += real_inner(vn, sn);
        }
        gap_aff = std::max(gap_aff, 0.0);
        const double sigma = std::min(0.8, std::max(1e-4, std::pow(gap_aff / gap, 3)));

        // Corrector: recentered step with the Mehrotra second-order term.
        std::array<CMat, 2> r_cor;
        for (int s = 0; s < 2; ++s) {
            r_cor[s] = -(v[s] * slack[s]) - dv_aff[s] * dshift_aff[s].cast<cx>().asDiagonal();
            r_cor[s].diagonal().array() += cx(sigma * mu, 0.0);
        }
        RVec dnu;
        std::array<RVec, 2> dshift;
        std::array<CMat, 2> dv;
        direction(r_cor, dnu, dshift, dv);
        double alpha_p = 1.0, alpha_d = 1.0;
        for (int s = 0; s < 2; ++s) {
            alpha_p = std::min(alpha_p, detail::max_pd_step(v[s], dv[s]));
            alpha_d = std::min(alpha_d,
                               detail::max_pd_step(slack[s], CMat(dshift[s].cast<cx>().asDiagonal())));
        }
        alpha_p = std::min(1.0, 0.985 * alpha_p);
        alpha_d = std::min(1.0, 0.985 * alpha_d);
        sol.log.push_back({iter, mu, gap, obj_norm, sigma, std::min(alpha_p, alpha_d)});
        if (alpha_p <= 1e-10 && alpha_d <= 1e-10) break;  // stalled; report what we have

        for (int s = 0; s < 2; ++s) {
            v[s] = (v[s] + alpha_p * dv[s]).eval();
            v[s] = (0.5 * (v[s] + v[s].adjoint())).eval();
        }
        repin_diag(v);
        nu += alpha_d * dnu;
        slack = slack_of(nu);
        ++sol.newton_iterations;
    }

    // Scatter to full size, recover splits and duals.
    for (int s = 0; s < 2; ++s) {
        sol.v[s] = CMat::Zero(n + 1, n + 1);
        for (int a = 0; a < h[s]; ++a)
            for (int b = 0; b < h[s]; ++b) sol.v[s](keep[s][a], keep[s][b]) = v[s](a, b);
        sol.rho[s] = sol.v[s].diagonal().head(n).real();
        sol.dual_diag[s] = RVec::Zero(n + 1);
        for (int i = 0; i < m_rows; ++i) {
            const int p = slot_of(rows[i], s);
            if (p >= 0) sol.dual_diag[s](keep[s][p]) += scale * nu(i);
        }
    }
    {
        double obj_norm = 0.0;
        for (int s = 0; s < 2; ++s) obj_norm += real_inner(v[s], cost_red[s]);
        sol.objective = scale * obj_norm;
    }

    // KKT summary in the complex domain at true scale.
    {
        double prim = 0.0, box = 0.0;
        double min_eig = std::numeric_limits<double>::infinity();
        double dual_min = std::numeric_limits<double>::infinity();
        double comp = 0.0;
        for (int s = 0; s < 2; ++s) {
            prim = std::max(prim, std::abs(sol.v[s](n, n).real() - 1.0));
            for (int i = 0; i < n; ++i) {
                const double rho_t = sol.rho[0](i);
                const double rho_r = sol.rho[1](i);
                if (prob.fixed_rho_t) {
                    prim = std::max(prim, std::abs(rho_t - (*prob.fixed_rho_t)(i)));
                    prim = std::max(prim, std::abs(rho_r - (1.0 - (*prob.fixed_rho_t)(i))));
                } else {
                    prim = std::max(prim, std::abs(rho_t + rho_r - 1.0));
                }
                box = std::max(box, std::max(0.0, sol.rho[s](i) - 1.0));
                box = std::max(box, std::max(0.0, -sol.rho[s](i)));
            }
            CMat red(h[s], h[s]);
            for (int a = 0; a < h[s]; ++a)
                for (int b = 0; b < h[s]; ++b) red(a, b) = sol.v[s](keep[s][a], keep[s][b]);
            Eigen::SelfAdjointEigenSolver<CMat> eig(red, Eigen::EigenvaluesOnly);
            min_eig = std::min(min_eig, eig.eigenvalues().minCoeff());

            CMat dual = (0.5 * (prob.cost[s] + prob.cost[s].adjoint())).eval();
            if (prob.rho_cost[s].size() > 0)
                for (int i2 = 0; i2 < n; ++i2) dual(i2, i2) += prob.rho_cost[s](i2);
            dual.diagonal() += sol.dual_diag[s].cast<cx>();
            CMat dual_red(h[s], h[s]);
            for (int a = 0; a < h[s]; ++a)
                for (int b = 0; b < h[s]; ++b) dual_red(a, b) = dual(keep[s][a], keep[s][b]);
            Eigen::SelfAdjointEigenSolver<CMat> deig(dual_red, Eigen::EigenvaluesOnly);
            dual_min = std::min(dual_min, deig.eigenvalues().minCoeff());
            comp += (dual_red * red).trace().real();
        }
        sol.kkt.primal_residual = prim;
        sol.kkt.psd_min_eig = min_eig;
        sol.kkt.box_violation = box;
        sol.kkt.dual_min_eig = dual_min;
        sol.kkt.complementarity = std::abs(comp);
        sol.kkt.cost_scale = scale;
    }

    if (dump) {
        *dump << "iter mu gap objective sigma step\n";
        for (const auto& row : sol.log)
            *dump << row.iteration << ' ' << row.mu << ' ' << row.gap << ' ' << row.objective
                  << ' ' << row.sigma << ' ' << row.step << '\n';
    }
    return sol;
}

// Recomputes the KKT summary for an arbitrary candidate (used by tests and by
// forensic checks on solver output). Dual-side quantities require duals.
inline SdpKkt kkt_residuals(const LinearSdpProblem& prob, const std::array<CMat, 2>& v,
                            const std::optional<std::array<RVec, 2>>& dual_diag = std::nullopt) {
    const int n = prob.n_elements();
    SdpKkt kkt;
    double prim = 0.0, box = 0.0;
    double min_eig = std::numeric_limits<double>::infinity();
    for (int s = 0; s < 2; ++s) {
        require(v[s].rows() == n + 1 && v[s].cols() == n + 1, "kkt_residuals: block size mismatch");
        prim = std::max(prim, std::abs(v[s](n, n).real() - 1.0));
        for (int i = 0; i < n; ++i) {
            const double rho = v[s](i, i).real();
            box = std::max(box, std::max(0.0, rho - 1.0));
            box = std::max(box, std::max(0.0, -rho));
        }
        Eigen::SelfAdjointEigenSolver<CMat> eig(v[s], Eigen::EigenvaluesOnly);
        min_eig = std::min(min_eig, eig.eigenvalues().minCoeff());
    }
    for (int i = 0; i < n; ++i) {
        const double rho_t = v[0](i, i).real();
        const double rho_r = v[1](i, i).real();
        if (prob.fixed_rho_t) {
            prim = std::max(prim, std::abs(rho_t - (*prob.fixed_rho_t)(i)));
            prim = std::max(prim, std::abs(rho_r - (1.0 - (*prob.fixed_rho_t)(i))));
        } else {
            prim = std::max(prim, std::abs(rho_t + rho_r - 1.0));
        }
    }
    kkt.primal_residual = prim;
    kkt.psd_min_eig = min_eig;
    kkt.box_violation = box;
    kkt.cost_scale = 1.0;
    for (int s = 0; s < 2; ++s) {
        kkt.cost_scale = std::max(kkt.cost_scale, prob.cost[s].cwiseAbs().maxCoeff());
        if (prob.rho_cost[s].size() > 0)
            kkt.cost_scale = std::max(kkt.cost_scale, prob.rho_cost[s].cwiseAbs().maxCoeff());
    }
    if (dual_diag) {
        double dual_min = std::numeric_limits<double>::infinity();
        double comp = 0.0;
        for (int s = 0; s < 2; ++s) {
            CMat dual = (0.5 * (prob.cost[s] + prob.cost[s].adjoint())).eval();
            if (prob.rho_cost[s].size() > 0)
                for (int i = 0; i < n; ++i) dual(i, i) += prob.rho_cost[s](i);
            dual.diagonal() += (*dual_diag)[static_cast<std::size_t>(s)].cast<cx>();
            Eigen::SelfAdjointEigenSolver<CMat> deig(dual, Eigen::EigenvaluesOnly);
            dual_min = std::min(dual_min, deig.eigenvalues().minCoeff());
            comp += (dual * v[s]).trace().real();
        }
        kkt.dual_min_eig = dual_min;
        kkt.complementarity = std::abs(comp);
    } else {
        kkt.dual_min_eig = 0.0;
        kkt.complementarity = 0.0;
    }
    return kkt;
}

}  // namespace starbeam

#endif
