// SPDX-License-Identifier: Apache-2.0
//
// Block updates of the weighted-MSE reformulation: closed-form combiners and
// weights, and the power-constrained precoder solve via its Lagrangian dual.
#ifndef STARBEAM_WMMSE_HPP
#define STARBEAM_WMMSE_HPP

#include <cmath>
#include <vector>

#include "starbeam/system_model.hpp"
#include "starbeam/types.hpp"

namespace starbeam {

// MMSE receive combiners, U_k = (sum_l P_l P_l^H + sigma^2 I)^{-1} P_k with
// P_l the l-th stream set through user k's effective channel.
inline std::vector<CMat> update_combiners(const ChannelSet& channels, const TrcState& trc,
                                          const BeamformerSet& w) {
    require(static_cast<int>(w.w.size()) == channels.k(), "update_combiners: size mismatch");
    std::vector<CMat> u;
    u.reserve(w.w.size());
    for (int k = 1; k <= channels.k(); ++k) {
        const CMat hbar = user_aggregate_channel(channels, trc, k);
        CMat cov = channels.noise_power * CMat::Identity(hbar.rows(), hbar.rows());
        for (int l = 1; l <= channels.k(); ++l) {
            const CMat p = hbar * w.w[static_cast<std::size_t>(l - 1)];
            cov.noalias() += p * p.adjoint();
        }
        Eigen::LLT<CMat> llt(cov);
        if (llt.info() != Eigen::Success)
            throw solver_error("update_combiners: received covariance not positive definite");
        u.push_back(llt.solve(hbar * w.w[static_cast<std::size_t>(k - 1)]));
    }
    return u;
}

// Optimal weights Z_k, the inverse of the MSE matrix at the given combiners.
inline std::vector<CMat> update_weights(const ChannelSet& channels, const TrcState& trc,
                                        const BeamformerSet& w, const std::vector<CMat>& u) {
    require(u.size() == w.w.size(), "update_weights: size mismatch");
    std::vector<CMat> z;
    z.reserve(u.size());
    for (int k = 1; k <= channels.k(); ++k) {
        CMat e = mse_matrix(k, u[static_cast<std::size_t>(k - 1)], channels, trc, w);
        e = 0.5 * (e + e.adjoint()).eval();  // enforce Hermitian symmetry before inversion
        Eigen::LLT<CMat> llt(e);
        if (llt.info() != Eigen::Success)
            throw solver_error("update_weights: MSE matrix not positive definite");
        z.push_back(llt.solve(CMat::Identity(e.rows(), e.cols())));
    }
    return z;
}

// Quadratic form of the precoder subproblem,
//   min_W sum_k tr(W_k^H A W_k) - 2 Re tr(B_k W_k)  s.t.  sum_k ||W_k||_F^2 <= P.
struct ActiveBeamformingProblem {
    CMat a;               // M_b x M_b, Hermitian positive semidefinite
    std::vector<CMat> b;  // M x M_b per user
    double power_budget = 0.0;
};

inline ActiveBeamformingProblem build_quadratic_forms(const ChannelSet& channels,
                                                      const TrcState& trc,
                                                      const std::vector<CMat>& u,
                                                      const std::vector<CMat>& z,
                                                      const PriorityWeights& eta,
                                                      double power_budget) {
    require(static_cast<int>(u.size()) == channels.k() && u.size() == z.size(),
            "build_quadratic_forms: state size mismatch");
    require(eta.size() == channels.k(), "build_quadratic_forms: weight count mismatch");
    ActiveBeamformingProblem prob;
    prob.power_budget = power_budget;
    prob.b.reserve(u.size());
    CMat a;
    for (int k = 1; k <= channels.k(); ++k) {
        const std::size_t i = static_cast<std::size_t>(k - 1);
        const CMat hbar = user_aggregate_channel(channels, trc, k);
        const CMat uzh = u[i] * z[i] * u[i].adjoint();
        if (k == 1)
            a = eta(k - 1) * hbar.adjoint() * uzh * hbar;
        else
            a.noalias() += eta(k - 1) * hbar.adjoint() * uzh * hbar;
        prob.b.push_back(eta(k - 1) * z[i] * u[i].adjoint() * hbar);
    }
    prob.a = 0.5 * (a + a.adjoint());
    return prob;
}

struct ActiveBeamformingSolution {
    BeamformerSet set;
    double lambda = 0.0;  // dual variable of the power constraint
};

// Solves the precoder subproblem exactly. The stationarity condition gives
// W_k(lambda) = (A + lambda I)^{-1} B_k^H; the transmit power is strictly
// decreasing in lambda, so either the (ridge-regularized) unconstrained
// solution already meets the budget or the unique lambda with active power
// constraint is found by bisection. Working in A's eigenbasis makes each
// power evaluation closed-form.
inline ActiveBeamformingSolution active_beamforming(const ActiveBeamformingProblem& prob,
                                                    double tol = 1e-12) {
    const Eigen::Index mb = prob.a.rows();
    require(prob.a.cols() == mb, "active_beamforming: A must be square");
    require(prob.power_budget >= 0.0, "active_beamforming: negative power budget");
    ActiveBeamformingSolution sol;
    sol.set.power_budget = prob.power_budget;

    if (prob.power_budget == 0.0) {
        for (const auto& bk : prob.b) sol.set.w.push_back(CMat::Zero(mb, bk.rows()));
        return sol;
    }

    Eigen::SelfAdjointEigenSolver<CMat> eig(prob.a);
    if (eig.info() != Eigen::Success)
        throw solver_error("active_beamforming: eigendecomposition failed");
    const RVec d = eig.eigenvalues().cwiseMax(0.0);  // A is PSD; clip rounding noise
    const CMat& q = eig.eigenvectors();

    // Rotated right-hand sides T_k = Q^H B_k^H and per-eigendirection weights.
    std::vector<CMat> t;
    t.reserve(prob.b.size());
    RVec s = RVec::Zero(mb);
    for (const auto& bk : prob.b) {
        t.push_back(q.adjoint() * bk.adjoint());
        s += t.back().rowwise().squaredNorm();
    }

    const auto power_at = [&](double lambda) {
        double p = 0.0;
        for (Eigen::Index i = 0; i < mb; ++i) {
            const double den = d(i) + lambda;
            p += s(i) / (den * den);
        }
        return p;
    };
    const auto assemble = [&](double lambda) {
        sol.lambda = lambda;
        sol.set.w.clear();
        for (std::size_t k = 0; k < t.size(); ++k) {
            CMat scaled = t[k];
            for (Eigen::Index i = 0; i < mb; ++i) scaled.row(i) /= d(i) + lambda;
            sol.set.w.push_back(q * scaled);
        }
    };

    // Unconstrained branch, with a tiny ridge so a singular A stays solvable.
    const double ridge = 1e-12 * d.cwiseMax(0.0).sum() / static_cast<double>(mb) + 1e-18;
    if (power_at(ridge) <= prob.power_budget) {
        assemble(ridge);
        sol.lambda = 0.0;
        return sol;
    }

    double lo = ridge;
    double hi = std::max(1.0, ridge * 2.0);
    while (power_at(hi) > prob.power_budget) {
        hi *= 4.0;
        require(std::isfinite(hi), "active_beamforming: bisection bracket diverged");
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (power_at(mid) > prob.power_budget)
            lo = mid;
        else
            hi = mid;
        if (std::abs(power_at(hi) - prob.power_budget) <= tol * prob.power_budget) break;
        if (hi - lo <= 1e-16 * hi) break;
    }
    assemble(hi);  // upper end keeps the power feasible
    return sol;
}

}  // namespace starbeam

#endif
