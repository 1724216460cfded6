// SPDX-License-Identifier: Apache-2.0
//
// Penalty route for the surface-coefficient subproblem. Each side's
// coefficient vector is lifted to a rank-one-constrained PSD matrix over the
// augmented vector [v; sqrt(t)]; the rank-one constraint is relaxed into a
// penalized difference of nuclear and spectral norms, convexified by
// linearizing the spectral norm at the incumbent, and the resulting linear
// SDP sequence is driven by a growing penalty weight until the lift is
// numerically rank one. Mode selection adds a concave binary penalty on the
// splits, linearized the same way.
#ifndef STARBEAM_TRC_PEN_HPP
#define STARBEAM_TRC_PEN_HPP

#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "starbeam/sdp.hpp"
#include "starbeam/system_model.hpp"
#include "starbeam/trc_quadratic.hpp"
#include "starbeam/types.hpp"

namespace starbeam {

// Pins element splits during the update; used by the constrained baselines.
struct TrcConstraintMask {
    std::optional<RVec> fixed_rho_t;
};

// Working state of the penalized lift: bordered cost blocks, current lift
// matrices, their diagonals, and the penalty weights.
struct AugmentedLift {
    std::array<CMat, 2> f_bar;    // (N+1) x (N+1) bordered quadratic per side
    std::array<CMat, 2> v;        // current lift iterate per side
    std::array<RVec, 2> rho_bar;  // lift diagonals
    double mu = 1e-4;             // rank-one penalty weight
    double chi = 1e-4;            // binary penalty weight (mode selection only)

    int n() const { return static_cast<int>(f_bar[0].rows()) - 1; }
};

// Borders the quadratic form so that v^H F v - 2 Re(e^T v) = tr(F_bar V) for
// V the lift of [v; 1].
inline AugmentedLift lift_augmented(const TrcQuadratic& q) {
    AugmentedLift lift;
    const int n = q.n();
    for (int s = 0; s < 2; ++s) {
        CMat fb = CMat::Zero(n + 1, n + 1);
        fb.topLeftCorner(n, n) = 0.5 * (q.f[s] + q.f[s].adjoint());
        fb.topRightCorner(n, 1) = -q.e[s].conjugate();
        fb.bottomLeftCorner(1, n) = -q.e[s].transpose();
        lift.f_bar[s] = fb;
        lift.rho_bar[s] = RVec::Zero(n + 1);
    }
    return lift;
}

// Lift of an explicit coefficient state (the PEN warm start).
inline std::array<CMat, 2> lift_of_state(const TrcState& trc) {
    std::array<CMat, 2> v;
    for (Side s : {Side::t, Side::r}) {
        const int n = trc.n();
        CVec aug(n + 1);
        aug.head(n) = trc.v(s);
        aug(n) = cx(1.0, 0.0);
        v[side_index(s)] = aug * aug.adjoint();
    }
    return v;
}

// Rank-one gap of a PSD matrix, nuclear norm minus spectral norm.
inline double rank_one_violation(const CMat& v) {
    Eigen::SelfAdjointEigenSolver<CMat> eig(v, Eigen::EigenvaluesOnly);
    const RVec ev = eig.eigenvalues();
    return ev.cwiseAbs().sum() - ev.cwiseAbs().maxCoeff();
}

// Affine majorant of the rank-one gap obtained by linearizing the spectral
// norm at a reference lift: value_at(V) = ||V||_* - ||V_ref||_2
//                                        - d_max^H (V - V_ref) d_max.
// On the PSD cone this equals tr(V (I - d d^H)) + offset and always dominates
// the true gap.
struct RankSurrogate {
    CVec d_max;     // unit top eigenvector of the reference
    double offset;  // d_max^H V_ref d_max - ||V_ref||_2 (zero for PSD references)

    CMat cost_matrix() const {
        const Eigen::Index n = d_max.size();
        return CMat::Identity(n, n) - d_max * d_max.adjoint();
    }
    double value_at(const CMat& v) const {
        Eigen::SelfAdjointEigenSolver<CMat> eig(v, Eigen::EigenvaluesOnly);
        const double nuclear = eig.eigenvalues().cwiseAbs().sum();
        return nuclear - (d_max.adjoint() * v * d_max).value().real() + offset;
    }
};

inline RankSurrogate sca_rank_surrogate(const CMat& v_ref) {
    Eigen::SelfAdjointEigenSolver<CMat> eig(v_ref);
    const Eigen::Index top = v_ref.rows() - 1;
    RankSurrogate s;
    s.d_max = eig.eigenvectors().col(top);
    const double spectral = eig.eigenvalues().cwiseAbs().maxCoeff();
    s.offset = (s.d_max.adjoint() * v_ref * s.d_max).value().real() - spectral;
    return s;
}

// Affine majorant of the concave binary penalty rho (1 - rho) at a reference
// split: g(rho) = (1 - 2 rho_ref) rho + rho_ref^2.
struct BinarySurrogate {
    double slope = 1.0;
    double offset = 0.0;
    double value_at(double rho) const { return slope * rho + offset; }
};

inline BinarySurrogate sca_binary_surrogate(double rho_ref) {
    return BinarySurrogate{1.0 - 2.0 * rho_ref, rho_ref * rho_ref};
}

struct PenConfig {
    double eps_sca = 1e-2;     // inner stop: fractional surrogate decrease
    double eps_p = 1e-5;       // outer stop: rank-one violation
    double mu0 = 1e-4;         // initial rank penalty
    double chi0 = 1e-4;        // initial binary penalty (mode selection)
    double omega = 10.0;       // rank penalty growth
    double varpi = 10.0;       // binary penalty growth
    int n_in = 30;             // inner iteration cap
    int n_out = 30;            // outer iteration cap
    double sdp_tol = 1e-7;
    double ms_round_tol = 1e-3;     // binariness required before rounding
    double extraction_gate = 1e-2;  // worst violation still accepted for extraction
};

struct SubproblemResult {
    std::array<CMat, 2> v;
    std::array<RVec, 2> rho;
    double objective = 0.0;      // surrogate objective including penalty terms
    double sdp_objective = 0.0;  // linear objective of the solved SDP
    SdpKkt kkt;
};

namespace detail {

inline double subproblem_objective(const AugmentedLift& lift, Protocol protocol,
                                   const std::array<RankSurrogate, 2>& rank_sur,
                                   const std::array<std::vector<BinarySurrogate>, 2>& bin_sur,
                                   const std::array<CMat, 2>& v) {
    double obj = 0.0;
    for (int s = 0; s < 2; ++s) {
        obj += (lift.f_bar[s] * v[s]).trace().real();
        obj += lift.mu * rank_sur[s].value_at(v[s]);
        if (protocol == Protocol::ms)
            for (std::size_t i = 0; i < bin_sur[s].size(); ++i)
                obj += lift.chi * bin_sur[s][i].value_at(v[s](static_cast<int>(i),
                                                              static_cast<int>(i)).real());
    }
    return obj;
}

}  // namespace detail

// One convexified subproblem: linearize the penalties at the reference lift,
// assemble the linear SDP and solve it warm-started from the reference. If
// the solver result is no better than the reference under the same surrogate
// (possible at its tolerance), the reference is kept, so the inner objective
// sequence never increases.
inline SubproblemResult solve_sdp_subproblem(const AugmentedLift& lift, Protocol protocol,
                                             const std::array<CMat, 2>& v_ref,
                                             const TrcConstraintMask& mask, double tol) {
    const int n = lift.n();
    std::array<RankSurrogate, 2> rank_sur;
    std::array<std::vector<BinarySurrogate>, 2> bin_sur;
    LinearSdpProblem prob;
    prob.tol = tol;
    prob.fixed_rho_t = mask.fixed_rho_t;
    for (int s = 0; s < 2; ++s) {
        rank_sur[s] = sca_rank_surrogate(v_ref[s]);
        prob.cost[s] = lift.f_bar[s] + lift.mu * rank_sur[s].cost_matrix();
        prob.rho_cost[s] = RVec();
        if (protocol == Protocol::ms) {
            RVec rc(n);
            bin_sur[s].reserve(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) {
                const BinarySurrogate b = sca_binary_surrogate(v_ref[s](i, i).real());
                bin_sur[s].push_back(b);
                rc(i) = lift.chi * b.slope;
            }
            prob.rho_cost[s] = rc;
        }
    }

    const SdpSolution sol = solve_linear_sdp(prob, v_ref);
    SubproblemResult out;
    out.kkt = sol.kkt;
    out.sdp_objective = sol.objective;
    const double obj_solved =
        detail::subproblem_objective(lift, protocol, rank_sur, bin_sur, sol.v);
    const double obj_ref = detail::subproblem_objective(lift, protocol, rank_sur, bin_sur, v_ref);
    if (obj_solved <= obj_ref) {
        out.v = sol.v;
        out.rho = sol.rho;
        out.objective = obj_solved;
    } else {
        out.v = v_ref;
        for (int s = 0; s < 2; ++s) out.rho[s] = v_ref[s].diagonal().head(n).real();
        out.objective = obj_ref;
    }
    return out;
}

// Recovers a coefficient state from a (near) rank-one lift: top eigenpair,
// global phase normalized on the auxiliary entry, amplitudes clipped into
// [0, 1] and repaired to an exact unit energy split.
inline TrcState extract_trc_from_lift(const std::array<CMat, 2>& v, Protocol protocol,
                                      double gate) {
    const int n = static_cast<int>(v[0].rows()) - 1;
    for (int s = 0; s < 2; ++s) {
        const double viol = rank_one_violation(v[s]);
        if (!(viol < gate))
            throw solver_error("extract_trc_from_lift: rank-one violation above gate");
    }
    std::array<CVec, 2> coeff;
    for (int s = 0; s < 2; ++s) {
        Eigen::SelfAdjointEigenSolver<CMat> eig(v[s]);
        const Eigen::Index top = v[s].rows() - 1;
        const double lam = std::max(eig.eigenvalues()(top), 0.0);
        CVec vec = std::sqrt(lam) * eig.eigenvectors().col(top);
        const cx tail = vec(n);
        if (std::abs(tail) < 1e-6)
            throw solver_error("extract_trc_from_lift: vanishing auxiliary entry");
        vec *= std::conj(tail) / std::abs(tail);  // rotate the auxiliary entry real positive
        coeff[s] = vec.head(n);
    }
    TrcState trc;
    trc.protocol = protocol;
    trc.v_t.resize(n);
    trc.v_r.resize(n);
    for (int i = 0; i < n; ++i) {
        double rho_t = std::min(std::max(std::norm(coeff[0](i)), 0.0), 1.0);
        double rho_r = std::min(std::max(std::norm(coeff[1](i)), 0.0), 1.0);
        const double sum = rho_t + rho_r;
        if (sum > 1e-300) {
            rho_t /= sum;  // repair to an exact unit split
            rho_r = 1.0 - rho_t;
        } else {
            rho_t = 0.5;
            rho_r = 0.5;
        }
        const double th_t = (std::abs(coeff[0](i)) > 0.0) ? std::arg(coeff[0](i)) : 0.0;
        const double th_r = (std::abs(coeff[1](i)) > 0.0) ? std::arg(coeff[1](i)) : 0.0;
        trc.v_t(i) = std::polar(std::sqrt(rho_t), canonical_phase(th_t));
        trc.v_r(i) = std::polar(std::sqrt(rho_r), canonical_phase(th_r));
    }
    return trc;
}

struct PenDiagnostics {
    int outer_iterations = 0;
    int inner_solves = 0;
    double exit_violation = 0.0;
    bool converged = false;
    bool warning = false;             // caps exhausted or extraction rejected
    bool kept_warm_start = false;     // candidate did not improve on the incumbent
    double max_kkt_residual = 0.0;
    double max_inner_increase = 0.0;  // worst observed inner objective increase
    std::vector<double> outer_violations;
};

struct PenResult {
    TrcState trc;
    PenDiagnostics diag;
};

namespace detail {

inline PenResult pen_impl(const TrcQuadratic& q, Protocol protocol, const PenConfig& cfg,
                          const TrcState& warm, const TrcConstraintMask& mask) {
    require(q.n() == warm.n(), "pen: quadratic/state size mismatch");
    AugmentedLift lift = lift_augmented(q);
    lift.mu = cfg.mu0;
    lift.chi = cfg.chi0;
    std::array<CMat, 2> v = lift_of_state(warm);
    const int n = q.n();

    PenResult result;
    result.trc = warm;
    auto& diag = result.diag;

    const auto binary_violation = [&](const std::array<CMat, 2>& x) {
        double dev = 0.0;
        for (int s = 0; s < 2; ++s)
            for (int i = 0; i < n; ++i) {
                const double rho = x[s](i, i).real();
                dev = std::max(dev, std::min(std::abs(rho), std::abs(1.0 - rho)));
            }
        return dev;
    };

    double violation = std::max(rank_one_violation(v[0]), rank_one_violation(v[1]));
    for (int outer = 0; outer < cfg.n_out; ++outer) {
        ++diag.outer_iterations;
        double obj_prev = std::numeric_limits<double>::infinity();
        for (int inner = 0; inner < cfg.n_in; ++inner) {
            const SubproblemResult sub = solve_sdp_subproblem(lift, protocol, v, mask, cfg.sdp_tol);
            ++diag.inner_solves;
            // The gap term in the residual is relative to the objective of
            // the SDP the solver saw, not the surrogate value (which differs
            // by the linearization constants).
            diag.max_kkt_residual =
                std::max(diag.max_kkt_residual, sub.kkt.worst(sub.sdp_objective));
            if (std::isfinite(obj_prev))
                diag.max_inner_increase = std::max(diag.max_inner_increase, sub.objective - obj_prev);
            v = sub.v;
            for (int s = 0; s < 2; ++s) lift.rho_bar[s] = sub.v[s].diagonal().real();
            const bool converged_inner =
                std::isfinite(obj_prev) &&
                (obj_prev - sub.objective) < cfg.eps_sca * std::max(std::abs(obj_prev), 1e-12);
            obj_prev = sub.objective;
            if (converged_inner) break;
        }
        violation = std::max(rank_one_violation(v[0]), rank_one_violation(v[1]));
        diag.outer_violations.push_back(violation);
        const bool binary_ok =
            protocol != Protocol::ms || binary_violation(v) < cfg.ms_round_tol;
        if (violation < cfg.eps_p && binary_ok) {
            diag.converged = true;
            break;
        }
        lift.mu *= cfg.omega;
        if (protocol == Protocol::ms) lift.chi *= cfg.varpi;
    }
    diag.exit_violation = violation;
    if (!diag.converged) diag.warning = true;

    TrcState candidate = warm;
    bool have_candidate = false;
    if (violation < cfg.extraction_gate) {
        try {
            candidate = extract_trc_from_lift(v, protocol, cfg.extraction_gate);
            have_candidate = true;
        } catch (const solver_error&) {
            diag.warning = true;
        }
    } else {
        diag.warning = true;
    }

    if (have_candidate && protocol == Protocol::ms) {
        // Round the splits to exact modes, keep the extracted phases.
        for (int i = 0; i < n; ++i) {
            const double rho_t = std::norm(candidate.v_t(i));
            const double rounded = (rho_t >= 0.5) ? 1.0 : 0.0;
            if (std::abs(rho_t - rounded) > cfg.ms_round_tol) diag.warning = true;
            const double th_t = std::arg(candidate.v_t(i));
            const double th_r = std::arg(candidate.v_r(i));
            candidate.v_t(i) = std::polar(std::sqrt(rounded), canonical_phase(th_t));
            candidate.v_r(i) = std::polar(std::sqrt(1.0 - rounded), canonical_phase(th_r));
        }
    }
    if (have_candidate && mask.fixed_rho_t) {
        // Baseline-pinned splits are restored exactly; only phases move.
        for (int i = 0; i < n; ++i) {
            const double rho_t = (*mask.fixed_rho_t)(i);
            candidate.v_t(i) = std::polar(std::sqrt(rho_t), std::arg(candidate.v_t(i)));
            candidate.v_r(i) = std::polar(std::sqrt(1.0 - rho_t), std::arg(candidate.v_r(i)));
        }
    }

    // Monotone safeguard: never hand back something worse than the incumbent.
    if (have_candidate &&
        trc_objective(q, candidate) <= trc_objective(q, warm) + 1e-12 * (1.0 + std::abs(trc_objective(q, warm)))) {
        result.trc = candidate;
    } else {
        result.trc = warm;
        diag.kept_warm_start = true;
    }
    return result;
}

}  // namespace detail

// Penalized-lift update under energy splitting.
inline PenResult pen_es(const TrcQuadratic& q, const PenConfig& cfg, const TrcState& warm,
                        const TrcConstraintMask& mask = {}) {
    require(warm.protocol == Protocol::es, "pen_es: state is not energy splitting");
    return detail::pen_impl(q, Protocol::es, cfg, warm, mask);
}

// Penalized-lift update under mode selection (adds the binary penalty and
// final rounding).
inline PenResult pen_ms(const TrcQuadratic& q, const PenConfig& cfg, const TrcState& warm,
                        const TrcConstraintMask& mask = {}) {
    require(warm.protocol == Protocol::ms, "pen_ms: state is not mode selection");
    return detail::pen_impl(q, Protocol::ms, cfg, warm, mask);
}

}  // namespace starbeam

#endif
