// SPDX-License-Identifier: Apache-2.0
//
// Outer block-coordinate descent for joint active/passive beamforming.
// Each iteration updates combiners and weights in closed form, re-solves the
// power-constrained precoder, then improves the surface coefficients with
// either the penalty/SDP route or the element-wise closed-form route. Every
// block update is non-decreasing in the surrogate objective, so the weighted
// sum rate traced per iteration is monotone.
#ifndef STARBEAM_BCD_HPP
#define STARBEAM_BCD_HPP

#include <chrono>
#include <string>
#include <vector>

#include "starbeam/channel.hpp"
#include "starbeam/system_model.hpp"
#include "starbeam/trc_ele.hpp"
#include "starbeam/trc_pen.hpp"
#include "starbeam/trc_quadratic.hpp"
#include "starbeam/types.hpp"
#include "starbeam/wmmse.hpp"

namespace starbeam {

enum class Algorithm { pen, ele };

inline const char* algorithm_tag(Algorithm a) { return a == Algorithm::pen ? "pen" : "ele"; }

// Surface operating modes compared in the experiments. The full surface
// serves both half-spaces; the legacy variant pins half the elements to each
// side; the uniform variant freezes an even energy split; the far-field
// variant designs against a planar-wavefront approximation of the channels.
enum class BaselineKind { star_ris, conventional_ris, uniform_es, far_field_design };

inline const char* baseline_tag(BaselineKind b) {
    switch (b) {
        case BaselineKind::star_ris: return "star_ris";
        case BaselineKind::conventional_ris: return "conventional_ris";
        case BaselineKind::uniform_es: return "uniform_es";
        default: return "far_field_design";
    }
}

struct BaselineSetup {
    TrcConstraintMask mask;
    TrcState init;
};

// Pin amplitudes required by the selected baseline while keeping the phases
// of the provided initial state. The far-field variant constrains nothing
// here; it differs only in the channels handed to the optimizer.
inline BaselineSetup apply_baseline_constraints(BaselineKind kind, TrcState init) {
    BaselineSetup out;
    const int n = init.n();
    if (kind == BaselineKind::conventional_ris) {
        RVec pin(n);
        const int n_t = (n + 1) / 2;
        for (int i = 0; i < n; ++i) pin(i) = i < n_t ? 1.0 : 0.0;
        out.mask.fixed_rho_t = pin;
    } else if (kind == BaselineKind::uniform_es) {
        out.mask.fixed_rho_t = RVec::Constant(n, 0.5);
    }
    if (out.mask.fixed_rho_t) {
        for (int i = 0; i < n; ++i) {
            const double rho_t = (*out.mask.fixed_rho_t)(i);
            init.v_t(i) = std::polar(std::sqrt(rho_t), std::arg(init.v_t(i)));
            init.v_r(i) = std::polar(std::sqrt(1.0 - rho_t), std::arg(init.v_r(i)));
        }
    }
    out.init = std::move(init);
    return out;
}

struct BcdConfig {
    Algorithm algorithm = Algorithm::pen;
    Protocol protocol = Protocol::es;
    BaselineKind baseline = BaselineKind::star_ris;
    double power_watts = 0.01;
    RVec eta;  // empty selects uniform priorities
    double eps_bcd = 1e-3;
    int max_bcd_iterations = 200;
    PenConfig pen;
    double ele_tol = 1e-9;
    SeedKey seed{0};
};

struct BcdIterationRow {
    int iteration = 0;        // 1-based
    double wsr = 0.0;         // after this iteration, on the design channels
    double violation = 0.0;   // penalty-route exit violation; zero for element-wise
    double elapsed_ms = 0.0;  // wall time of the iteration
};

struct BcdTrace {
    std::vector<BcdIterationRow> rows;
    std::string stop_reason;  // converged | max_iterations | zero_power
    double initial_wsr = 0.0;
    double max_kkt_residual = 0.0;
    double max_sca_increase = 0.0;
    int total_inner_solves = 0;
    bool pen_warning = false;
};

struct BcdResult {
    TrcState trc{CVec(), CVec(), Protocol::es};
    BeamformerSet w;
    double wsr = 0.0;  // final weighted sum rate on the design channels
    BcdTrace trace;
};

namespace detail {

// Matched-filter precoders through the current cascade, scaled to spend the
// full budget. Falls back to deterministic unit-power columns if the cascade
// is numerically dead.
inline BeamformerSet matched_filter_init(const ChannelSet& channels, const TrcState& trc,
                                         double power) {
    const int k = channels.k();
    const int m_b = static_cast<int>(channels.g.cols());
    BeamformerSet set;
    set.power_budget = power;
    set.w.resize(k);
    double total = 0.0;
    for (int u = 1; u <= k; ++u) {
        set.w[u - 1] = user_aggregate_channel(channels, trc, u).adjoint();
        total += set.w[u - 1].squaredNorm();
    }
    if (total < 1e-300) {
        const int m = k > 0 ? static_cast<int>(set.w[0].cols()) : 0;
        for (auto& w : set.w) w = CMat::Identity(m_b, m);
        total = 0.0;
        for (const auto& w : set.w) total += w.squaredNorm();
    }
    const double scale = std::sqrt(power / total);
    for (auto& w : set.w) w *= scale;
    return set;
}

}  // namespace detail

// Run the full alternating optimization on the given channels. The caller
// supplies design channels; reporting against a different (true) channel set
// is done separately with evaluate_solution.
inline BcdResult run_bcd(const ChannelSet& channels, const BcdConfig& cfg) {
    require(cfg.power_watts >= 0.0, "run_bcd: negative power budget");
    require(cfg.eps_bcd > 0.0, "run_bcd: eps_bcd must be positive");
    require(cfg.max_bcd_iterations >= 1, "run_bcd: need at least one iteration");
    const int k = channels.k();
    const int n = static_cast<int>(channels.g.rows());
    const RVec eta = cfg.eta.size() > 0 ? cfg.eta : uniform_weights(k);
    require(eta.size() == k, "run_bcd: priority weight count mismatch");

    const BaselineSetup setup =
        apply_baseline_constraints(cfg.baseline, random_trc_init(n, cfg.protocol, cfg.seed));

    BcdResult out;
    out.trc = setup.init;
    out.w = detail::matched_filter_init(channels, out.trc, cfg.power_watts);
    if (cfg.power_watts <= 0.0) {
        out.wsr = 0.0;
        out.trace.stop_reason = "zero_power";
        out.trace.rows.push_back({1, 0.0, 0.0, 0.0});
        return out;
    }
    double wsr_prev = weighted_sum_rate(channels, out.trc, out.w, eta);
    out.trace.initial_wsr = wsr_prev;

    for (int it = 1; it <= cfg.max_bcd_iterations; ++it) {
        const auto t0 = std::chrono::steady_clock::now();
        const std::vector<CMat> u = update_combiners(channels, out.trc, out.w);
        const std::vector<CMat> z = update_weights(channels, out.trc, out.w, u);
        const ActiveBeamformingProblem prob =
            build_quadratic_forms(channels, out.trc, u, z, eta, cfg.power_watts);
        out.w = active_beamforming(prob).set;

        const TrcQuadratic q = build_trc_quadratic(channels, u, z, out.w, eta);
        double violation = 0.0;
        if (cfg.algorithm == Algorithm::pen) {
            const PenResult pen = cfg.protocol == Protocol::es
                                      ? pen_es(q, cfg.pen, out.trc, setup.mask)
                                      : pen_ms(q, cfg.pen, out.trc, setup.mask);
            out.trc = pen.trc;
            violation = pen.diag.exit_violation;
            out.trace.max_kkt_residual =
                std::max(out.trace.max_kkt_residual, pen.diag.max_kkt_residual);
            out.trace.max_sca_increase =
                std::max(out.trace.max_sca_increase, pen.diag.max_inner_increase);
            out.trace.total_inner_solves += pen.diag.inner_solves;
            out.trace.pen_warning = out.trace.pen_warning || pen.diag.warning;
        } else {
            out.trc = ele_sweep(q, out.trc, cfg.ele_tol, setup.mask);
        }

        const double wsr = weighted_sum_rate(channels, out.trc, out.w, eta);
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        out.trace.rows.push_back({it, wsr, violation, ms});
        const bool settled = (wsr - wsr_prev) <= cfg.eps_bcd * std::max(std::abs(wsr_prev), 1e-12);
        wsr_prev = wsr;
        if (settled) {
            out.trace.stop_reason = "converged";
            break;
        }
    }
    if (out.trace.stop_reason.empty()) out.trace.stop_reason = "max_iterations";
    out.wsr = wsr_prev;
    return out;
}

struct SolutionReport {
    RVec rates;  // per-user rates, bits/s/Hz
    double wsr = 0.0;
};

// Rates delivered by a fixed design when the signal actually propagates over
// `channels` (used to score far-field designs on the true near-field links).
inline SolutionReport evaluate_solution(const ChannelSet& channels, const TrcState& trc,
                                        const BeamformerSet& w, const RVec& eta) {
    const int k = channels.k();
    require(eta.size() == k, "evaluate_solution: priority weight count mismatch");
    SolutionReport rep;
    rep.rates = RVec::Zero(k);
    for (int u = 1; u <= k; ++u) {
        rep.rates(u - 1) = user_rate(u, channels, trc, w);
        rep.wsr += eta(u - 1) * rep.rates(u - 1);
    }
    return rep;
}

}  // namespace starbeam

#endif
