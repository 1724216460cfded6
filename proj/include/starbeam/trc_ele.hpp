// SPDX-License-Identifier: Apache-2.0
//
// Element-wise route for the surface-coefficient subproblem. With all other
// elements held fixed, the objective restricted to element n of side i is
//   rho * A + 2 sqrt(rho) Re(B e^{j theta}) + const,
// with A the diagonal kernel entry and B the accumulated cross coupling. The
// optimal phase cancels B exactly; the optimal split has a closed form or a
// one-dimensional monotone root. One ascending sweep updates every element to
// its per-element global optimum, so the sweep never increases the objective.
#ifndef STARBEAM_TRC_ELE_HPP
#define STARBEAM_TRC_ELE_HPP

#include <array>
#include <cmath>

#include "starbeam/trc_pen.hpp"
#include "starbeam/trc_quadratic.hpp"
#include "starbeam/types.hpp"

namespace starbeam {

struct ElementCoefficients {
    double a = 0.0;  // quadratic self term, diagonal of the PSD kernel
    cx b = 0.0;      // linear coupling collected from all other elements
    double c = 0.0;  // remainder, constant for this element's update
};

// Coefficients of element n (1-based) on side s at the current state.
inline ElementCoefficients element_coefficients(int n, Side side, const TrcQuadratic& q,
                                                const TrcState& trc) {
    require(n >= 1 && n <= q.n(), "element_coefficients: element index out of range");
    require(q.n() == trc.n(), "element_coefficients: size mismatch");
    const int s = side_index(side);
    const int idx = n - 1;
    const CVec& v = trc.v(side);
    ElementCoefficients out;
    out.a = q.f[s](idx, idx).real();
    cx b = -q.e[s](idx);
    for (int qi = 0; qi < q.n(); ++qi) {
        if (qi == idx) continue;
        b += std::conj(v(qi)) * q.f[s](qi, idx);
    }
    out.b = b;
    double quad = 0.0;
    cx lin = 0.0;
    for (int qi = 0; qi < q.n(); ++qi) {
        if (qi == idx) continue;
        for (int qj = 0; qj < q.n(); ++qj) {
            if (qj == idx) continue;
            quad += (std::conj(v(qi)) * q.f[s](qi, qj) * v(qj)).real();
        }
        lin += q.e[s](qi) * v(qi);
    }
    out.c = quad - 2.0 * lin.real();
    return out;
}

// Phase minimizing 2 sqrt(rho) Re(B e^{j theta}), i.e. pi - arg(B), in [0, 2 pi).
inline double optimal_phase(cx b) {
    if (std::abs(b) == 0.0) return 0.0;
    return canonical_phase(pi - std::arg(b));
}

// Energy-splitting amplitude: minimizes
//   h(rho) = (a_t - a_r) rho - 2 sqrt(rho) |B_t| - 2 sqrt(1-rho) |B_r|
// over [0, 1]. h' is strictly increasing; with both couplings active the
// unique interior root is bracketed and bisected, otherwise the minimizer is
// on the boundary or at the analytic stationary point.
inline double es_amplitude(double a_t, double a_r, double abs_b_t, double abs_b_r,
                           double tol = 1e-9) {
    require(abs_b_t >= 0.0 && abs_b_r >= 0.0, "es_amplitude: negative coupling magnitude");
    require(tol > 0.0, "es_amplitude: tolerance must be positive");
    const double slope = a_t - a_r;
    if (abs_b_t == 0.0 && abs_b_r == 0.0) {
        if (slope < 0.0) return 1.0;
        if (slope > 0.0) return 0.0;
        return 0.5;
    }
    if (abs_b_r == 0.0) {
        // h'(rho) = slope - |B_t| / sqrt(rho): negative throughout iff slope <= |B_t|
        if (slope <= abs_b_t) return 1.0;
        return std::min(1.0, (abs_b_t / slope) * (abs_b_t / slope));
    }
    if (abs_b_t == 0.0) {
        if (-slope <= abs_b_r) return 0.0;
        const double q = abs_b_r / (-slope);
        return std::max(0.0, 1.0 - q * q);
    }
    double lo = 0.0, hi = 1.0;
    const auto deriv = [&](double rho) {
        return slope - abs_b_t / std::sqrt(rho) + abs_b_r / std::sqrt(1.0 - rho);
    };
    // The interior root always exists mathematically (h' spans -inf to +inf),
    // but a vanishingly small coupling can push it closer to a boundary than
    // the evaluation points can represent; fall back to the single-sided
    // closed forms in that case.
    if (!(deriv(1e-300) < 0.0)) {
        if (-slope <= abs_b_r) return 0.0;
        const double q = abs_b_r / (-slope);
        return std::max(0.0, 1.0 - q * q);
    }
    if (!(deriv(1.0 - 1e-16) > 0.0)) {
        if (slope <= abs_b_t) return 1.0;
        return std::min(1.0, (abs_b_t / slope) * (abs_b_t / slope));
    }
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (deriv(mid) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

// Mode-selection split: full energy goes to the side with the smaller
// per-element cost at unit amplitude, rho A - 2 sqrt(rho) |B| evaluated at 1;
// ties go to transmission. Returns (rho_t, rho_r).
inline std::pair<double, double> ms_amplitude(double a_t, double a_r, double abs_b_t,
                                              double abs_b_r) {
    const double cost_t = a_t - 2.0 * abs_b_t;
    const double cost_r = a_r - 2.0 * abs_b_r;
    return (cost_t <= cost_r) ? std::make_pair(1.0, 0.0) : std::make_pair(0.0, 1.0);
}

// One ascending sweep over all elements; each element is set to its joint
// phase/split optimum given the others. Pinned splits (baselines) restrict
// the update to phases.
inline TrcState ele_sweep(const TrcQuadratic& q, const TrcState& trc, double tol = 1e-9,
                          const TrcConstraintMask& mask = {}) {
    require(q.n() == trc.n(), "ele_sweep: size mismatch");
    if (mask.fixed_rho_t)
        require(mask.fixed_rho_t->size() == trc.n(), "ele_sweep: mask size mismatch");
    TrcState out = trc;
    for (int n = 1; n <= q.n(); ++n) {
        const ElementCoefficients ct = element_coefficients(n, Side::t, q, out);
        const ElementCoefficients cr = element_coefficients(n, Side::r, q, out);
        const double th_t = optimal_phase(ct.b);
        const double th_r = optimal_phase(cr.b);
        double rho_t;
        if (mask.fixed_rho_t) {
            rho_t = (*mask.fixed_rho_t)(n - 1);
        } else if (trc.protocol == Protocol::es) {
            rho_t = es_amplitude(ct.a, cr.a, std::abs(ct.b), std::abs(cr.b), tol);
        } else {
            rho_t = ms_amplitude(ct.a, cr.a, std::abs(ct.b), std::abs(cr.b)).first;
        }
        out.v_t(n - 1) = std::polar(std::sqrt(rho_t), th_t);
        out.v_r(n - 1) = std::polar(std::sqrt(1.0 - rho_t), th_r);
    }
    return out;
}

}  // namespace starbeam

#endif
