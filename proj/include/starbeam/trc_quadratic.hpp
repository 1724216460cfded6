// SPDX-License-Identifier: Apache-2.0
//
// The surface-coefficient subproblem in quadratic form. With combiners,
// weights and precoders fixed, the weighted-MSE objective restricted to one
// side's coefficient vector v is
//   g_i(v) = v^H F_i v - 2 Re(e_i^T v) + const,
// where F_i collects the Hadamard product of the user-side and base-station-
// side quadratic kernels and e_i the linear coupling. Both updates (penalized
// lift and per-element sweep) consume this form.
#ifndef STARBEAM_TRC_QUADRATIC_HPP
#define STARBEAM_TRC_QUADRATIC_HPP

#include <array>
#include <vector>

#include "starbeam/system_model.hpp"
#include "starbeam/types.hpp"

namespace starbeam {

struct TrcQuadratic {
    std::array<CMat, 2> f;  // N x N Hermitian PSD kernel per side, index by side_index()
    std::array<CVec, 2> e;  // length-N linear term per side

    int n() const { return static_cast<int>(f[0].rows()); }
};

// Assembles F_i and e_i from the current combiners, weights and precoders.
// Per user k on side i:
//   C_k = eta_k H_k^H U_k Z_k U_k^H H_k,   D = G (sum_l W_l W_l^H) G^H,
//   F_k = C_k .* D^T,                      e_k = diag(eta_k G W_k Z_k U_k^H H_k),
// and the side kernels are the sums over that side's users.
inline TrcQuadratic build_trc_quadratic(const ChannelSet& channels, const std::vector<CMat>& u,
                                        const std::vector<CMat>& z, const BeamformerSet& w,
                                        const PriorityWeights& eta) {
    require(static_cast<int>(u.size()) == channels.k() && u.size() == z.size() &&
                u.size() == w.w.size(),
            "build_trc_quadratic: state size mismatch");
    const int n = static_cast<int>(channels.g.rows());

    CMat wsum = CMat::Zero(channels.g.cols(), channels.g.cols());
    for (const auto& wk : w.w) wsum.noalias() += wk * wk.adjoint();
    CMat d = channels.g * wsum * channels.g.adjoint();
    d = 0.5 * (d + d.adjoint()).eval();

    TrcQuadratic q;
    for (int s = 0; s < 2; ++s) {
        q.f[s] = CMat::Zero(n, n);
        q.e[s] = CVec::Zero(n);
    }
    for (int k = 1; k <= channels.k(); ++k) {
        const std::size_t i = static_cast<std::size_t>(k - 1);
        const int s = side_index(channels.users[i].region);
        const CMat& h = channels.users[i].h;
        const CMat uz = u[i] * z[i];
        CMat c = eta(k - 1) * (h.adjoint() * uz) * (u[i].adjoint() * h);
        c = 0.5 * (c + c.adjoint()).eval();
        q.f[s].noalias() += c.cwiseProduct(d.transpose());
        q.e[s] += (eta(k - 1) * channels.g * w.w[i] * z[i] * u[i].adjoint() * h).diagonal();
    }
    for (int s = 0; s < 2; ++s) q.f[s] = 0.5 * (q.f[s] + q.f[s].adjoint()).eval();
    return q;
}

// Value of the quadratic objective at a coefficient state (both sides).
inline double trc_objective(const TrcQuadratic& q, const TrcState& trc) {
    require(q.n() == trc.n(), "trc_objective: size mismatch");
    double acc = 0.0;
    for (Side s : {Side::t, Side::r}) {
        const CVec& v = trc.v(s);
        const int i = side_index(s);
        acc += (v.adjoint() * q.f[i] * v).value().real() - 2.0 * (q.e[i].transpose() * v).value().real();
    }
    return acc;
}

}  // namespace starbeam

#endif
