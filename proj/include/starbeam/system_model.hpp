// SPDX-License-Identifier: Apache-2.0
//
// System-level state and evaluation metrics: per-element transmission and
// reflection coefficients, precoder sets, receive combiners and weight
// matrices, achievable rates, and the weighted mean-square-error objective
// whose maximization is equivalent to weighted sum-rate maximization.
#ifndef STARBEAM_SYSTEM_MODEL_HPP
#define STARBEAM_SYSTEM_MODEL_HPP

#include <cmath>
#include <string>
#include <vector>

#include "starbeam/channel.hpp"
#include "starbeam/types.hpp"

namespace starbeam {

// Energy splitting keeps per-element amplitudes continuous with unit energy
// sum; mode selection restricts every element to serve exactly one side.
enum class Protocol { es, ms };

// Per-element transmission/reflection coefficients of the surface. Element n
// applies v_t[n] to the field leaving toward the transmission region and
// v_r[n] toward the reflection region, with |v_t[n]|^2 + |v_r[n]|^2 = 1.
struct TrcState {
    CVec v_t;
    CVec v_r;
    Protocol protocol = Protocol::es;

    int n() const { return static_cast<int>(v_t.size()); }
    const CVec& v(Side s) const { return s == Side::t ? v_t : v_r; }
    CVec& v(Side s) { return s == Side::t ? v_t : v_r; }
    RVec rho(Side s) const { return v(s).cwiseAbs2(); }
    // Phases canonicalized to [0, 2*pi).
    RVec phases(Side s) const {
        const CVec& x = v(s);
        RVec p(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) p(i) = canonical_phase(std::arg(x(i)));
        return p;
    }
};

inline TrcState make_trc(const RVec& rho_t, const RVec& theta_t, const RVec& theta_r,
                         Protocol protocol) {
    const Eigen::Index n = rho_t.size();
    require(theta_t.size() == n && theta_r.size() == n, "make_trc: size mismatch");
    TrcState trc;
    trc.protocol = protocol;
    trc.v_t.resize(n);
    trc.v_r.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        require(rho_t(i) >= 0.0 && rho_t(i) <= 1.0, "make_trc: amplitude out of [0,1]");
        trc.v_t(i) = std::polar(std::sqrt(rho_t(i)), canonical_phase(theta_t(i)));
        trc.v_r(i) = std::polar(std::sqrt(1.0 - rho_t(i)), canonical_phase(theta_r(i)));
    }
    return trc;
}

// Default starting point: independent uniform phases on both sides; even
// energy split under ES, alternating sides under MS.
inline TrcState random_trc_init(int n, Protocol protocol, SeedKey seed) {
    require(n >= 1, "random_trc_init: need at least one element");
    RngStream rng(seed.derive(seed_label::trc_init));
    RVec theta_t(n), theta_r(n), rho_t(n);
    for (int i = 0; i < n; ++i) theta_t(i) = rng.uniform(0.0, two_pi);
    for (int i = 0; i < n; ++i) theta_r(i) = rng.uniform(0.0, two_pi);
    for (int i = 0; i < n; ++i)
        rho_t(i) = (protocol == Protocol::es) ? 0.5 : ((i % 2 == 0) ? 1.0 : 0.0);
    return make_trc(rho_t, theta_t, theta_r, protocol);
}

struct TrcViolation {
    int element = 0;  // 1-based
    std::string kind;
    double magnitude = 0.0;
};

struct TrcViolationReport {
    std::vector<TrcViolation> entries;
    bool ok() const { return entries.empty(); }
};

// Checks the per-element energy constraint and, under MS, binariness of the
// power split. Tolerance 1e-9 on both.
inline TrcViolationReport validate_trc(const TrcState& trc) {
    TrcViolationReport report;
    require(trc.v_t.size() == trc.v_r.size(), "validate_trc: side length mismatch");
    for (int i = 0; i < trc.n(); ++i) {
        const double rho_t = std::norm(trc.v_t(i));
        const double rho_r = std::norm(trc.v_r(i));
        const double energy = rho_t + rho_r;
        if (std::abs(energy - 1.0) > 1e-9)
            report.entries.push_back({i + 1, "energy", std::abs(energy - 1.0)});
        if (trc.protocol == Protocol::ms) {
            const double dev = std::min(std::min(rho_t, 1.0 - rho_t), std::min(rho_r, 1.0 - rho_r));
            if (dev > 1e-9) report.entries.push_back({i + 1, "binary", dev});
        }
    }
    return report;
}

// Per-user precoding matrices, M_b x M each, plus the power budget they must
// jointly respect.
struct BeamformerSet {
    std::vector<CMat> w;
    double power_budget = 0.0;

    double total_power() const {
        double p = 0.0;
        for (const auto& wk : w) p += wk.squaredNorm();
        return p;
    }
};

// Receive combiners and weight matrices of the reformulated objective.
struct WmmseState {
    std::vector<CMat> u;  // M x M per user
    std::vector<CMat> z;  // M x M per user, Hermitian positive definite
};

using PriorityWeights = RVec;

inline PriorityWeights uniform_weights(int k) { return RVec::Ones(k); }

namespace detail {

// log(det(X)) for Hermitian positive definite X via Cholesky.
inline double logdet_hpd(const CMat& x, const char* who) {
    Eigen::LLT<CMat> llt(x);
    if (llt.info() != Eigen::Success)
        throw invalid_argument_error(std::string(who) + ": matrix not positive definite");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) acc += std::log(llt.matrixL()(i, i).real());
    return 2.0 * acc;
}

}  // namespace detail

// Effective base-station-to-user channel through one side of the surface,
// H_k * diag(v_side) * G, an M x M_b matrix.
inline CMat aggregate_channel(const CMat& h_k, const TrcState& trc, Side side, const CMat& g) {
    require(h_k.cols() == trc.n() && g.rows() == trc.n(), "aggregate_channel: size mismatch");
    return h_k * trc.v(side).asDiagonal() * g;
}

inline Side user_side(const ChannelSet& channels, int k) {
    require(k >= 1 && k <= channels.k(), "user_side: user index out of range");
    return channels.users[static_cast<std::size_t>(k - 1)].region;
}

inline CMat user_aggregate_channel(const ChannelSet& channels, const TrcState& trc, int k) {
    const auto& uc = channels.users[static_cast<std::size_t>(k - 1)];
    return aggregate_channel(uc.h, trc, uc.region, channels.g);
}

// Interference-plus-noise covariance seen by user k, sigma^2 I plus the other
// users' streams through user k's effective channel.
inline CMat interference_covariance(int k, const ChannelSet& channels, const TrcState& trc,
                                    const BeamformerSet& w) {
    require(static_cast<int>(w.w.size()) == channels.k(), "interference_covariance: size mismatch");
    const CMat hbar = user_aggregate_channel(channels, trc, k);
    CMat j = channels.noise_power * CMat::Identity(hbar.rows(), hbar.rows());
    for (int l = 1; l <= channels.k(); ++l) {
        if (l == k) continue;
        const CMat p = hbar * w.w[static_cast<std::size_t>(l - 1)];
        j.noalias() += p * p.adjoint();
    }
    return j;
}

// Achievable rate of user k in bit/s/Hz, treating interference as noise.
inline double user_rate(int k, const ChannelSet& channels, const TrcState& trc,
                        const BeamformerSet& w) {
    const CMat hbar = user_aggregate_channel(channels, trc, k);
    const CMat j = interference_covariance(k, channels, trc, w);
    const CMat p = hbar * w.w[static_cast<std::size_t>(k - 1)];
    Eigen::LLT<CMat> llt(j);
    if (llt.info() != Eigen::Success)
        throw invalid_argument_error("user_rate: interference covariance not positive definite");
    const CMat x = llt.matrixL().solve(p);
    const CMat inner = CMat::Identity(p.cols(), p.cols()) + x.adjoint() * x;
    return detail::logdet_hpd(inner, "user_rate") / std::log(2.0);
}

inline double weighted_sum_rate(const ChannelSet& channels, const TrcState& trc,
                                const BeamformerSet& w, const PriorityWeights& eta) {
    require(eta.size() == channels.k(), "weighted_sum_rate: weight count mismatch");
    double acc = 0.0;
    for (int k = 1; k <= channels.k(); ++k) acc += eta(k - 1) * user_rate(k, channels, trc, w);
    return acc;
}

// Mean-square-error matrix of user k for an arbitrary combiner u_k.
inline CMat mse_matrix(int k, const CMat& u_k, const ChannelSet& channels, const TrcState& trc,
                       const BeamformerSet& w) {
    const CMat hbar = user_aggregate_channel(channels, trc, k);
    const CMat d = u_k.adjoint() * hbar * w.w[static_cast<std::size_t>(k - 1)] -
                   CMat::Identity(u_k.cols(), u_k.cols());
    CMat e = d * d.adjoint() + channels.noise_power * (u_k.adjoint() * u_k);
    for (int l = 1; l <= channels.k(); ++l) {
        if (l == k) continue;
        const CMat p = u_k.adjoint() * hbar * w.w[static_cast<std::size_t>(l - 1)];
        e.noalias() += p * p.adjoint();
    }
    return e;
}

// Weighted objective of the reformulated problem,
//   sum_k eta_k (logdet(Z_k) - tr(Z_k E_k) + M) / ln 2.
// The 1/ln2 scaling keeps the value in bit/s/Hz: at the optimal combiner and
// weight it equals the weighted sum rate, and it leaves every argmax
// unchanged. Singular weights are rejected.
inline double wmmse_objective(const WmmseState& wmmse, const BeamformerSet& w, const TrcState& trc,
                              const ChannelSet& channels, const PriorityWeights& eta) {
    require(static_cast<int>(wmmse.u.size()) == channels.k() &&
                static_cast<int>(wmmse.z.size()) == channels.k(),
            "wmmse_objective: state size mismatch");
    double acc = 0.0;
    for (int k = 1; k <= channels.k(); ++k) {
        const CMat& z = wmmse.z[static_cast<std::size_t>(k - 1)];
        const CMat e = mse_matrix(k, wmmse.u[static_cast<std::size_t>(k - 1)], channels, trc, w);
        const double m = static_cast<double>(z.rows());
        acc += eta(k - 1) *
               (detail::logdet_hpd(z, "wmmse_objective") - (z * e).trace().real() + m) / std::log(2.0);
    }
    return acc;
}

}  // namespace starbeam

#endif
