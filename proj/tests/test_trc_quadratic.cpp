// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>
#include <cmath>
#include <random>

#include "starbeam/trc_quadratic.hpp"
#include "starbeam/wmmse.hpp"

using namespace starbeam;

namespace {

struct Fixture {
    ChannelSet ch;
    BeamformerSet w;
    std::vector<CMat> u;
    std::vector<CMat> z;
    PriorityWeights eta;
    TrcQuadratic q;
};

Fixture make_fixture(std::uint64_t seed, int n_y = 2, int n_z = 3) {
    ScenarioParams params;
    params.n_y = n_y;
    params.n_z = n_z;
    params.m_b = 4;
    params.m = 2;
    params.k = 3;
    const ScenarioGeometry geo = sample_scenario(UserSetup::random_angles, SeedKey{seed}, params);
    Fixture fx;
    fx.ch = make_channel_set(geo, SeedKey{seed}, 1e-14, 4);

    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd;
    fx.w.power_budget = 0.01;
    double total = 0.0;
    for (int i = 0; i < params.k; ++i) {
        CMat wk(params.m_b, params.m);
        for (int a = 0; a < params.m_b; ++a)
            for (int b = 0; b < params.m; ++b) wk(a, b) = cx(nd(gen), nd(gen));
        fx.w.w.push_back(wk);
        total += wk.squaredNorm();
    }
    for (auto& wk : fx.w.w) wk *= std::sqrt(0.01 / total);

    const TrcState trc = random_trc_init(n_y * n_z, Protocol::es, SeedKey{seed});
    fx.u = update_combiners(fx.ch, trc, fx.w);
    fx.z = update_weights(fx.ch, trc, fx.w, fx.u);
    fx.eta = PriorityWeights(params.k);
    fx.eta << 1.0, 0.5, 2.0;
    fx.q = build_trc_quadratic(fx.ch, fx.u, fx.z, fx.w, fx.eta);
    return fx;
}

// Weighted trace term sum_k eta_k tr(Z_k E_k(v)) evaluated from first
// principles; its difference between two surface states must equal the
// quadratic-form difference.
double weighted_trace_term(const Fixture& fx, const TrcState& trc) {
    double acc = 0.0;
    for (int k = 1; k <= fx.ch.k(); ++k) {
        const std::size_t i = static_cast<std::size_t>(k - 1);
        const CMat e = mse_matrix(k, fx.u[i], fx.ch, trc, fx.w);
        acc += fx.eta(k - 1) * (fx.z[i] * e).trace().real();
    }
    return acc;
}

}  // namespace

TEST_CASE("quadratic form reproduces weighted-MSE differences", "[trc_quadratic]") {
    const Fixture fx = make_fixture(41);
    for (std::uint64_t s = 0; s < 6; ++s) {
        const TrcState a = random_trc_init(6, Protocol::es, SeedKey{100 + s});
        const TrcState b = random_trc_init(6, Protocol::ms, SeedKey{200 + s});
        const double lhs = weighted_trace_term(fx, a) - weighted_trace_term(fx, b);
        const double rhs = trc_objective(fx.q, a) - trc_objective(fx.q, b);
        REQUIRE(lhs == Catch::Approx(rhs).margin(1e-10 * (1.0 + std::abs(lhs))));
    }
}

TEST_CASE("quadratic form kernels are Hermitian positive semidefinite", "[trc_quadratic]") {
    const Fixture fx = make_fixture(42);
    for (int s = 0; s < 2; ++s) {
        const CMat& f = fx.q.f[s];
        REQUIRE((f - f.adjoint()).cwiseAbs().maxCoeff() <= 1e-14 * f.cwiseAbs().maxCoeff());
        Eigen::SelfAdjointEigenSolver<CMat> eig(f, Eigen::EigenvaluesOnly);
        REQUIRE(eig.eigenvalues().minCoeff() >=
                -1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff()));
    }
}

TEST_CASE("kernel entries match the explicit Hadamard construction", "[trc_quadratic]") {
    const Fixture fx = make_fixture(43);
    const int n = fx.q.n();
    CMat wsum = CMat::Zero(4, 4);
    for (const auto& wk : fx.w.w) wsum += wk * wk.adjoint();
    const CMat d = fx.ch.g * wsum * fx.ch.g.adjoint();

    std::array<CMat, 2> f_ref{CMat::Zero(n, n), CMat::Zero(n, n)};
    std::array<CVec, 2> e_ref{CVec::Zero(n), CVec::Zero(n)};
    for (int k = 1; k <= fx.ch.k(); ++k) {
        const std::size_t i = static_cast<std::size_t>(k - 1);
        const int s = side_index(fx.ch.users[i].region);
        const CMat& h = fx.ch.users[i].h;
        const CMat c = fx.eta(k - 1) * h.adjoint() * fx.u[i] * fx.z[i] * fx.u[i].adjoint() * h;
        for (int p = 0; p < n; ++p)
            for (int q = 0; q < n; ++q) f_ref[s](p, q) += c(p, q) * d(q, p);
        const CMat lin = fx.eta(k - 1) * fx.ch.g * fx.w.w[i] * fx.z[i] * fx.u[i].adjoint() * h;
        for (int p = 0; p < n; ++p) e_ref[s](p) += lin(p, p);
    }
    for (int s = 0; s < 2; ++s) {
        const double fscale = std::max(1e-300, f_ref[s].cwiseAbs().maxCoeff());
        const double escale = std::max(1e-300, e_ref[s].cwiseAbs().maxCoeff());
        REQUIRE((fx.q.f[s] - f_ref[s]).cwiseAbs().maxCoeff() <= 1e-10 * fscale);
        REQUIRE((fx.q.e[s] - e_ref[s]).cwiseAbs().maxCoeff() <= 1e-10 * escale);
    }
}

TEST_CASE("objective evaluates the stated scalar expression", "[trc_quadratic]") {
    TrcQuadratic q;
    q.f[0] = CMat::Constant(1, 1, cx(2.0, 0.0));
    q.f[1] = CMat::Constant(1, 1, cx(3.0, 0.0));
    q.e[0] = CVec::Constant(1, cx(1.0, 1.0));
    q.e[1] = CVec::Constant(1, cx(0.0, -2.0));
    TrcState trc;
    trc.protocol = Protocol::es;
    trc.v_t = CVec::Constant(1, std::polar(std::sqrt(0.5), 0.3));
    trc.v_r = CVec::Constant(1, std::polar(std::sqrt(0.5), 1.2));
    const cx vt = trc.v_t(0);
    const cx vr = trc.v_r(0);
    const double expected = 2.0 * std::norm(vt) - 2.0 * (cx(1.0, 1.0) * vt).real() +
                            3.0 * std::norm(vr) - 2.0 * (cx(0.0, -2.0) * vr).real();
    CHECK(trc_objective(q, trc) == Catch::Approx(expected).margin(1e-14));
}

TEST_CASE("unit-modulus phase-only optimum aligns with the linear term", "[trc_quadratic]") {
    // With F = alpha I the quadratic part is constant on fixed-amplitude
    // states, so the best phase maximizes Re(e_n v_n): theta = -arg(e_n).
    const int n = 4;
    TrcQuadratic q;
    std::mt19937_64 gen(11);
    std::normal_distribution<double> nd;
    for (int s = 0; s < 2; ++s) {
        q.f[s] = 2.5 * CMat::Identity(n, n);
        q.e[s] = CVec(n);
        for (int i = 0; i < n; ++i) q.e[s](i) = cx(nd(gen), nd(gen));
    }
    RVec theta_t(n), theta_r(n);
    for (int i = 0; i < n; ++i) {
        theta_t(i) = canonical_phase(-std::arg(q.e[0](i)));
        theta_r(i) = canonical_phase(-std::arg(q.e[1](i)));
    }
    const TrcState best = make_trc(RVec::Constant(n, 0.5), theta_t, theta_r, Protocol::es);
    const double f_best = trc_objective(q, best);
    std::uniform_real_distribution<double> ud(0.0, two_pi);
    for (int trial = 0; trial < 50; ++trial) {
        RVec tt(n), tr(n);
        for (int i = 0; i < n; ++i) {
            tt(i) = ud(gen);
            tr(i) = ud(gen);
        }
        const TrcState cand = make_trc(RVec::Constant(n, 0.5), tt, tr, Protocol::es);
        REQUIRE(f_best <= trc_objective(q, cand) + 1e-12);
    }
}
