// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>
#include <random>

#include "starbeam/system_model.hpp"
#include "starbeam/wmmse.hpp"

using namespace starbeam;

namespace {

ChannelSet tiny_channels(std::uint64_t seed) {
    ScenarioParams params;
    params.n_y = 2;
    params.n_z = 3;
    params.m_b = 4;
    params.m = 2;
    params.k = 2;
    const ScenarioGeometry geo = sample_scenario(UserSetup::random_angles, SeedKey{seed}, params);
    return make_channel_set(geo, SeedKey{seed}, 1e-14, 4);
}

BeamformerSet random_w(int m_b, int m, int k, double power, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd;
    BeamformerSet set;
    set.power_budget = power;
    double total = 0.0;
    for (int i = 0; i < k; ++i) {
        CMat w(m_b, m);
        for (int a = 0; a < m_b; ++a)
            for (int b = 0; b < m; ++b) w(a, b) = cx(nd(gen), nd(gen));
        set.w.push_back(w);
        total += w.squaredNorm();
    }
    for (auto& w : set.w) w *= std::sqrt(power / total);
    return set;
}

double trace_mse(const ChannelSet& ch, const TrcState& trc, const BeamformerSet& w, int k,
                 const CMat& u) {
    return mse_matrix(k, u, ch, trc, w).trace().real();
}

}  // namespace

TEST_CASE("combiner update minimizes the mean square error", "[wmmse]") {
    const ChannelSet ch = tiny_channels(31);
    const TrcState trc = random_trc_init(6, Protocol::es, SeedKey{31});
    const BeamformerSet w = random_w(4, 2, 2, 0.01, 31);
    const auto u = update_combiners(ch, trc, w);
    std::mt19937_64 gen(7);
    std::normal_distribution<double> nd;
    for (int k = 1; k <= ch.k(); ++k) {
        const double best = trace_mse(ch, trc, w, k, u[k - 1]);
        for (int trial = 0; trial < 20; ++trial) {
            CMat delta(2, 2);
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) delta(a, b) = 0.1 * cx(nd(gen), nd(gen));
            REQUIRE(best <= trace_mse(ch, trc, w, k, u[k - 1] + delta) + 1e-12);
        }
    }
}

TEST_CASE("weight update inverts the error matrix", "[wmmse]") {
    const ChannelSet ch = tiny_channels(32);
    const TrcState trc = random_trc_init(6, Protocol::es, SeedKey{32});
    const BeamformerSet w = random_w(4, 2, 2, 0.01, 32);
    const auto u = update_combiners(ch, trc, w);
    const auto z = update_weights(ch, trc, w, u);
    for (int k = 1; k <= ch.k(); ++k) {
        const CMat e = mse_matrix(k, u[k - 1], ch, trc, w);
        REQUIRE((z[k - 1] * e - CMat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-8);
        // weights are Hermitian positive definite
        REQUIRE((z[k - 1] - z[k - 1].adjoint()).cwiseAbs().maxCoeff() <
                1e-10 * z[k - 1].cwiseAbs().maxCoeff());
        Eigen::SelfAdjointEigenSolver<CMat> eig(z[k - 1], Eigen::EigenvaluesOnly);
        REQUIRE(eig.eigenvalues().minCoeff() > 0.0);
    }
}

TEST_CASE("precoder solve satisfies stationarity and the power budget", "[wmmse]") {
    const ChannelSet ch = tiny_channels(33);
    const TrcState trc = random_trc_init(6, Protocol::es, SeedKey{33});
    const BeamformerSet w0 = random_w(4, 2, 2, 0.01, 33);
    const auto u = update_combiners(ch, trc, w0);
    const auto z = update_weights(ch, trc, w0, u);
    const RVec eta = uniform_weights(2);
    const ActiveBeamformingProblem prob = build_quadratic_forms(ch, trc, u, z, eta, 0.01);
    const ActiveBeamformingSolution sol = active_beamforming(prob);
    CHECK(sol.set.total_power() <= 0.01 * (1.0 + 1e-9));
    CHECK(sol.lambda >= 0.0);
    if (sol.lambda > 0.0)  // active constraint: budget met with equality
        CHECK(sol.set.total_power() == Catch::Approx(0.01).epsilon(1e-9));
    for (int k = 1; k <= 2; ++k) {
        const CMat resid = (prob.a + sol.lambda * CMat::Identity(4, 4)) * sol.set.w[k - 1] -
                           prob.b[k - 1].adjoint();
        const double scale = prob.b[k - 1].cwiseAbs().maxCoeff() +
                             (prob.a.cwiseAbs().maxCoeff() + sol.lambda) *
                                 sol.set.w[k - 1].cwiseAbs().maxCoeff();
        REQUIRE(resid.cwiseAbs().maxCoeff() < 1e-9 * scale);
    }
}

TEST_CASE("precoder solve beats random feasible candidates", "[wmmse]") {
    const ChannelSet ch = tiny_channels(34);
    const TrcState trc = random_trc_init(6, Protocol::es, SeedKey{34});
    const BeamformerSet w0 = random_w(4, 2, 2, 0.01, 34);
    const auto u = update_combiners(ch, trc, w0);
    const auto z = update_weights(ch, trc, w0, u);
    const RVec eta = uniform_weights(2);
    const double power = 0.01;
    const ActiveBeamformingProblem prob = build_quadratic_forms(ch, trc, u, z, eta, power);
    const ActiveBeamformingSolution sol = active_beamforming(prob);
    const auto objective = [&](const BeamformerSet& w) {
        double acc = 0.0;
        for (int k = 1; k <= 2; ++k) {
            acc += (w.w[k - 1].adjoint() * prob.a * w.w[k - 1]).trace().real();
            acc -= 2.0 * (prob.b[k - 1] * w.w[k - 1]).trace().real();
        }
        return acc;
    };
    const double best = objective(sol.set);
    const double slack = 1e-9 * (1.0 + std::abs(best));
    for (std::uint64_t trial = 0; trial < 40; ++trial) {
        BeamformerSet cand = random_w(4, 2, 2, power, 1000 + trial);
        REQUIRE(best <= objective(cand) + slack);
    }
    // also beat scaled/perturbed versions of itself inside the ball
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        BeamformerSet cand = sol.set;
        const BeamformerSet noise = random_w(4, 2, 2, power, 2000 + trial);
        double total = 0.0;
        for (int k = 0; k < 2; ++k) {
            cand.w[k] = sol.set.w[k] + 0.05 * noise.w[k];
            total += cand.w[k].squaredNorm();
        }
        if (total > power)
            for (auto& x : cand.w) x *= std::sqrt(power / total);
        REQUIRE(best <= objective(cand) + slack);
    }
}

TEST_CASE("scalar precoder matches the analytic water level", "[wmmse]") {
    // one antenna, one stream: minimize a|w|^2 - 2 Re(b w) s.t. |w|^2 <= P
    ActiveBeamformingProblem prob;
    prob.a = CMat::Constant(1, 1, cx(2.0, 0.0));
    prob.b = {CMat::Constant(1, 1, cx(3.0, 4.0))};  // b row vector (M x M_b)
    prob.power_budget = 100.0;  // unconstrained: w = conj(b)/a
    ActiveBeamformingSolution sol = active_beamforming(prob);
    CHECK(std::abs(sol.set.w[0](0, 0) - cx(3.0, -4.0) / 2.0) < 1e-9);
    CHECK(sol.lambda == 0.0);

    prob.power_budget = 1.0;  // active constraint: |w| = 1, phase of conj(b)
    sol = active_beamforming(prob);
    CHECK(std::abs(std::abs(sol.set.w[0](0, 0)) - 1.0) < 1e-9);
    CHECK(std::abs(sol.set.w[0](0, 0) - std::polar(1.0, std::arg(cx(3.0, -4.0)))) < 1e-9);
    // lambda solves |b|/(a+lambda) = 1 -> lambda = |b| - a = 3
    CHECK(sol.lambda == Catch::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("bisection reproduces analytic duals on diagonal problems", "[wmmse]") {
    // A = diag(1, 2), single user, B^H columns aligned with the eigenbasis
    ActiveBeamformingProblem prob;
    prob.a = CMat::Zero(2, 2);
    prob.a(0, 0) = 1.0;
    prob.a(1, 1) = 2.0;
    CMat bh(2, 1);
    bh(0, 0) = 2.0;
    bh(1, 0) = 3.0;
    prob.b = {bh.adjoint()};
    // power(lambda) = 4/(1+lambda)^2 + 9/(2+lambda)^2 = 1
    prob.power_budget = 1.0;
    const ActiveBeamformingSolution sol = active_beamforming(prob);
    double lo = 0.0, hi = 10.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double p = 4.0 / ((1.0 + mid) * (1.0 + mid)) + 9.0 / ((2.0 + mid) * (2.0 + mid));
        (p > 1.0 ? lo : hi) = mid;
    }
    CHECK(sol.lambda == Catch::Approx(0.5 * (lo + hi)).margin(1e-8));
    CHECK(sol.set.total_power() == Catch::Approx(1.0).margin(1e-8));
}

TEST_CASE("zero budget yields silent precoders", "[wmmse]") {
    const ChannelSet ch = tiny_channels(35);
    const TrcState trc = random_trc_init(6, Protocol::es, SeedKey{35});
    const BeamformerSet w0 = random_w(4, 2, 2, 0.01, 35);
    const auto u = update_combiners(ch, trc, w0);
    const auto z = update_weights(ch, trc, w0, u);
    const ActiveBeamformingProblem prob =
        build_quadratic_forms(ch, trc, u, z, uniform_weights(2), 0.0);
    const ActiveBeamformingSolution sol = active_beamforming(prob);
    for (const CMat& w : sol.set.w) CHECK(w.cwiseAbs().maxCoeff() == 0.0);
}
