// SPDX-License-Identifier: Apache-2.0
//
// Channel synthesis: a clustered far-field channel from the base station to
// the surface, spherical-wavefront line-of-sight channels from the surface to
// each user, and a rank-one far-field variant of the user link used by the
// mismatched-design baseline.
#ifndef STARBEAM_CHANNEL_HPP
#define STARBEAM_CHANNEL_HPP

#include <cmath>
#include <vector>

#include "starbeam/geometry.hpp"
#include "starbeam/rng.hpp"
#include "starbeam/types.hpp"

namespace starbeam {

// Distance power law with reference loss -30 dB at 1 m and exponent 2.2.
inline double path_loss_coefficient(double distance_m) {
    require(distance_m > 0.0, "path_loss_coefficient: distance must be positive");
    return 1e-3 * std::pow(distance_m, -2.2);
}

// Plane-wave response of the surface panel toward azimuth phi / elevation
// theta (polar angle from +z). Entry n carries the phase accumulated at
// element n; all entries have unit modulus.
inline CVec star_array_response(double phi, double theta, const ScenarioGeometry& geo) {
    const double ramp_y = geo.wavenumber() * geo.d_r * std::sin(phi) * std::sin(theta);
    const double ramp_z = geo.wavenumber() * geo.d_r * std::cos(theta);
    CVec e(geo.n());
    for (int n = 0; n < geo.n(); ++n) {
        const int iy = n % geo.n_y;
        const int iz = n / geo.n_y;
        e(n) = std::polar(1.0, iy * ramp_y + iz * ramp_z);
    }
    return e;
}

// ULA response with inter-element phase k_c * d * cos(gamma).
inline CVec ula_response(double gamma, int count, double spacing, double wavenumber) {
    const double ramp = wavenumber * spacing * std::cos(gamma);
    CVec e(count);
    for (int i = 0; i < count; ++i) e(i) = std::polar(1.0, i * ramp);
    return e;
}

inline CVec bs_array_response(double gamma, const ScenarioGeometry& geo) {
    return ula_response(gamma, geo.m_b, geo.d_b, geo.wavenumber());
}

inline CVec user_array_response(double gamma, const ScenarioGeometry& geo) {
    return ula_response(gamma, geo.m, geo.d_u, geo.wavenumber());
}

struct PathCluster {
    double azimuth = 0.0;    // arrival azimuth at the surface
    double elevation = 0.0;  // arrival elevation at the surface
    double departure = 0.0;  // departure angle at the base station
};

inline std::vector<PathCluster> sample_path_clusters(int count, SeedKey seed) {
    require(count >= 1, "sample_path_clusters: need at least one cluster");
    RngStream rng(seed.derive(seed_label::clusters));
    std::vector<PathCluster> out(static_cast<std::size_t>(count));
    for (auto& c : out) {
        c.azimuth = rng.uniform(0.0, pi);
        c.elevation = rng.uniform(0.0, pi);
        c.departure = rng.uniform(0.0, pi);
    }
    return out;
}

// Clustered multipath channel from the base station to the surface, N x M_b.
// Each path carries per-entry power beta / L, so the aggregate link power is
// E||G||^2 = beta M_b N and array gains arise from coherent combining only,
// matching the per-entry path-loss convention of the user links.
inline CMat far_field_bs_ris_channel(const std::vector<PathCluster>& clusters, double beta,
                                     const ScenarioGeometry& geo) {
    require(!clusters.empty(), "far_field_bs_ris_channel: no clusters");
    require(beta >= 0.0, "far_field_bs_ris_channel: beta must be nonnegative");
    const double l = static_cast<double>(clusters.size());
    CMat g = CMat::Zero(geo.n(), geo.m_b);
    for (const auto& c : clusters)
        g.noalias() += star_array_response(c.azimuth, c.elevation, geo) *
                       bs_array_response(c.departure, geo).adjoint();
    g *= std::sqrt(beta / l);
    return g;
}

// Exact spherical-wavefront line-of-sight channel of user k, M x N. Entry
// (m, n) is the free-space gain and phase over the antenna-to-element
// distance, with no planar approximation.
inline CMat near_field_los_channel(int k, const ScenarioGeometry& geo) {
    CMat h(geo.m, geo.n());
    for (int m = 1; m <= geo.m; ++m) {
        const Vec3 u = user_antenna_position(k, m, geo);
        for (int n = 1; n <= geo.n(); ++n) {
            const double r = (u - element_position(n, geo)).norm();
            require(r > 1e-9, "near_field_los_channel: degenerate geometry, user on the panel");
            h(m - 1, n - 1) = std::polar(geo.lambda_c / (4.0 * pi * r), -two_pi * r / geo.lambda_c);
        }
    }
    return h;
}

// Direction of user k as seen from the surface reference element.
inline Vec3 user_direction(int k, const ScenarioGeometry& geo) {
    require(k >= 1 && k <= geo.k(), "user_direction: user index out of range");
    const Vec3 d = geo.users[static_cast<std::size_t>(k - 1)].ref_antenna - geo.star_position;
    const double r = d.norm();
    require(r > 1e-9, "user_direction: degenerate geometry");
    return d / r;
}

// Rank-one planar-wavefront approximation of the user link, M x N. In the
// planar limit every element-to-antenna path keeps the reference gain
// sqrt(beta_k) while the phase ramps linearly along both arrays, so the matrix
// is sqrt(beta_k) times the outer product of the two unit-modulus responses
// toward the user (the aggregate power gain M N comes from coherent combining,
// not from the prefactor). The surface-side ramp enters untransposed: moving
// an element toward the user shortens the path and advances the phase.
inline CMat far_field_user_channel(int k, const ScenarioGeometry& geo, double beta_k) {
    require(beta_k >= 0.0, "far_field_user_channel: beta must be nonnegative");
    const Vec3 dir = user_direction(k, geo);
    const double theta = std::acos(std::clamp(dir.z(), -1.0, 1.0));
    const double phi = std::atan2(dir.y(), dir.x());
    const double gamma = std::acos(std::clamp(-dir.y(), -1.0, 1.0));  // arrival at the user array
    return std::sqrt(beta_k) * user_array_response(gamma, geo) *
           star_array_response(phi, theta, geo).transpose();
}

enum class ChannelVariant { near_field, far_field };

struct UserChannel {
    CMat h;  // M x N
    Side region = Side::r;
    ChannelVariant variant = ChannelVariant::near_field;
};

struct ChannelSet {
    CMat g;  // N x M_b
    std::vector<UserChannel> users;
    double noise_power = 1e-14;  // [W]

    int k() const { return static_cast<int>(users.size()); }
};

// Synthesizes the full channel set for one trial: clustered base-station link
// plus exact spherical-wavefront user links.
inline ChannelSet make_channel_set(const ScenarioGeometry& geo, SeedKey seed, double noise_power,
                                   int cluster_count = 16) {
    ChannelSet cs;
    cs.noise_power = noise_power;
    const double beta_g = path_loss_coefficient((geo.star_position - geo.bs_position).norm());
    cs.g = far_field_bs_ris_channel(sample_path_clusters(cluster_count, seed), beta_g, geo);
    cs.users.reserve(geo.users.size());
    for (int k = 1; k <= geo.k(); ++k) {
        UserChannel uc;
        uc.h = near_field_los_channel(k, geo);
        uc.region = geo.users[static_cast<std::size_t>(k - 1)].region;
        uc.variant = ChannelVariant::near_field;
        cs.users.push_back(std::move(uc));
    }
    return cs;
}

// Replaces every user link by its far-field approximation with the large-scale
// gain matched to the true reference-path gain. Used by the design-mismatch
// baseline: optimize on these, report on the true channels.
inline ChannelSet to_far_field_design(const ChannelSet& channels, const ScenarioGeometry& geo) {
    ChannelSet out = channels;
    for (int k = 1; k <= geo.k(); ++k) {
        const double r11 = (user_antenna_position(k, 1, geo) - element_position(1, geo)).norm();
        const double alpha_ref = geo.lambda_c / (4.0 * pi * r11);
        auto& uc = out.users[static_cast<std::size_t>(k - 1)];
        uc.h = far_field_user_channel(k, geo, alpha_ref * alpha_ref);
        uc.variant = ChannelVariant::far_field;
    }
    return out;
}

}  // namespace starbeam

#endif
