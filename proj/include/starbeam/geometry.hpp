// SPDX-License-Identifier: Apache-2.0
//
// Deployment geometry for a transmissive/reflective surface aided downlink.
//
// Fixed frame: the base station sits at the origin, the surface panel lies in
// the YZ plane with its reference element on the y axis, and users live in the
// z = 0 plane. The reflection region is the half-space x > 0, the transmission
// region is x < 0.
#ifndef STARBEAM_GEOMETRY_HPP
#define STARBEAM_GEOMETRY_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "starbeam/rng.hpp"
#include "starbeam/types.hpp"

namespace starbeam {

enum class UserSetup { random_angles, inline_angles };

struct UserPlacement {
    int index = 0;  // 1-based user id
    Side region = Side::r;
    double angle_rad = 0.0;   // polar angle from +y axis within the region half-plane
    double radius_m = 0.0;    // distance from the surface reference element
    Vec3 ref_antenna = Vec3::Zero();  // position of antenna 1
};

struct ScenarioGeometry {
    Vec3 bs_position = Vec3::Zero();
    Vec3 star_position = Vec3(0.0, 50.0, 0.0);
    double lambda_c = 0.03;  // carrier wavelength [m]
    double d_r = 0.03;       // surface element spacing [m]
    double d_b = 0.015;      // base-station antenna spacing [m]
    double d_u = 0.015;      // user antenna spacing [m]
    int n_y = 5;             // surface columns (fast index, along y)
    int n_z = 8;             // surface rows (slow index, along z)
    int m_b = 16;            // base-station antennas
    int m = 4;               // antennas per user
    std::vector<UserPlacement> users;

    int n() const { return n_y * n_z; }
    int k() const { return static_cast<int>(users.size()); }
    double wavenumber() const { return two_pi / lambda_c; }
};

// Position of surface element n (1-based). Elements are indexed row by row
// with the y index running fastest.
inline Vec3 element_position(int n, const ScenarioGeometry& geo) {
    require(n >= 1 && n <= geo.n(), "element_position: index out of range");
    const int iy = (n - 1) % geo.n_y;
    const int iz = (n - 1) / geo.n_y;
    return geo.star_position + Vec3(0.0, iy * geo.d_r, iz * geo.d_r);
}

// Position of antenna m (1-based) of user k (1-based); user arrays are ULAs
// parallel to the y axis in the z = 0 plane.
inline Vec3 user_antenna_position(int k, int m, const ScenarioGeometry& geo) {
    require(k >= 1 && k <= geo.k(), "user_antenna_position: user index out of range");
    require(m >= 1 && m <= geo.m, "user_antenna_position: antenna index out of range");
    return geo.users[static_cast<std::size_t>(k - 1)].ref_antenna + Vec3(0.0, (m - 1) * geo.d_u, 0.0);
}

// Classic boundary between radiating near field and far field, 2 D^2 / lambda
// for an antenna of largest dimension D.
inline double rayleigh_distance(double aperture_d, double lambda) {
    require(aperture_d > 0.0 && lambda > 0.0, "rayleigh_distance: arguments must be positive");
    return 2.0 * aperture_d * aperture_d / lambda;
}

// Largest dimension of the surface panel (its diagonal).
inline double panel_aperture(const ScenarioGeometry& geo) {
    return std::hypot(geo.n_y * geo.d_r, geo.n_z * geo.d_r);
}

struct ScenarioParams {
    double lambda_c = 0.03;
    double star_distance = 50.0;
    int n_y = 5;
    int n_z = 8;
    int m_b = 16;
    int m = 4;
    int k = 4;
    double angle_min_rad = 15.0 * pi / 180.0;
    double angle_max_rad = 165.0 * pi / 180.0;
    double min_separation_rad = 10.0 * pi / 180.0;
    std::vector<double> radii = {2.0, 4.0};

    void validate() const {
        require(lambda_c > 0.0, "scenario: lambda_c must be positive");
        require(star_distance > 0.0, "scenario: star_distance must be positive");
        require(n_y >= 1 && n_z >= 1, "scenario: surface grid must be nonempty");
        require(m_b >= 1 && m >= 1, "scenario: antenna counts must be positive");
        require(k >= 1, "scenario: need at least one user");
        require(angle_min_rad < angle_max_rad, "scenario: empty angle range");
        require(!radii.empty(), "scenario: radii list empty");
        for (double r : radii) require(r > 0.0, "scenario: radii must be positive");
    }
};

namespace detail {

inline Vec3 user_position_from_polar(const Vec3& star, Side region, double angle, double radius) {
    const double sgn = (region == Side::r) ? 1.0 : -1.0;
    // angle measured from +y toward the region's half-space; angle = pi/2 is broadside
    return star + Vec3(sgn * radius * std::sin(angle), radius * std::cos(angle), 0.0);
}

inline std::vector<double> draw_region_angles(int count, const ScenarioParams& p, UserSetup setup,
                                              RngStream& rng) {
    std::vector<double> angles;
    if (setup == UserSetup::inline_angles) {
        angles.assign(static_cast<std::size_t>(count), rng.uniform(p.angle_min_rad, p.angle_max_rad));
        return angles;
    }
    int attempts = 0;
    while (static_cast<int>(angles.size()) < count) {
        require(++attempts < 10000, "sample_scenario: could not separate user angles");
        const double a = rng.uniform(p.angle_min_rad, p.angle_max_rad);
        bool ok = true;
        for (double b : angles) ok = ok && std::abs(a - b) >= p.min_separation_rad;
        if (ok) angles.push_back(a);
    }
    return angles;
}

}  // namespace detail

// Draws a full deployment. The first half of the users (ids 1..ceil(K/2)) are
// placed in the transmission region, the rest in the reflection region. Within
// a region users cycle through the configured radii, so the default two users
// sit at 2 m and 4 m. The random setup draws separated angles per region; the
// inline setup puts all users of a region on one ray.
inline ScenarioGeometry sample_scenario(UserSetup setup, SeedKey seed,
                                        const ScenarioParams& params = ScenarioParams{}) {
    params.validate();
    ScenarioGeometry geo;
    geo.lambda_c = params.lambda_c;
    geo.d_r = params.lambda_c;        // element spacing equal to one wavelength
    geo.d_b = params.lambda_c / 2.0;  // half-wavelength antenna spacings
    geo.d_u = params.lambda_c / 2.0;
    geo.n_y = params.n_y;
    geo.n_z = params.n_z;
    geo.m_b = params.m_b;
    geo.m = params.m;
    geo.bs_position = Vec3::Zero();
    geo.star_position = Vec3(0.0, params.star_distance, 0.0);

    RngStream rng(seed.derive(seed_label::placement));
    const int k_t = (params.k + 1) / 2;
    const int k_r = params.k - k_t;
    for (Side region : {Side::t, Side::r}) {
        const int count = (region == Side::t) ? k_t : k_r;
        if (count == 0) continue;
        const std::vector<double> angles = detail::draw_region_angles(count, params, setup, rng);
        for (int j = 0; j < count; ++j) {
            UserPlacement u;
            u.index = (region == Side::t) ? (j + 1) : (k_t + j + 1);
            u.region = region;
            u.angle_rad = angles[static_cast<std::size_t>(j)];
            u.radius_m = params.radii[static_cast<std::size_t>(j) % params.radii.size()];
            u.ref_antenna = detail::user_position_from_polar(geo.star_position, region, u.angle_rad, u.radius_m);
            geo.users.push_back(u);
        }
    }
    return geo;
}

}  // namespace starbeam

#endif
