// SPDX-License-Identifier: Apache-2.0
#ifndef STARBEAM_TYPES_HPP
#define STARBEAM_TYPES_HPP

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace starbeam {

using cx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;
inline constexpr double speed_of_light = 299792458.0;

// Surface side / user region. Also used as an array index (t = 0, r = 1).
enum class Side { t = 0, r = 1 };

inline int side_index(Side s) { return static_cast<int>(s); }
inline Side other_side(Side s) { return s == Side::t ? Side::r : Side::t; }
inline char side_tag(Side s) { return s == Side::t ? 't' : 'r'; }

inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double watts_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }

// Wraps an angle into [0, 2*pi).
inline double canonical_phase(double phase) {
    double p = std::fmod(phase, two_pi);
    if (p < 0.0) p += two_pi;
    if (p >= two_pi) p = 0.0;
    return p;
}

struct invalid_argument_error : std::invalid_argument {
    explicit invalid_argument_error(const std::string& what) : std::invalid_argument(what) {}
};

struct solver_error : std::runtime_error {
    explicit solver_error(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw invalid_argument_error(what);
}

}  // namespace starbeam

#endif
