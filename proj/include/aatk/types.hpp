#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "aatk/error.hpp"

namespace aatk {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using VecI = std::vector<int>;

constexpr double TWO_PI = 6.283185307179586476925286766559;

inline bool all_finite(const Vec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (!std::isfinite(v[i])) return false;
    return true;
}

inline double inf_norm(const Vec& v) {
    return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InvalidInputError(msg);
}

/// Wrap an angle into [0, 2*pi).
inline double wrap_angle(double phi) {
    double w = std::fmod(phi, TWO_PI);
    if (w < 0) w += TWO_PI;
    if (w >= TWO_PI) w = 0.0;  // fmod can land exactly on 2*pi
    return w;
}

/// Distance between two angles modulo 2*pi.
inline double angle_dist(double a, double b) {
    double d = std::fabs(wrap_angle(a) - wrap_angle(b));
    return std::min(d, TWO_PI - d);
}

/// Minimal-norm least-squares solve A x = b (column-pivoted QR).
inline Vec lstsq(const Mat& A, const Vec& b) {
    return A.colPivHouseholderQr().solve(b);
}

/// FNV-1a 64-bit hash, used to fingerprint system definitions in reports.
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace aatk
