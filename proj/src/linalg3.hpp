#pragma once

#include <array>

namespace veil::detail {

// Upper triangle of a symmetric 3x3 matrix: xx, xy, xz, yy, yz, zz.
using Sym3 = std::array<double, 6>;

inline Sym3 invert(const Sym3& m) {
    const double a = m[0], b = m[1], c = m[2], d = m[3], e = m[4], f = m[5];
    const double c00 = d * f - e * e;
    const double c01 = c * e - b * f;
    const double c02 = b * e - c * d;
    const double c11 = a * f - c * c;
    const double c12 = b * c - a * e;
    const double c22 = a * d - b * b;
    const double det = a * c00 + b * c01 + c * c02;
    const double inv = 1.0 / det;
    return {c00 * inv, c01 * inv, c02 * inv, c11 * inv, c12 * inv, c22 * inv};
}

// u^T M v, evaluated so that swapping u and v gives a bit-identical result.
inline double bilinear(const Sym3& m, const double* u, const double* v) {
    return m[0] * (u[0] * v[0]) + m[3] * (u[1] * v[1]) + m[5] * (u[2] * v[2]) +
           m[1] * (u[0] * v[1] + u[1] * v[0]) + m[2] * (u[0] * v[2] + u[2] * v[0]) +
           m[4] * (u[1] * v[2] + u[2] * v[1]);
}

inline std::array<double, 3> apply(const Sym3& m, const std::array<double, 3>& v) {
    return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
            m[1] * v[0] + m[3] * v[1] + m[4] * v[2],
            m[2] * v[0] + m[4] * v[1] + m[5] * v[2]};
}

}  // namespace veil::detail
