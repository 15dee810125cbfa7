#pragma once

#include <cstddef>
#include <span>

#include "veil/refine.hpp"

namespace veil::detail {

// Row product for an interior pixel; `x` points at the top-left neighbour.
template <int R>
inline double interior_row_product(const double* c, const double* x, int width) {
    constexpr int side = 2 * R + 1;
    double s = 0.0;
    for (int dy = 0; dy < side; ++dy) {
        const double* xr = x + static_cast<std::ptrdiff_t>(dy) * width;
        const double* cr = c + dy * side;
        for (int dx = 0; dx < side; ++dx) s += cr[dx] * xr[dx];
    }
    return s;
}

inline double interior_row_product_any(const double* c, const double* x, int width, int reach) {
    switch (reach) {
        case 1: return interior_row_product<1>(c, x, width);
        case 2: return interior_row_product<2>(c, x, width);
        case 3: return interior_row_product<3>(c, x, width);
        case 4: return interior_row_product<4>(c, x, width);
        default: break;
    }
    const int side = 2 * reach + 1;
    double s = 0.0;
    for (int dy = 0; dy < side; ++dy) {
        for (int dx = 0; dx < side; ++dx) s += c[dy * side + dx] * x[static_cast<std::ptrdiff_t>(dy) * width + dx];
    }
    return s;
}

// Row (px, py) of (A + shift Id) x, any pixel.
inline double row_product(const StencilMatrix& a, std::span<const double> x, int px, int py, double shift) {
    const int r = a.reach();
    const int w = a.width();
    const int h = a.height();
    const std::size_t i = static_cast<std::size_t>(py) * w + px;
    const double* c = a.row_coefficients(i);
    if (px >= r && px < w - r && py >= r && py < h - r) {
        const double* origin = x.data() + (static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(r) * w - r);
        return shift * x[i] + interior_row_product_any(c, origin, w, r);
    }
    double s = shift * x[i];
    for (int dy = -r; dy <= r; ++dy) {
        const int qy = py + dy;
        for (int dx = -r; dx <= r; ++dx, ++c) {
            const int qx = px + dx;
            if (qy < 0 || qy >= h || qx < 0 || qx >= w) continue;
            s += *c * x[static_cast<std::size_t>(qy) * w + qx];
        }
    }
    return s;
}

}  // namespace veil::detail
