#include "veil/image.hpp"

#include <algorithm>
#include <cmath>

#include "veil/parallel.hpp"

namespace veil {

namespace {

struct Tap {
    int lo;
    int hi;
    double frac;
};

std::vector<Tap> taps(int src_len, int dst_len) {
    std::vector<Tap> out(dst_len);
    const double scale = static_cast<double>(src_len) / dst_len;
    for (int i = 0; i < dst_len; ++i) {
        double s = (i + 0.5) * scale - 0.5;
        s = std::clamp(s, 0.0, static_cast<double>(src_len - 1));
        const int lo = static_cast<int>(std::floor(s));
        const int hi = std::min(lo + 1, src_len - 1);
        out[i] = {lo, hi, s - lo};
    }
    return out;
}

}  // namespace

template <int C>
Raster<C> resize_bilinear(const Raster<C>& src, int width, int height) {
    if (src.empty()) throw InvalidArgument("resize_bilinear: empty raster");
    if (src.same_size(width, height)) return src;
    Raster<C> dst(width, height);
    const auto xt = taps(src.width(), width);
    const auto yt = taps(src.height(), height);
    parallel_for(static_cast<std::size_t>(height), [&](std::size_t y0, std::size_t y1) {
        for (std::size_t y = y0; y < y1; ++y) {
            const Tap& ty = yt[y];
            for (int x = 0; x < width; ++x) {
                const Tap& tx = xt[x];
                for (int c = 0; c < C; ++c) {
                    const double top = src.at(tx.lo, ty.lo, c) +
                                       tx.frac * (src.at(tx.hi, ty.lo, c) - src.at(tx.lo, ty.lo, c));
                    const double bottom = src.at(tx.lo, ty.hi, c) +
                                          tx.frac * (src.at(tx.hi, ty.hi, c) - src.at(tx.lo, ty.hi, c));
                    dst.at(x, static_cast<int>(y), c) = top + ty.frac * (bottom - top);
                }
            }
        }
    });
    return dst;
}

template <int C>
Raster<C> resize_max_side(const Raster<C>& src, int max_side) {
    if (max_side < 1) throw InvalidArgument("resize_max_side: max_side must be >= 1");
    const int longest = std::max(src.width(), src.height());
    if (longest <= max_side) return src;
    const double scale = static_cast<double>(max_side) / longest;
    int w = src.width() >= src.height() ? max_side
                                        : static_cast<int>(std::lround(src.width() * scale));
    int h = src.height() > src.width() ? max_side
                                       : static_cast<int>(std::lround(src.height() * scale));
    return resize_bilinear(src, std::max(1, w), std::max(1, h));
}

template <int C>
Raster<C> clamp_unit(Raster<C> r) {
    for (double& v : r.data()) v = std::clamp(v, 0.0, 1.0);
    return r;
}

ScalarMap channel(const Image& img, int c) {
    ScalarMap out(img.width(), img.height());
    auto src = img.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[i * 3 + c];
    return out;
}

template Raster<1> resize_bilinear(const Raster<1>&, int, int);
template Raster<3> resize_bilinear(const Raster<3>&, int, int);
template Raster<1> resize_max_side(const Raster<1>&, int);
template Raster<3> resize_max_side(const Raster<3>&, int);
template Raster<1> clamp_unit(Raster<1>);
template Raster<3> clamp_unit(Raster<3>);

}  // namespace veil
