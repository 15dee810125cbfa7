#include "veil/patch.hpp"

#include <algorithm>
#include <vector>

#include "veil/parallel.hpp"

namespace veil {

namespace {

// Monotone-deque running min/max over [i - r, i + r] clipped to [0, n).
// `in` and `out` are strided views into raster storage.
template <Reducer R>
void slide_1d(const double* in, std::ptrdiff_t in_stride, double* out, std::ptrdiff_t out_stride,
              int n, int r, std::vector<int>& dq) {
    auto better = [](double a, double b) {
        if constexpr (R == Reducer::min) {
            return a <= b;
        } else {
            return a >= b;
        }
    };
    dq.resize(static_cast<std::size_t>(n));
    int head = 0;
    int tail = 0;
    for (int j = 0; j < n + r; ++j) {
        if (j < n) {
            const double v = in[j * in_stride];
            while (tail > head && better(v, in[dq[tail - 1] * in_stride])) --tail;
            dq[tail++] = j;
        }
        const int i = j - r;
        if (i < 0) continue;
        while (dq[head] < i - r) ++head;
        out[i * out_stride] = in[dq[head] * in_stride];
    }
}

template <Reducer R>
void separable(const double* src, double* dst, int width, int height, int stride, int r) {
    // Horizontal pass into a scratch plane, then vertical pass into dst.
    std::vector<double> tmp(static_cast<std::size_t>(width) * height);
    parallel_for(static_cast<std::size_t>(height), [&](std::size_t y0, std::size_t y1) {
        std::vector<int> dq;
        for (std::size_t y = y0; y < y1; ++y) {
            slide_1d<R>(src + y * width * stride, stride, tmp.data() + y * width, 1, width, r, dq);
        }
    });
    parallel_for(static_cast<std::size_t>(width), [&](std::size_t x0, std::size_t x1) {
        std::vector<int> dq;
        for (std::size_t x = x0; x < x1; ++x) {
            slide_1d<R>(tmp.data() + x, width, dst + x * stride, static_cast<std::ptrdiff_t>(width) * stride,
                        height, r, dq);
        }
    });
}

void reduce_plane(const double* src, double* dst, int width, int height, int stride, int r,
                  Reducer reducer) {
    if (reducer == Reducer::min) {
        separable<Reducer::min>(src, dst, width, height, stride, r);
    } else {
        separable<Reducer::max>(src, dst, width, height, stride, r);
    }
}

}  // namespace

ScalarMap patch_reduce(const ScalarMap& map, PatchSize patch, Reducer reducer) {
    if (map.empty()) throw InvalidArgument("patch_reduce: empty map");
    ScalarMap out(map.width(), map.height());
    reduce_plane(map.data().data(), out.data().data(), map.width(), map.height(), 1, patch.radius(),
                 reducer);
    return out;
}

Image patch_reduce(const Image& image, PatchSize patch, Reducer reducer) {
    if (image.empty()) throw InvalidArgument("patch_reduce: empty image");
    Image out(image.width(), image.height());
    for (int c = 0; c < 3; ++c) {
        reduce_plane(image.data().data() + c, out.data().data() + c, image.width(), image.height(), 3,
                     patch.radius(), reducer);
    }
    return out;
}

ScalarMap patch_reduce_joint(const Image& image, PatchSize patch, Reducer reducer) {
    if (image.empty()) throw InvalidArgument("patch_reduce_joint: empty image");
    ScalarMap per_pixel(image.width(), image.height());
    auto src = image.data();
    auto dst = per_pixel.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        const double a = src[3 * i];
        const double b = src[3 * i + 1];
        const double c = src[3 * i + 2];
        dst[i] = reducer == Reducer::min ? std::min({a, b, c}) : std::max({a, b, c});
    }
    return patch_reduce(per_pixel, patch, reducer);
}

}  // namespace veil
