#include "veil/ambient.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "veil/parallel.hpp"

namespace veil {

AmbientLight::AmbientLight(double r, double g, double b) {
    const Rgb in{r, g, b};
    for (int c = 0; c < 3; ++c) {
        if (std::isnan(in[c])) throw InvalidArgument("ambient light channel is NaN");
        rgb_[c] = std::clamp(in[c], kAmbientFloor, 1.0);
    }
}

Rgb minkowski_mean(const Image& image, double p) {
    if (image.empty()) throw InvalidArgument("shades_of_gray: empty image");
    if (!(p >= 1.0) || !std::isfinite(p)) throw InvalidArgument("shades_of_gray: p must be finite and >= 1");
    const auto data = image.data();
    const std::size_t n = image.pixel_count();
    Rgb out{};
    for (int c = 0; c < 3; ++c) {
        const double sum = deterministic_sum(n, [&](std::size_t i) {
            return std::pow(std::max(0.0, data[3 * i + c]), p);
        });
        out[c] = std::pow(sum / static_cast<double>(n), 1.0 / p);
    }
    return out;
}

AmbientLight shades_of_gray(const Image& image, double p) {
    return AmbientLight(minkowski_mean(image, p));
}

AmbientLight brightest_pixel(const Image& image, double quantile) {
    if (image.empty()) throw InvalidArgument("brightest_pixel: empty image");
    if (!(quantile > 0.0 && quantile <= 1.0)) {
        throw InvalidArgument("brightest_pixel: quantile must lie in (0, 1]");
    }
    const auto data = image.data();
    const std::size_t n = image.pixel_count();
    const std::size_t k = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(quantile * static_cast<double>(n))), 1, n);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto luminance = [&](std::size_t i) { return (data[3 * i] + data[3 * i + 1] + data[3 * i + 2]) / 3.0; };
    auto brighter = [&](std::size_t a, std::size_t b) {
        const double la = luminance(a);
        const double lb = luminance(b);
        return la != lb ? la > lb : a < b;
    };
    std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1), order.end(), brighter);
    std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));

    Rgb sum{};
    for (std::size_t j = 0; j < k; ++j) {
        for (int c = 0; c < 3; ++c) sum[c] += data[3 * order[j] + c];
    }
    return AmbientLight(sum[0] / k, sum[1] / k, sum[2] / k);
}

}  // namespace veil
