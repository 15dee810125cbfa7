#pragma once

#include <array>

#include "veil/image.hpp"

namespace veil {

// Lower bound applied to every ambient channel so the veil-difference
// denominator and the reflectivity inversion never divide by ~0.
inline constexpr double kAmbientFloor = 0.01;

// Colour and radiance of the medium's veiling light. Always within
// [kAmbientFloor, 1] per channel; out-of-range inputs are clamped.
class AmbientLight {
public:
    AmbientLight() = default;
    AmbientLight(double r, double g, double b);
    explicit AmbientLight(const Rgb& rgb) : AmbientLight(rgb[0], rgb[1], rgb[2]) {}

    double operator[](int c) const noexcept { return rgb_[c]; }
    const Rgb& rgb() const noexcept { return rgb_; }

    bool operator==(const AmbientLight&) const = default;

private:
    Rgb rgb_{1.0, 1.0, 1.0};
};

inline constexpr double kDefaultShadesOfGrayP = 6.0;

// Minkowski p-mean per channel, (mean I^p)^(1/p). p = 1 is gray-world; large
// p approaches max-RGB. Requires p >= 1.
AmbientLight shades_of_gray(const Image& image, double p = kDefaultShadesOfGrayP);

// Unclamped p-means, exposed for the scaling property.
Rgb minkowski_mean(const Image& image, double p);

// Per-channel mean of the brightest `quantile` fraction of pixels ranked by
// mean-of-channels luminance; at least one pixel is always used. Ties are
// broken by raster order.
AmbientLight brightest_pixel(const Image& image, double quantile);

}  // namespace veil
