#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "veil/error.hpp"

namespace veil {

// Row-major, channel-interleaved raster of linear intensities.
//
// Rasters produced by the loaders, priors and simulator hold values in [0,1].
// The only producer allowed to step outside that range is reflectivity
// recovery with clamping disabled, which exists for analysis.
template <int Channels>
class Raster {
public:
    static constexpr int channels = Channels;

    Raster() = default;

    Raster(int width, int height, double fill = 0.0)
        : width_(checked_extent(width)),
          height_(checked_extent(height)),
          data_(static_cast<std::size_t>(width) * height * Channels, fill) {}

    Raster(int width, int height, std::vector<double> data)
        : width_(checked_extent(width)), height_(checked_extent(height)), data_(std::move(data)) {
        if (data_.size() != static_cast<std::size_t>(width_) * height_ * Channels) {
            throw InvalidArgument("raster data size does not match its dimensions");
        }
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    bool empty() const noexcept { return data_.empty(); }
    std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }

    double& at(int x, int y, int c = 0) noexcept { return data_[index(x, y, c)]; }
    double at(int x, int y, int c = 0) const noexcept { return data_[index(x, y, c)]; }

    // Edge-replicated access: out-of-range coordinates are clamped.
    double clamped(int x, int y, int c = 0) const noexcept {
        x = x < 0 ? 0 : (x >= width_ ? width_ - 1 : x);
        y = y < 0 ? 0 : (y >= height_ ? height_ - 1 : y);
        return at(x, y, c);
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    std::span<double> row(int y) noexcept {
        return std::span<double>(data_).subspan(static_cast<std::size_t>(y) * width_ * Channels,
                                                static_cast<std::size_t>(width_) * Channels);
    }
    std::span<const double> row(int y) const noexcept {
        return std::span<const double>(data_).subspan(
            static_cast<std::size_t>(y) * width_ * Channels,
            static_cast<std::size_t>(width_) * Channels);
    }

    bool same_size(int w, int h) const noexcept { return w == width_ && h == height_; }
    template <int Other>
    bool same_size(const Raster<Other>& other) const noexcept {
        return same_size(other.width(), other.height());
    }

    bool operator==(const Raster&) const = default;

private:
    static int checked_extent(int v) {
        if (v < 1) throw InvalidArgument("raster dimensions must be at least 1x1");
        return v;
    }
    std::size_t index(int x, int y, int c) const noexcept {
        return (static_cast<std::size_t>(y) * width_ + x) * Channels + c;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<double> data_;
};

// H x W x 3 RGB radiance: degraded input, haze-free scene or recovered reflectivity.
using Image = Raster<3>;
// H x W scalar field; a transmission map when every value lies in [0,1].
using ScalarMap = Raster<1>;

using Rgb = std::array<double, 3>;

inline Rgb pixel(const Image& img, int x, int y) {
    return {img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)};
}

inline void set_pixel(Image& img, int x, int y, const Rgb& v) {
    img.at(x, y, 0) = v[0];
    img.at(x, y, 1) = v[1];
    img.at(x, y, 2) = v[2];
}

// Throws DimensionMismatch unless a and b share width and height.
template <int A, int B>
void require_same_size(const Raster<A>& a, const Raster<B>& b, const char* what) {
    if (!a.same_size(b)) {
        throw DimensionMismatch(std::string(what) + ": raster dimensions differ");
    }
}

// Throws InvalidArgument if the raster is empty or any value lies outside [0,1].
template <int C>
void require_unit_range(const Raster<C>& r, const char* what) {
    if (r.empty()) throw InvalidArgument(std::string(what) + ": empty raster");
    for (double v : r.data()) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw InvalidArgument(std::string(what) + ": value outside [0,1]");
        }
    }
}

// Odd square window side used by every patch operator (default 15).
class PatchSize {
public:
    constexpr PatchSize() = default;
    explicit PatchSize(int side) : side_(side) {
        if (side < 1 || side % 2 == 0) {
            throw InvalidArgument("patch side must be odd and >= 1");
        }
    }
    constexpr int side() const noexcept { return side_; }
    constexpr int radius() const noexcept { return side_ / 2; }
    bool operator==(const PatchSize&) const = default;

private:
    int side_ = 15;
};

// Bilinear resampling with pixel-center alignment and clamped borders.
template <int C>
Raster<C> resize_bilinear(const Raster<C>& src, int width, int height);

// Downsamples so the longer side equals max_side; returns the input unchanged
// when it already fits.
template <int C>
Raster<C> resize_max_side(const Raster<C>& src, int max_side);

// Pointwise clamp to [0,1].
template <int C>
Raster<C> clamp_unit(Raster<C> r);

// Extracts a single channel of an image.
ScalarMap channel(const Image& img, int c);

}  // namespace veil
