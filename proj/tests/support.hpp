#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "veil/image.hpp"

namespace veil::test {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

template <int C>
Raster<C> random_raster(Rng& rng, int w, int h, double lo = 0.0, double hi = 1.0) {
    Raster<C> r(w, h);
    for (double& v : r.data()) v = uniform(rng, lo, hi);
    return r;
}

inline Image random_image(Rng& rng, int w, int h) { return random_raster<3>(rng, w, h); }
inline ScalarMap random_map(Rng& rng, int w, int h) { return random_raster<1>(rng, w, h); }

// Values drawn from a handful of levels, so ties and exact extremes occur.
inline Image quantized_image(Rng& rng, int w, int h) {
    Image img(w, h);
    for (double& v : img.data()) v = uniform_int(rng, 0, 4) / 4.0;
    return img;
}

// Owning copy of a raster's samples; safe to loop over when the raster is a temporary.
template <int C>
std::vector<double> values(const Raster<C>& r) {
    return {r.data().begin(), r.data().end()};
}

template <int C>
double max_abs_diff(const Raster<C>& a, const Raster<C>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

// Scratch directory removed when the test ends.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("veil_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace veil::test
