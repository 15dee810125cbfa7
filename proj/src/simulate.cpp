#include "veil/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "veil/parallel.hpp"

namespace veil {

OpticalDepthField::OpticalDepthField(ScalarMap tau) : tau_(std::move(tau)) {
    if (tau_.empty()) throw InvalidArgument("optical depth field is empty");
    for (double v : tau_.data()) {
        if (!(v >= 0.0) || std::isinf(v)) throw InvalidArgument("optical depth must be finite and >= 0");
    }
}

OpticalDepthField OpticalDepthField::uniform(int width, int height, double tau) {
    return OpticalDepthField(ScalarMap(width, height, tau));
}

ScalarMap OpticalDepthField::transmission() const {
    ScalarMap t(tau_.width(), tau_.height());
    auto src = tau_.data();
    auto dst = t.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::exp(-src[i]);
    return t;
}

Image degrade_with_transmission(const Image& reflectivity, const AmbientLight& ambient,
                                const ScalarMap& transmission) {
    require_same_size(reflectivity, transmission, "degrade");
    Image out(reflectivity.width(), reflectivity.height());
    auto m = reflectivity.data();
    auto t = transmission.data();
    auto dst = out.data();
    parallel_for(t.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            for (int c = 0; c < 3; ++c) {
                const double a = ambient[c];
                dst[3 * i + c] = a * m[3 * i + c] * t[i] + a * (1.0 - t[i]);
            }
        }
    });
    return out;
}

Image degrade(const Image& reflectivity, const DegradationSpec& spec) {
    if (reflectivity.empty()) throw InvalidArgument("degrade: empty reflectivity");
    if (const double* tau = std::get_if<double>(&spec.depth)) {
        if (!(*tau >= 0.0)) throw InvalidArgument("degrade: tau must be >= 0");
        return degrade_with_transmission(
            reflectivity, spec.ambient,
            ScalarMap(reflectivity.width(), reflectivity.height(), std::exp(-*tau)));
    }
    const auto& field = std::get<OpticalDepthField>(spec.depth);
    require_same_size(reflectivity, field.tau(), "degrade");
    return degrade_with_transmission(reflectivity, spec.ambient, field.transmission());
}

OpticalDepthField depth_ramp(int width, int height, double tau_min, double tau_max, Axis axis) {
    if (!(tau_min >= 0.0 && tau_min <= tau_max)) {
        throw InvalidArgument("depth_ramp: need 0 <= tau_min <= tau_max");
    }
    ScalarMap tau(width, height);
    const int steps = (axis == Axis::horizontal ? width : height) - 1;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const int k = axis == Axis::horizontal ? x : y;
            const double s = steps > 0 ? static_cast<double>(k) / steps : 0.0;
            tau.at(x, y) = std::lerp(tau_min, tau_max, s);
        }
    }
    return OpticalDepthField(std::move(tau));
}

void validate_ladder(const std::vector<double>& taus) {
    if (taus.empty()) throw InvalidArgument("ladder: empty tau list");
    if (taus.front() != 0.0) throw InvalidArgument("ladder: first tau must be 0");
    for (std::size_t k = 1; k < taus.size(); ++k) {
        if (!(taus[k] > taus[k - 1]) || std::isinf(taus[k])) {
            throw InvalidArgument("ladder: taus must be finite and strictly increasing");
        }
    }
}

std::vector<Image> turbid_ladder(const Image& reflectivity, const AmbientLight& ambient,
                                 const std::vector<double>& taus) {
    validate_ladder(taus);
    std::vector<Image> frames;
    frames.reserve(taus.size());
    for (double tau : taus) frames.push_back(degrade(reflectivity, {ambient, tau}));
    return frames;
}

// ---------------------------------------------------------------------------

namespace {

// Smooth value noise on a coarse lattice, bilinearly interpolated.
class ValueNoise {
public:
    ValueNoise(int cells_x, int cells_y, std::mt19937_64& rng)
        : nx_(cells_x + 2), ny_(cells_y + 2), values_(static_cast<std::size_t>(nx_) * ny_) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (double& v : values_) v = u(rng);
    }

    // (s, t) in [0,1]^2
    double sample(double s, double t) const {
        const double fx = s * (nx_ - 2);
        const double fy = t * (ny_ - 2);
        const int x0 = std::min(static_cast<int>(fx), nx_ - 2);
        const int y0 = std::min(static_cast<int>(fy), ny_ - 2);
        const double ax = smooth(fx - x0);
        const double ay = smooth(fy - y0);
        const double top = std::lerp(at(x0, y0), at(x0 + 1, y0), ax);
        const double bottom = std::lerp(at(x0, y0 + 1), at(x0 + 1, y0 + 1), ax);
        return std::lerp(top, bottom, ay);
    }

private:
    static double smooth(double f) { return f * f * (3.0 - 2.0 * f); }
    double at(int x, int y) const { return values_[static_cast<std::size_t>(y) * nx_ + x]; }

    int nx_;
    int ny_;
    std::vector<double> values_;
};

struct Blob {
    double cx, cy, rx, ry, angle;
    Rgb colour;
};

Rgb random_colour(std::mt19937_64& rng) {
    // Natural surfaces are rarely fully saturated but usually have one weak channel.
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Rgb c{u(rng), u(rng), u(rng)};
    const int weak = static_cast<int>(rng() % 3);
    c[weak] *= 0.35;
    return c;
}

}  // namespace

Image synthetic_scene(int width, int height, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    const Rgb base_top = random_colour(rng);
    const Rgb base_bottom = random_colour(rng);
    std::vector<Blob> blobs(24 + rng() % 16);
    for (auto& b : blobs) {
        b.cx = u(rng);
        b.cy = u(rng);
        b.rx = 0.04 + 0.25 * u(rng);
        b.ry = 0.04 + 0.25 * u(rng);
        b.angle = u(rng) * std::numbers::pi;
        b.colour = random_colour(rng);
    }
    const ValueNoise shading(4, 4, rng);
    const ValueNoise grain(std::max(2, width / 3), std::max(2, height / 3), rng);
    const ValueNoise crevices(std::max(2, width / 10), std::max(2, height / 10), rng);

    Image img(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double s = (x + 0.5) / width;
            const double t = (y + 0.5) / height;
            Rgb c;
            for (int k = 0; k < 3; ++k) c[k] = std::lerp(base_top[k], base_bottom[k], t);
            for (const auto& b : blobs) {
                const double dx = s - b.cx;
                const double dy = t - b.cy;
                const double ca = std::cos(b.angle);
                const double sa = std::sin(b.angle);
                const double px = (dx * ca + dy * sa) / b.rx;
                const double py = (-dx * sa + dy * ca) / b.ry;
                if (px * px + py * py <= 1.0) c = b.colour;
            }
            const double light = 0.55 + 0.45 * shading.sample(s, t);
            const double texture = 0.6 + 0.4 * grain.sample(s, t);
            // Sparse dark cracks and shadows keep the dark channel near zero.
            const double crack = crevices.sample(s, t);
            const double shadow = crack < 0.22 ? 0.15 * crack : 1.0;
            for (int k = 0; k < 3; ++k) {
                img.at(x, y, k) = std::clamp(c[k] * light * texture * shadow, 0.0, 1.0);
            }
        }
    }
    return img;
}

}  // namespace veil
