#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "veil/ambient.hpp"
#include "veil/image.hpp"

namespace veil {

// Optical depth tau(x) = c * d(x) >= 0. Transmission is exp(-tau).
class OpticalDepthField {
public:
    explicit OpticalDepthField(ScalarMap tau);
    static OpticalDepthField uniform(int width, int height, double tau);

    const ScalarMap& tau() const noexcept { return tau_; }
    ScalarMap transmission() const;

private:
    ScalarMap tau_;
};

enum class Axis { horizontal, vertical };

struct DegradationSpec {
    AmbientLight ambient;
    std::variant<double, OpticalDepthField> depth = 0.0;  // uniform tau or a field
};

// I = A * M * t + A * (1 - t), per pixel and channel, t = exp(-tau).
Image degrade(const Image& reflectivity, const DegradationSpec& spec);

// Same model with the transmission given directly (values in [0,1]).
Image degrade_with_transmission(const Image& reflectivity, const AmbientLight& ambient,
                                const ScalarMap& transmission);

// Linear tau ramp from tau_min at the first column/row to tau_max at the last.
OpticalDepthField depth_ramp(int width, int height, double tau_min, double tau_max, Axis axis);

// One uniformly degraded frame per tau. The list must start at 0 and be
// strictly increasing; frame 0 is the clean, illuminated reference A * M.
std::vector<Image> turbid_ladder(const Image& reflectivity, const AmbientLight& ambient,
                                 const std::vector<double>& taus);

// Throws InvalidArgument unless taus is non-empty, starts at 0 and strictly increases.
void validate_ladder(const std::vector<double>& taus);

// Procedural reflectivity with natural-image statistics: overlapping coloured
// regions, shading, fine texture and dark crevices. Deterministic in the seed.
Image synthetic_scene(int width, int height, std::uint64_t seed);

}  // namespace veil
