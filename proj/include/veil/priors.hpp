#pragma once

#include <string_view>

#include "veil/ambient.hpp"
#include "veil/image.hpp"

namespace veil {

enum class PriorKind { veil_difference, contrast, dcp, udcp };

std::string_view to_string(PriorKind kind);

// Patch-level transmission estimate before edge-aware refinement.
struct RoughTransmission {
    ScalarMap map;  // values in [0,1]
    PriorKind kind;
};

// Minimum over the three channels of the patch minimum.
ScalarMap dark_channel(const Image& image, PatchSize patch);

// Dark channel restricted to green and blue (underwater variant).
ScalarMap udcp(const Image& image, PatchSize patch);

// Largest possible |J - A| for a haze-free value J in [0,1]:
// max over channels of max(1 - A, A). Never below 0.5.
double veil_difference_denominator(const AmbientLight& ambient);

// Veil-difference transmission: the largest |I - A| over the window and all
// channels jointly, divided by veil_difference_denominator(A). With
// A = (1,1,1) this is exactly 1 - dark_channel.
RoughTransmission veil_difference_transmission(const Image& image, const AmbientLight& ambient,
                                               PatchSize patch);

// Contrast transmission: per-channel window range (max - min), then the
// maximum over channels. Haze-free windows are assumed to span the full range.
RoughTransmission contrast_transmission(const Image& image, PatchSize patch);

}  // namespace veil
