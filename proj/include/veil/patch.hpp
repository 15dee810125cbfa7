#pragma once

#include "veil/image.hpp"

namespace veil {

enum class Reducer { min, max };

// Sliding-window min or max over a side x side window centred on each pixel.
// Borders use edge replication, which for min/max is the same as restricting
// the window to the pixels inside the raster. Output matches the brute-force
// definition exactly.
ScalarMap patch_reduce(const ScalarMap& map, PatchSize patch, Reducer reducer);

// Per-channel variant: each channel is reduced independently.
Image patch_reduce(const Image& image, PatchSize patch, Reducer reducer);

// Reduces jointly over the window and the three channels.
ScalarMap patch_reduce_joint(const Image& image, PatchSize patch, Reducer reducer);

}  // namespace veil
