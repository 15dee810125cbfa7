#pragma once

#include <filesystem>

#include "veil/image.hpp"

namespace veil {

// Decodes an 8- or 16-bit RGB(A) raster. Samples are divided by the sample
// type's maximum (255 or 65535); no gamma transform is applied. An alpha
// channel is dropped with a warning.
Image load_image(const std::filesystem::path& path);

// Clamps to [0,1], quantizes with round(v * 255) and writes lossless 8-bit RGB.
// The container is chosen from the extension (.png, .ppm, .tif, .bmp).
void save_image(const Image& image, const std::filesystem::path& path);

// Writes an 8-bit grayscale raster, round(clamp(v) * 255).
void save_scalar_map(const ScalarMap& map, const std::filesystem::path& path);

// One row per line, comma-separated, printed with round-trip precision.
void save_scalar_csv(const ScalarMap& map, const std::filesystem::path& path);
ScalarMap load_scalar_csv(const std::filesystem::path& path);

// True for extensions load_image knows how to decode.
bool is_image_path(const std::filesystem::path& path);

}  // namespace veil
