#include "veil/priors.hpp"

#include <algorithm>
#include <cmath>

#include "veil/patch.hpp"

namespace veil {

std::string_view to_string(PriorKind kind) {
    switch (kind) {
        case PriorKind::veil_difference: return "veil_difference";
        case PriorKind::contrast: return "contrast";
        case PriorKind::dcp: return "dcp";
        case PriorKind::udcp: return "udcp";
    }
    return "unknown";
}

ScalarMap dark_channel(const Image& image, PatchSize patch) {
    return patch_reduce_joint(image, patch, Reducer::min);
}

ScalarMap udcp(const Image& image, PatchSize patch) {
    if (image.empty()) throw InvalidArgument("udcp: empty image");
    ScalarMap gb(image.width(), image.height());
    auto src = image.data();
    auto dst = gb.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::min(src[3 * i + 1], src[3 * i + 2]);
    return patch_reduce(gb, patch, Reducer::min);
}

double veil_difference_denominator(const AmbientLight& ambient) {
    double d = 0.0;
    for (int c = 0; c < 3; ++c) d = std::max(d, std::max(1.0 - ambient[c], ambient[c]));
    return d;
}

RoughTransmission veil_difference_transmission(const Image& image, const AmbientLight& ambient,
                                               PatchSize patch) {
    if (image.empty()) throw InvalidArgument("veil_difference_transmission: empty image");
    ScalarMap distance(image.width(), image.height());
    auto src = image.data();
    auto dst = distance.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        double m = 0.0;
        for (int c = 0; c < 3; ++c) m = std::max(m, std::abs(src[3 * i + c] - ambient[c]));
        dst[i] = m;
    }
    ScalarMap t = patch_reduce(distance, patch, Reducer::max);
    const double denom = veil_difference_denominator(ambient);
    for (double& v : t.data()) v = std::min(1.0, v / denom);
    return {std::move(t), PriorKind::veil_difference};
}

RoughTransmission contrast_transmission(const Image& image, PatchSize patch) {
    if (image.empty()) throw InvalidArgument("contrast_transmission: empty image");
    const Image hi = patch_reduce(image, patch, Reducer::max);
    const Image lo = patch_reduce(image, patch, Reducer::min);
    ScalarMap t(image.width(), image.height());
    auto h = hi.data();
    auto l = lo.data();
    auto dst = t.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        double range = 0.0;
        for (int c = 0; c < 3; ++c) range = std::max(range, h[3 * i + c] - l[3 * i + c]);
        dst[i] = std::clamp(range, 0.0, 1.0);
    }
    return {std::move(t), PriorKind::contrast};
}

}  // namespace veil
