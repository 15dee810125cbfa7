#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "veil/ambient.hpp"
#include "veil/image.hpp"
#include "veil/refine.hpp"

namespace veil {

struct RestorationParams {
    double t0 = 0.15;  // minimum transmission, in (0,1)
    PatchSize patch{15};
    bool clamp_output = true;

    void validate() const;
};

enum class Contributor : std::uint8_t { veil_difference = 0, contrast = 1 };

// Which prior attained the fused maximum at each pixel. Ties go to veil_difference.
struct ContributionMap {
    int width = 0;
    int height = 0;
    std::vector<Contributor> labels;

    Contributor at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
    // Fraction of pixels won by the contrast prior.
    double contrast_fraction() const;
};

ScalarMap fuse_max(const ScalarMap& t_v, const ScalarMap& t_c);
ContributionMap contribution_map(const ScalarMap& t_v, const ScalarMap& t_c);

// M = (I - A + A t) / max(t0, A t) per channel; clamped to [0,1] when
// params.clamp_output is set.
Image recover_reflectivity(const Image& image, const AmbientLight& ambient, const ScalarMap& t,
                           const RestorationParams& params);

struct ShadesOfGray {
    double p = kDefaultShadesOfGrayP;
};
struct BrightestPixels {
    double quantile = 0.001;
};
using AmbientSource = std::variant<ShadesOfGray, BrightestPixels, AmbientLight>;

enum class RefineMode { matting, guided, none };

struct PipelineOptions {
    AmbientSource ambient = ShadesOfGray{};
    RestorationParams restoration;
    RefineMode refine = RefineMode::matting;
    MattingConfig matting;
    int guided_radius = 30;
    double guided_eps = 1e-3;
    bool use_contrast_prior = true;

    void validate() const;
};

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct RefinementStats {
    std::string prior;
    SolveReport report;
};

struct PipelineResult {
    Image restored;
    ScalarMap t_final;
    ScalarMap t_v;        // refined veil-difference transmission
    ScalarMap t_c;        // refined contrast transmission (zero when disabled)
    ScalarMap t_v_rough;
    ScalarMap t_c_rough;
    AmbientLight ambient;
    double vdp_denominator = 1.0;
    ContributionMap contribution;
    std::vector<RefinementStats> refinement;
    std::vector<StageTiming> timings;

    // False when any matting solve stopped at max_iters.
    bool converged() const;
};

AmbientLight estimate_ambient(const Image& image, const AmbientSource& source);

// Ambient estimation, both rough priors, per-prior refinement, max fusion and
// reflectivity recovery. All intermediates are returned.
PipelineResult restore_pipeline(const Image& image, const PipelineOptions& options);

std::string to_string(RefineMode mode);

}  // namespace veil
