#include "veil/restore.hpp"

#include <algorithm>
#include <chrono>
#include <optional>

#include "veil/diagnostics.hpp"
#include "veil/parallel.hpp"
#include "veil/priors.hpp"

namespace veil {

void RestorationParams::validate() const {
    if (!(t0 > 0.0 && t0 < 1.0)) throw InvalidArgument("t0 must lie in (0,1)");
}

void PipelineOptions::validate() const {
    restoration.validate();
    if (refine == RefineMode::matting) matting.validate();
    if (refine == RefineMode::guided) {
        if (guided_radius < 1) throw InvalidArgument("guided radius must be >= 1");
        if (!(guided_eps > 0.0)) throw InvalidArgument("guided eps must be > 0");
    }
    if (const auto* sog = std::get_if<ShadesOfGray>(&ambient); sog && !(sog->p >= 1.0)) {
        throw InvalidArgument("shades-of-gray p must be >= 1");
    }
    if (const auto* bp = std::get_if<BrightestPixels>(&ambient);
        bp && !(bp->quantile > 0.0 && bp->quantile <= 1.0)) {
        throw InvalidArgument("brightest-pixel quantile must lie in (0,1]");
    }
}

double ContributionMap::contrast_fraction() const {
    if (labels.empty()) return 0.0;
    const auto n = std::count(labels.begin(), labels.end(), Contributor::contrast);
    return static_cast<double>(n) / static_cast<double>(labels.size());
}

ScalarMap fuse_max(const ScalarMap& t_v, const ScalarMap& t_c) {
    require_same_size(t_v, t_c, "fuse_max");
    ScalarMap out(t_v.width(), t_v.height());
    auto a = t_v.data();
    auto b = t_c.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::max(a[i], b[i]);
    return out;
}

ContributionMap contribution_map(const ScalarMap& t_v, const ScalarMap& t_c) {
    require_same_size(t_v, t_c, "contribution_map");
    ContributionMap out{t_v.width(), t_v.height(), std::vector<Contributor>(t_v.pixel_count())};
    auto a = t_v.data();
    auto b = t_c.data();
    for (std::size_t i = 0; i < out.labels.size(); ++i) {
        out.labels[i] = b[i] > a[i] ? Contributor::contrast : Contributor::veil_difference;
    }
    return out;
}

Image recover_reflectivity(const Image& image, const AmbientLight& ambient, const ScalarMap& t,
                           const RestorationParams& params) {
    params.validate();
    require_same_size(image, t, "recover_reflectivity");
    Image out(image.width(), image.height());
    auto src = image.data();
    auto tt = t.data();
    auto dst = out.data();
    parallel_for(tt.size(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            for (int c = 0; c < 3; ++c) {
                const double a = ambient[c];
                const double at = a * tt[i];
                double m = (src[3 * i + c] - a + at) / std::max(params.t0, at);
                if (params.clamp_output) m = std::clamp(m, 0.0, 1.0);
                dst[3 * i + c] = m;
            }
        }
    });
    return out;
}

AmbientLight estimate_ambient(const Image& image, const AmbientSource& source) {
    struct Visitor {
        const Image& img;
        AmbientLight operator()(const ShadesOfGray& s) const { return shades_of_gray(img, s.p); }
        AmbientLight operator()(const BrightestPixels& b) const {
            return brightest_pixel(img, b.quantile);
        }
        AmbientLight operator()(const AmbientLight& a) const { return a; }
    };
    return std::visit(Visitor{image}, source);
}

std::string to_string(RefineMode mode) {
    switch (mode) {
        case RefineMode::matting: return "matting";
        case RefineMode::guided: return "guided";
        case RefineMode::none: return "none";
    }
    return "unknown";
}

bool PipelineResult::converged() const {
    return std::all_of(refinement.begin(), refinement.end(),
                       [](const RefinementStats& s) { return s.report.converged; });
}

namespace {

class StageClock {
public:
    explicit StageClock(std::vector<StageTiming>& sink) : sink_(sink) {}
    void lap(std::string stage) {
        const auto now = std::chrono::steady_clock::now();
        sink_.push_back({std::move(stage), std::chrono::duration<double>(now - start_).count()});
        start_ = now;
    }

private:
    std::vector<StageTiming>& sink_;
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace

PipelineResult restore_pipeline(const Image& image, const PipelineOptions& options) {
    options.validate();
    if (image.empty()) throw InvalidArgument("restore_pipeline: empty image");
    PipelineResult res;
    StageClock clock(res.timings);
    const PatchSize patch = options.restoration.patch;

    res.ambient = estimate_ambient(image, options.ambient);
    res.vdp_denominator = veil_difference_denominator(res.ambient);
    clock.lap("ambient");

    res.t_v_rough = veil_difference_transmission(image, res.ambient, patch).map;
    res.t_c_rough = options.use_contrast_prior ? contrast_transmission(image, patch).map
                                               : ScalarMap(image.width(), image.height(), 0.0);
    clock.lap("priors");

    switch (options.refine) {
        case RefineMode::matting: {
            const MattingRefiner refiner(image, options.matting);
            clock.lap("laplacian");
            auto v = refiner.refine(res.t_v_rough);
            res.t_v = std::move(v.map);
            res.refinement.push_back({"veil_difference", v.report});
            if (options.use_contrast_prior) {
                auto c = refiner.refine(res.t_c_rough);
                res.t_c = std::move(c.map);
                res.refinement.push_back({"contrast", c.report});
            } else {
                res.t_c = res.t_c_rough;
            }
            for (const auto& s : res.refinement) {
                if (!s.report.converged) {
                    warn("matting refinement of " + s.prior + " did not converge (residual " +
                         std::to_string(s.report.relative_residual) + " after " +
                         std::to_string(s.report.iterations) + " iterations); using best iterate");
                }
            }
            break;
        }
        case RefineMode::guided:
            res.t_v = guided_filter_refine(image, res.t_v_rough, options.guided_radius, options.guided_eps);
            res.t_c = options.use_contrast_prior
                          ? guided_filter_refine(image, res.t_c_rough, options.guided_radius,
                                                 options.guided_eps)
                          : res.t_c_rough;
            break;
        case RefineMode::none:
            res.t_v = res.t_v_rough;
            res.t_c = res.t_c_rough;
            break;
    }
    clock.lap("refine");

    res.t_final = fuse_max(res.t_v, res.t_c);
    res.contribution = contribution_map(res.t_v, res.t_c);
    clock.lap("fuse");

    res.restored = recover_reflectivity(image, res.ambient, res.t_final, options.restoration);
    clock.lap("recover");
    return res;
}

}  // namespace veil
