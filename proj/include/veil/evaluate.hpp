#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "veil/ambient.hpp"
#include "veil/image.hpp"
#include "veil/restore.hpp"

namespace veil {

// Mean over pixels and channels of (a - b)^2.
double mse(const Image& a, const Image& b);

struct MsePoint {
    double level;
    double mse;
};

struct MseCurve {
    std::vector<MsePoint> points;  // strictly increasing levels
};

// One frame of a degradation sequence. `level` orders the frames (tau for
// synthetic ladders, ordinal index for captured sequences).
struct Frame {
    Image image;
    double level = 0.0;
    std::optional<double> tau;
};

// Maps a degraded frame to the image that is scored against the reference.
using Restorer = std::function<Image(const Frame&)>;

// Scores every frame against the reference. A null restorer scores the raw
// frames (the "no restoration" baseline).
MseCurve mse_curve(std::span<const Frame> frames, const Image& reference, const Restorer& restorer);

// Scores frames after restore_pipeline with the given options.
MseCurve mse_curve(std::span<const Frame> frames, const Image& reference, const PipelineOptions& options);

// Frame list stored next to a degraded sequence.
struct SequenceManifest {
    struct Entry {
        std::string file;  // relative to the manifest's directory
        double level = 0.0;
        std::optional<double> tau;
    };
    std::optional<AmbientLight> ambient;  // known for synthetic sequences
    std::optional<std::string> source;    // clean reflectivity the frames were made from
    std::vector<Entry> frames;
};

SequenceManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const SequenceManifest& manifest, const std::filesystem::path& path);

// Loads the frames named by a manifest. Throws DimensionMismatch if frame sizes
// differ and InvalidArgument if levels are not strictly increasing.
std::vector<Frame> load_sequence(const SequenceManifest& manifest, const std::filesystem::path& dir);

// Priors as plotted for corpus statistics: DCP and UDCP are reported as
// 1 - value; composite is max of the rough veil-difference and contrast maps.
enum class StatPrior { dcp, udcp, veil_difference, contrast, composite };

std::string to_string(StatPrior kind);
StatPrior parse_stat_prior(const std::string& name);

struct PriorHistogram {
    std::vector<double> bins;  // averaged normalized frequencies
    StatPrior kind = StatPrior::composite;
    std::string corpus_label;
    std::size_t images_used = 0;
};

struct HistogramOptions {
    PatchSize patch{15};
    int bins = 256;
    int max_side = 1024;
    double sog_p = kDefaultShadesOfGrayP;
};

// Bin index for v in [0,1]: min(bins - 1, floor(v * bins)).
int histogram_bin(double v, int bins);

// The statistic map for one (already resized) image.
ScalarMap stat_prior_map(const Image& image, StatPrior kind, const HistogramOptions& options);

// Per-image normalized histogram of a [0,1] map.
std::vector<double> normalized_histogram(const ScalarMap& map, int bins);

// Resizes each image to options.max_side, computes its histogram and averages.
PriorHistogram prior_histogram(std::span<const Image> images, StatPrior kind,
                               const HistogramOptions& options, std::string label = {});

// Same over every decodable image in a directory (sorted by file name).
// Unreadable files are skipped with a warning; an empty result throws.
PriorHistogram prior_histogram_corpus(const std::filesystem::path& dir, StatPrior kind,
                                      const HistogramOptions& options);

// Every `step`-th bin, starting at bin 0.
std::vector<std::pair<int, double>> sample_bins(const PriorHistogram& hist, int step);

}  // namespace veil
