#include "veil/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "veil/diagnostics.hpp"
#include "veil/image_io.hpp"
#include "veil/parallel.hpp"
#include "veil/priors.hpp"

namespace veil {

using nlohmann::json;

double mse(const Image& a, const Image& b) {
    require_same_size(a, b, "mse");
    if (a.empty()) throw InvalidArgument("mse: empty image");
    const auto x = a.data();
    const auto y = b.data();
    const double sum = deterministic_sum(x.size(), [&](std::size_t i) {
        const double d = x[i] - y[i];
        return d * d;
    });
    return sum / static_cast<double>(x.size());
}

MseCurve mse_curve(std::span<const Frame> frames, const Image& reference, const Restorer& restorer) {
    MseCurve curve;
    for (std::size_t k = 0; k < frames.size(); ++k) {
        const Frame& f = frames[k];
        if (!f.image.same_size(reference)) {
            throw DimensionMismatch("mse_curve: frame " + std::to_string(k) + " differs from reference");
        }
        if (k > 0 && !(f.level > frames[k - 1].level)) {
            throw InvalidArgument("mse_curve: frame levels must be strictly increasing");
        }
        const double e = restorer ? mse(restorer(f), reference) : mse(f.image, reference);
        curve.points.push_back({f.level, e});
    }
    return curve;
}

MseCurve mse_curve(std::span<const Frame> frames, const Image& reference,
                   const PipelineOptions& options) {
    return mse_curve(frames, reference,
                     [&](const Frame& f) { return restore_pipeline(f.image, options).restored; });
}

// ---------------------------------------------------------------------------
// Manifests

SequenceManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read manifest " + path.string());
    json j;
    try {
        in >> j;
        SequenceManifest m;
        if (j.contains("ambient") && !j["ambient"].is_null()) {
            const auto a = j["ambient"].get<std::vector<double>>();
            if (a.size() != 3) throw InvalidArgument("manifest ambient must have 3 entries");
            m.ambient = AmbientLight(a[0], a[1], a[2]);
        }
        if (j.contains("source") && j["source"].is_string()) m.source = j["source"].get<std::string>();
        for (const auto& f : j.at("frames")) {
            SequenceManifest::Entry e;
            e.file = f.at("file").get<std::string>();
            e.level = f.at("level").get<double>();
            if (f.contains("tau") && !f["tau"].is_null()) e.tau = f["tau"].get<double>();
            m.frames.push_back(std::move(e));
        }
        if (m.frames.empty()) throw InvalidArgument("manifest lists no frames");
        return m;
    } catch (const json::exception& e) {
        throw IoError("malformed manifest " + path.string() + ": " + e.what());
    }
}

void save_manifest(const SequenceManifest& manifest, const std::filesystem::path& path) {
    json j;
    j["ambient"] = manifest.ambient ? json(manifest.ambient->rgb()) : json(nullptr);
    j["source"] = manifest.source ? json(*manifest.source) : json(nullptr);
    j["frames"] = json::array();
    for (const auto& f : manifest.frames) {
        j["frames"].push_back({{"file", f.file},
                               {"level", f.level},
                               {"tau", f.tau ? json(*f.tau) : json(nullptr)}});
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest " + path.string());
    out << j.dump(2) << '\n';
}

std::vector<Frame> load_sequence(const SequenceManifest& manifest, const std::filesystem::path& dir) {
    std::vector<Frame> frames;
    for (const auto& e : manifest.frames) {
        Frame f{load_image(dir / e.file), e.level, e.tau};
        if (!frames.empty()) {
            require_same_size(frames.front().image, f.image, "load_sequence");
            if (!(f.level > frames.back().level)) {
                throw InvalidArgument("manifest levels must be strictly increasing");
            }
        }
        frames.push_back(std::move(f));
    }
    return frames;
}

// ---------------------------------------------------------------------------
// Prior histograms

std::string to_string(StatPrior kind) {
    switch (kind) {
        case StatPrior::dcp: return "dcp";
        case StatPrior::udcp: return "udcp";
        case StatPrior::veil_difference: return "vdp";
        case StatPrior::contrast: return "contrast";
        case StatPrior::composite: return "composite";
    }
    return "unknown";
}

StatPrior parse_stat_prior(const std::string& name) {
    if (name == "dcp") return StatPrior::dcp;
    if (name == "udcp") return StatPrior::udcp;
    if (name == "vdp" || name == "veil_difference") return StatPrior::veil_difference;
    if (name == "contrast" || name == "cp") return StatPrior::contrast;
    if (name == "composite") return StatPrior::composite;
    throw InvalidArgument("unknown prior '" + name + "'");
}

int histogram_bin(double v, int bins) {
    const double scaled = std::floor(std::clamp(v, 0.0, 1.0) * bins);
    return std::min(bins - 1, static_cast<int>(scaled));
}

ScalarMap stat_prior_map(const Image& image, StatPrior kind, const HistogramOptions& options) {
    auto one_minus = [](ScalarMap m) {
        for (double& v : m.data()) v = 1.0 - v;
        return m;
    };
    switch (kind) {
        case StatPrior::dcp: return one_minus(dark_channel(image, options.patch));
        case StatPrior::udcp: return one_minus(udcp(image, options.patch));
        case StatPrior::veil_difference:
            return veil_difference_transmission(image, shades_of_gray(image, options.sog_p), options.patch).map;
        case StatPrior::contrast: return contrast_transmission(image, options.patch).map;
        case StatPrior::composite:
            return fuse_max(
                veil_difference_transmission(image, shades_of_gray(image, options.sog_p), options.patch).map,
                contrast_transmission(image, options.patch).map);
    }
    throw InvalidArgument("unknown prior");
}

std::vector<double> normalized_histogram(const ScalarMap& map, int bins) {
    if (bins < 1) throw InvalidArgument("histogram needs at least one bin");
    std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
    for (double v : map.data()) h[histogram_bin(v, bins)] += 1.0;
    const double n = static_cast<double>(map.pixel_count());
    for (double& v : h) v /= n;
    return h;
}

namespace {

PriorHistogram average(const std::vector<std::optional<std::vector<double>>>& per_image,
                       StatPrior kind, int bins, std::string label) {
    PriorHistogram out;
    out.kind = kind;
    out.corpus_label = std::move(label);
    out.bins.assign(static_cast<std::size_t>(bins), 0.0);
    for (const auto& h : per_image) {
        if (!h) continue;
        for (int b = 0; b < bins; ++b) out.bins[b] += (*h)[b];
        ++out.images_used;
    }
    if (out.images_used == 0) throw InvalidArgument("prior histogram: no usable images in corpus");
    for (double& v : out.bins) v /= static_cast<double>(out.images_used);
    return out;
}

}  // namespace

PriorHistogram prior_histogram(std::span<const Image> images, StatPrior kind,
                               const HistogramOptions& options, std::string label) {
    std::vector<std::optional<std::vector<double>>> per_image(images.size());
    for (std::size_t k = 0; k < images.size(); ++k) {
        const Image resized = resize_max_side(images[k], options.max_side);
        per_image[k] = normalized_histogram(stat_prior_map(resized, kind, options), options.bins);
    }
    return average(per_image, kind, options.bins, std::move(label));
}

PriorHistogram prior_histogram_corpus(const std::filesystem::path& dir, StatPrior kind,
                                      const HistogramOptions& options) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) throw IoError("not a directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && is_image_path(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<std::optional<std::vector<double>>> per_image(files.size());
    for (std::size_t k = 0; k < files.size(); ++k) {
        try {
            const Image img = resize_max_side(load_image(files[k]), options.max_side);
            per_image[k] = normalized_histogram(stat_prior_map(img, kind, options), options.bins);
        } catch (const IoError& e) {
            warn(std::string("skipping ") + e.what());
        }
    }
    return average(per_image, kind, options.bins, dir.filename().string());
}

std::vector<std::pair<int, double>> sample_bins(const PriorHistogram& hist, int step) {
    if (step < 1) throw InvalidArgument("sample step must be >= 1");
    std::vector<std::pair<int, double>> out;
    for (int b = 0; b < static_cast<int>(hist.bins.size()); b += step) out.emplace_back(b, hist.bins[b]);
    return out;
}

}  // namespace veil
