#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "veil/evaluate.hpp"
#include "veil/image_io.hpp"
#include "veil/parallel.hpp"
#include "veil/priors.hpp"
#include "veil/restore.hpp"
#include "veil/simulate.hpp"
#include "veil/version.hpp"

namespace veil::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Bad flag values that CLI11 cannot check on its own.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string format_number(double v) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

std::vector<double> parse_numbers(const std::string& text, const std::string& flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        double v = 0.0;
        const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size()) {
            throw UsageError(flag + ": '" + cell + "' is not a number");
        }
        out.push_back(v);
    }
    if (out.empty()) throw UsageError(flag + ": expected a comma-separated list");
    return out;
}

AmbientLight parse_rgb(const std::string& text, const std::string& flag) {
    const auto v = parse_numbers(text, flag);
    if (v.size() != 3) throw UsageError(flag + ": expected r,g,b");
    for (double c : v) {
        if (!(c >= 0.0 && c <= 1.0)) throw UsageError(flag + ": channel values must lie in [0,1]");
    }
    return AmbientLight(v[0], v[1], v[2]);
}

AmbientSource parse_ambient(const std::string& text, double sog_p) {
    if (text == "auto") return ShadesOfGray{sog_p};
    if (text.starts_with("bright:")) {
        const auto q = parse_numbers(text.substr(7), "--ambient");
        if (q.size() != 1) throw UsageError("--ambient: expected bright:<quantile>");
        return BrightestPixels{q[0]};
    }
    return parse_rgb(text, "--ambient");
}

// Parameter checks done by the library: a failure there is a usage error, not a data error.
template <typename F>
auto checked_flags(F&& f) {
    try {
        return f();
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
}

json rgb_json(const AmbientLight& a) { return json::array({a[0], a[1], a[2]}); }

void write_json(const json& j, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("cannot write " + path.string());
}

void write_text(const std::string& text, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("cannot write " + path.string());
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

json refinement_json(const std::vector<RefinementStats>& stats) {
    json out = json::array();
    for (const auto& s : stats) {
        out.push_back({{"prior", s.prior},
                       {"iterations", s.report.iterations},
                       {"relative_residual", s.report.relative_residual},
                       {"converged", s.report.converged},
                       {"raw_min", s.report.raw_min},
                       {"raw_max", s.report.raw_max},
                       {"solve_size", {s.report.solve_width, s.report.solve_height}}});
    }
    return out;
}

json timings_json(const std::vector<StageTiming>& timings) {
    json out = json::array();
    for (const auto& t : timings) out.push_back({{"stage", t.stage}, {"seconds", t.seconds}});
    return out;
}

// Thread count and wall-clock times: the only report fields allowed to vary between runs.
json runtime_json(const std::vector<StageTiming>& timings) {
    return {{"threads", thread_count()}, {"timings", timings_json(timings)}};
}

// ---------------------------------------------------------------------------
// Pipeline flags shared by restore, transmission and eval

struct PipelineFlags {
    std::string ambient = "auto";
    double sog_p = kDefaultShadesOfGrayP;
    double t0 = 0.15;
    int patch = 15;
    std::string refine = "matting";
    bool refine_full = false;
    double matting_fidelity = 1e-4;
    double matting_eps = 1e-6;
    int matting_window = 3;
    int matting_downsample = 800;
    double matting_tol = 1e-5;
    int matting_max_iters = 2000;
    std::string matting_preconditioner = "multigrid";
    int guided_radius = 30;
    double guided_eps = 1e-3;
    bool no_clamp = false;
    bool no_contrast = false;

    void add_to(CLI::App& app, bool recovery, const std::string& default_refine) {
        refine = default_refine;
        app.add_option("--ambient", ambient, "auto | bright:<quantile> | r,g,b")->capture_default_str();
        app.add_option("--sog-p", sog_p, "Shades-of-gray exponent for --ambient auto")->capture_default_str();
        app.add_option("--patch", patch, "Odd patch side for the priors")->capture_default_str();
        app.add_option("--refine", refine, "Transmission refinement")
            ->check(CLI::IsMember({"matting", "guided", "none"}))
            ->capture_default_str();
        app.add_flag("--refine-full", refine_full, "Solve the matting system at full resolution");
        app.add_option("--matting-fidelity", matting_fidelity, "Data term weight")->capture_default_str();
        app.add_option("--matting-eps", matting_eps, "Laplacian covariance regularizer")->capture_default_str();
        app.add_option("--matting-window", matting_window, "Laplacian window side")->capture_default_str();
        app.add_option("--matting-downsample", matting_downsample, "Max side of the matting solve")
            ->capture_default_str();
        app.add_option("--matting-tol", matting_tol, "Relative residual target")->capture_default_str();
        app.add_option("--matting-max-iters", matting_max_iters, "CG iteration cap")->capture_default_str();
        app.add_option("--matting-preconditioner", matting_preconditioner, "CG preconditioner")
            ->check(CLI::IsMember({"multigrid", "jacobi"}))
            ->capture_default_str();
        app.add_option("--guided-radius", guided_radius, "Guided filter radius")->capture_default_str();
        app.add_option("--guided-eps", guided_eps, "Guided filter regularizer")->capture_default_str();
        if (recovery) {
            app.add_option("--t0", t0, "Minimum transmission")->capture_default_str();
            app.add_flag("--no-clamp", no_clamp, "Keep recovered values outside [0,1]");
            app.add_flag("--no-contrast-prior", no_contrast, "Use the veil-difference prior alone");
        }
    }

    PipelineOptions build() const {
        PipelineOptions o;
        o.ambient = parse_ambient(ambient, sog_p);
        o.restoration.t0 = t0;
        o.restoration.patch = PatchSize(patch);
        o.restoration.clamp_output = !no_clamp;
        o.refine = refine == "matting" ? RefineMode::matting
                 : refine == "guided"  ? RefineMode::guided
                                       : RefineMode::none;
        o.matting.window_side = matting_window;
        o.matting.epsilon = matting_eps;
        o.matting.fidelity = matting_fidelity;
        o.matting.solver_tol = matting_tol;
        o.matting.max_iters = matting_max_iters;
        o.matting.downsample = refine_full ? std::nullopt : std::optional<int>(matting_downsample);
        o.matting.preconditioner =
            matting_preconditioner == "jacobi" ? Preconditioner::jacobi : Preconditioner::multigrid;
        o.guided_radius = guided_radius;
        o.guided_eps = guided_eps;
        o.use_contrast_prior = !no_contrast;
        o.validate();
        return o;
    }

    json to_json(bool recovery) const {
        json j{{"ambient", ambient},
               {"sog_p", sog_p},
               {"patch", patch},
               {"refine", refine},
               {"matting",
                {{"window", matting_window},
                 {"epsilon", matting_eps},
                 {"fidelity", matting_fidelity},
                 {"tol", matting_tol},
                 {"max_iters", matting_max_iters},
                 {"downsample", refine_full ? json(nullptr) : json(matting_downsample)},
                 {"preconditioner", matting_preconditioner}}},
               {"guided", {{"radius", guided_radius}, {"eps", guided_eps}}}};
        if (recovery) {
            j["t0"] = t0;
            j["clamp_output"] = !no_clamp;
            j["contrast_prior"] = !no_contrast;
        }
        return j;
    }
};

// ---------------------------------------------------------------------------
// restore

struct RestoreCommand {
    std::string input;
    std::string output;
    std::string report;
    std::string intermediates;
    PipelineFlags pipeline;

    void add_to(CLI::App& app) {
        app.add_option("--input", input, "Degraded image")->required();
        app.add_option("--output", output, "Restored image (.png, .ppm, .tif, .bmp)")->required();
        app.add_option("--report", report, "JSON run report (default: <output stem>.report.json)");
        app.add_option("--emit-intermediates", intermediates, "Directory for transmission maps");
        pipeline.add_to(app, true, "matting");
    }

    int run() const {
        const PipelineOptions options = checked_flags([&] { return pipeline.build(); });
        const Image image = load_image(input);
        const PipelineResult res = restore_pipeline(image, options);
        save_image(res.restored, output);

        if (!intermediates.empty()) {
            const fs::path dir(intermediates);
            ensure_dir(dir);
            ScalarMap labels(res.contribution.width, res.contribution.height);
            for (std::size_t i = 0; i < res.contribution.labels.size(); ++i) {
                labels.data()[i] = res.contribution.labels[i] == Contributor::contrast ? 1.0 : 0.0;
            }
            const std::pair<const char*, const ScalarMap*> maps[] = {
                {"t_v", &res.t_v},           {"t_c", &res.t_c},
                {"t_final", &res.t_final},   {"contribution", &labels},
                {"t_v_rough", &res.t_v_rough}, {"t_c_rough", &res.t_c_rough}};
            for (const auto& [name, map] : maps) {
                save_scalar_map(*map, dir / (std::string(name) + ".png"));
                save_scalar_csv(*map, dir / (std::string(name) + ".csv"));
            }
        }

        json j{{"version", kVersion},
               {"command", "restore"},
               {"config",
                {{"input", input},
                 {"output", output},
                 {"emit_intermediates", intermediates.empty() ? json(nullptr) : json(intermediates)},
                 {"pipeline", pipeline.to_json(true)}}},
               {"ambient", rgb_json(res.ambient)},
               {"vdp_denominator", res.vdp_denominator},
               {"contrast_fraction", res.contribution.contrast_fraction()},
               {"refinement", refinement_json(res.refinement)},
               {"converged", res.converged()},
               {"runtime", runtime_json(res.timings)}};
        write_json(j, report.empty() ? fs::path(output).replace_extension(".report.json") : fs::path(report));
        return res.converged() ? kOk : kNotConverged;
    }
};

// ---------------------------------------------------------------------------
// transmission

struct TransmissionCommand {
    std::string input;
    std::string output;
    std::string csv;
    std::string prior = "composite";
    PipelineFlags pipeline;

    void add_to(CLI::App& app) {
        app.add_option("--input", input, "Input image")->required();
        app.add_option("--output", output, "Grayscale raster of the map")->required();
        app.add_option("--csv", csv, "CSV copy of the map (default: <output stem>.csv)");
        app.add_option("--prior", prior, "Prior to evaluate")
            ->check(CLI::IsMember({"vdp", "contrast", "dcp", "udcp", "composite"}))
            ->capture_default_str();
        pipeline.add_to(app, false, "none");
    }

    int run() const {
        const PipelineOptions options = checked_flags([&] { return pipeline.build(); });
        const Image image = load_image(input);
        const PatchSize patch = options.restoration.patch;
        std::vector<RefinementStats> stats;
        std::vector<StageTiming> timings;
        std::optional<AmbientLight> ambient;
        ScalarMap map;

        if (prior == "composite" || prior == "vdp" || prior == "contrast") {
            PipelineOptions o = options;
            o.use_contrast_prior = prior != "vdp";
            const PipelineResult res = restore_pipeline(image, o);
            ambient = res.ambient;
            stats = res.refinement;
            timings = res.timings;
            map = prior == "composite" ? res.t_final : prior == "vdp" ? res.t_v : res.t_c;
            if (prior == "contrast") {
                stats.erase(std::remove_if(stats.begin(), stats.end(),
                                           [](const RefinementStats& s) { return s.prior != "contrast"; }),
                            stats.end());
            }
        } else {
            // Reported as 1 - dark channel, the transmission the dark channel implies under white light.
            map = prior == "dcp" ? dark_channel(image, patch) : udcp(image, patch);
            for (double& v : map.data()) v = 1.0 - v;
            if (options.refine == RefineMode::matting) {
                Refinement r = MattingRefiner(image, options.matting).refine(map);
                map = std::move(r.map);
                stats.push_back({prior, r.report});
            } else if (options.refine == RefineMode::guided) {
                map = guided_filter_refine(image, map, options.guided_radius, options.guided_eps);
            }
        }

        save_scalar_map(map, output);
        save_scalar_csv(map, csv.empty() ? fs::path(output).replace_extension(".csv") : fs::path(csv));
        const bool converged = std::all_of(stats.begin(), stats.end(),
                                           [](const RefinementStats& s) { return s.report.converged; });
        json j{{"version", kVersion},
               {"command", "transmission"},
               {"config", {{"input", input}, {"output", output}, {"prior", prior}, {"pipeline", pipeline.to_json(false)}}},
               {"ambient", ambient ? rgb_json(*ambient) : json(nullptr)},
               {"refinement", refinement_json(stats)},
               {"converged", converged},
               {"runtime", runtime_json(timings)}};
        write_json(j, fs::path(output).replace_extension(".report.json"));
        return converged ? kOk : kNotConverged;
    }
};

// ---------------------------------------------------------------------------
// degrade

struct DegradeCommand {
    std::string input;
    std::string output_dir;
    std::string ambient;
    std::optional<double> tau;
    std::string tau_ramp;
    std::string ladder;
    std::string prefix = "frame";

    void add_to(CLI::App& app) {
        app.add_option("--input", input, "Clean reflectivity image")->required();
        app.add_option("--output-dir", output_dir, "Directory for frames and manifest.json")->required();
        app.add_option("--ambient", ambient, "Veiling light r,g,b in [0,1]")->required();
        auto* t = app.add_option("--tau", tau, "Uniform optical depth");
        auto* r = app.add_option("--tau-ramp", tau_ramp, "min,max,axis with axis h or v");
        auto* l = app.add_option("--ladder", ladder, "Comma-separated optical depths starting at 0");
        t->excludes(r)->excludes(l);
        r->excludes(l);
        app.add_option("--prefix", prefix, "Frame file name prefix")->capture_default_str();
    }

    int run() const {
        if (!tau && tau_ramp.empty() && ladder.empty()) {
            throw UsageError("degrade needs one of --tau, --tau-ramp or --ladder");
        }
        const AmbientLight a = parse_rgb(ambient, "--ambient");
        std::vector<double> taus;
        if (tau) {
            if (!(*tau >= 0.0)) throw UsageError("--tau must be >= 0");
            taus = {*tau};
        } else if (!ladder.empty()) {
            taus = parse_numbers(ladder, "--ladder");
            checked_flags([&] { validate_ladder(taus); });
        }
        const Image clean = load_image(input);
        std::optional<OpticalDepthField> ramp;
        if (!tau_ramp.empty()) {
            const auto comma = tau_ramp.rfind(',');
            if (comma == std::string::npos) throw UsageError("--tau-ramp: expected min,max,axis");
            const std::string axis = tau_ramp.substr(comma + 1);
            const auto range = parse_numbers(tau_ramp.substr(0, comma), "--tau-ramp");
            if (range.size() != 2) throw UsageError("--tau-ramp: expected min,max,axis");
            Axis ax;
            if (axis == "h" || axis == "horizontal" || axis == "x") {
                ax = Axis::horizontal;
            } else if (axis == "v" || axis == "vertical" || axis == "y") {
                ax = Axis::vertical;
            } else {
                throw UsageError("--tau-ramp: axis must be h or v");
            }
            ramp = checked_flags([&] { return depth_ramp(clean.width(), clean.height(), range[0], range[1], ax); });
        }

        const fs::path dir(output_dir);
        ensure_dir(dir);
        SequenceManifest manifest;
        manifest.ambient = a;
        manifest.source = input;
        auto name = [&](std::size_t k) {
            std::string idx = std::to_string(k);
            return prefix + "_" + std::string(idx.size() < 3 ? 3 - idx.size() : 0, '0') + idx + ".png";
        };
        if (ramp) {
            save_image(degrade(clean, {a, *ramp}), dir / name(0));
            const ScalarMap t = ramp->transmission();
            save_scalar_map(t, dir / "transmission.png");
            save_scalar_csv(t, dir / "transmission.csv");
            manifest.frames.push_back({name(0), 0.0, std::nullopt});
        } else {
            for (std::size_t k = 0; k < taus.size(); ++k) {
                save_image(degrade(clean, {a, taus[k]}), dir / name(k));
                manifest.frames.push_back({name(k), taus[k], taus[k]});
            }
        }
        save_manifest(manifest, dir / "manifest.json");
        return kOk;
    }
};

// ---------------------------------------------------------------------------
// stats

struct StatsCommand {
    std::string corpus;
    std::string output;
    std::string manifest;
    std::string prior = "composite";
    int patch = 15;
    int bins = 256;
    int max_side = 1024;
    double sog_p = kDefaultShadesOfGrayP;
    int sample_step = 5;

    void add_to(CLI::App& app) {
        app.add_option("--corpus", corpus, "Directory of images")->required();
        app.add_option("--output", output, "Histogram CSV (bin,frequency)")->required();
        app.add_option("--manifest", manifest, "Parameter manifest (default: <output stem>.json)");
        app.add_option("--prior", prior, "Prior to histogram")
            ->check(CLI::IsMember({"vdp", "contrast", "dcp", "udcp", "composite"}))
            ->capture_default_str();
        app.add_option("--patch", patch, "Odd patch side")->capture_default_str();
        app.add_option("--bins", bins, "Histogram bins")->check(CLI::PositiveNumber)->capture_default_str();
        app.add_option("--max-side", max_side, "Images are downsized to this longer side")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        app.add_option("--sog-p", sog_p, "Shades-of-gray exponent for the ambient light")->capture_default_str();
        app.add_option("--sample-step", sample_step, "Also write every n-th bin (0 disables)")
            ->check(CLI::NonNegativeNumber)
            ->capture_default_str();
    }

    int run() const {
        if (!(sog_p >= 1.0)) throw UsageError("--sog-p must be >= 1");
        HistogramOptions o;
        o.patch = checked_flags([&] { return PatchSize(patch); });
        o.bins = bins;
        o.max_side = max_side;
        o.sog_p = sog_p;
        const PriorHistogram h = prior_histogram_corpus(corpus, parse_stat_prior(prior), o);

        std::string text = "bin,frequency\n";
        for (std::size_t b = 0; b < h.bins.size(); ++b) text += std::to_string(b) + "," + format_number(h.bins[b]) + "\n";
        write_text(text, output);
        fs::path sampled_path;
        if (sample_step > 0) {
            sampled_path = fs::path(output).replace_extension("");
            sampled_path += "_every" + std::to_string(sample_step) + ".csv";
            std::string s = "bin,frequency\n";
            for (const auto& [b, f] : sample_bins(h, sample_step)) s += std::to_string(b) + "," + format_number(f) + "\n";
            write_text(s, sampled_path);
        }
        json j{{"version", kVersion},
               {"command", "stats"},
               {"config",
                {{"corpus", corpus},
                 {"prior", to_string(h.kind)},
                 {"patch", patch},
                 {"bins", bins},
                 {"max_side", max_side},
                 {"sog_p", sog_p},
                 {"sample_step", sample_step}}},
               {"corpus_label", h.corpus_label},
               {"images_used", h.images_used},
               {"outputs", {{"histogram", output}, {"sampled", sampled_path.empty() ? json(nullptr) : json(sampled_path.string())}}}};
        write_json(j, manifest.empty() ? fs::path(output).replace_extension(".json") : fs::path(manifest));
        return kOk;
    }
};

// ---------------------------------------------------------------------------
// eval

struct EvalCommand {
    std::string manifest;
    std::string output_dir;
    std::string reference;
    std::string methods = "none,fixed,estimated";
    std::string fixed_ambient;
    PipelineFlags pipeline;

    void add_to(CLI::App& app) {
        app.add_option("--manifest", manifest, "Sequence manifest written by degrade")->required();
        app.add_option("--output-dir", output_dir, "Directory for mse_<method>.csv and eval.json")->required();
        app.add_option("--reference", reference, "Reference image (default: the first frame)");
        app.add_option("--methods", methods, "Subset of none,fixed,estimated")->capture_default_str();
        app.add_option("--fixed-ambient", fixed_ambient, "r,g,b for the fixed method (default: from the manifest)");
        pipeline.add_to(app, true, "matting");
    }

    int run() const {
        std::vector<std::string> wanted;
        {
            std::stringstream ss(methods);
            std::string m;
            while (std::getline(ss, m, ',')) {
                if (m != "none" && m != "fixed" && m != "estimated") throw UsageError("--methods: unknown method '" + m + "'");
                wanted.push_back(m);
            }
            if (wanted.empty()) throw UsageError("--methods: nothing to evaluate");
        }
        const PipelineOptions estimated = checked_flags([&] { return pipeline.build(); });
        const SequenceManifest man = load_manifest(manifest);
        std::optional<AmbientLight> fixed;
        if (!fixed_ambient.empty()) fixed = parse_rgb(fixed_ambient, "--fixed-ambient");
        else fixed = man.ambient;
        if (std::find(wanted.begin(), wanted.end(), "fixed") != wanted.end() && !fixed) {
            throw UsageError("the fixed method needs --fixed-ambient or an ambient entry in the manifest");
        }
        const std::vector<Frame> frames = load_sequence(man, fs::path(manifest).parent_path());
        const Image ref = reference.empty() ? frames.front().image : load_image(reference);

        const fs::path dir(output_dir);
        ensure_dir(dir);
        json curves = json::object();
        bool converged = true;
        for (const std::string& m : wanted) {
            std::vector<RefinementStats> stats;
            MseCurve curve;
            if (m == "none") {
                curve = mse_curve(frames, ref, Restorer{});
            } else {
                PipelineOptions o = estimated;
                if (m == "fixed") o.ambient = *fixed;
                curve = mse_curve(frames, ref, [&](const Frame& f) {
                    PipelineResult r = restore_pipeline(f.image, o);
                    stats.insert(stats.end(), r.refinement.begin(), r.refinement.end());
                    return std::move(r.restored);
                });
            }
            std::string text = "level,mse\n";
            json points = json::array();
            for (const MsePoint& p : curve.points) {
                text += format_number(p.level) + "," + format_number(p.mse) + "\n";
                points.push_back({p.level, p.mse});
            }
            write_text(text, dir / ("mse_" + m + ".csv"));
            const bool ok = std::all_of(stats.begin(), stats.end(),
                                        [](const RefinementStats& s) { return s.report.converged; });
            converged = converged && ok;
            curves[m] = {{"points", points}, {"refinement", refinement_json(stats)}, {"converged", ok}};
        }
        json j{{"version", kVersion},
               {"command", "eval"},
               {"config",
                {{"manifest", manifest},
                 {"reference", reference.empty() ? json("first frame") : json(reference)},
                 {"methods", wanted},
                 {"fixed_ambient", fixed ? rgb_json(*fixed) : json(nullptr)},
                 {"pipeline", pipeline.to_json(true)}}},
               {"curves", curves},
               {"converged", converged},
               {"runtime", {{"threads", thread_count()}}}};
        write_json(j, dir / "eval.json");
        return converged ? kOk : kNotConverged;
    }
};

// ---------------------------------------------------------------------------
// --config expansion

const std::set<std::string> kGlobalKeys{"threads"};

std::string flag_name(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return "--" + key;
}

void append_flags(const json& obj, std::vector<std::string>& out) {
    for (const auto& [key, value] : obj.items()) {
        if (value.is_null()) continue;
        if (value.is_boolean()) {
            if (value.get<bool>()) out.push_back(flag_name(key));
            continue;
        }
        if (value.is_object()) throw UsageError("config: unexpected object under '" + key + "'");
        std::string text;
        auto scalar = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
        if (value.is_array()) {
            for (const auto& v : value) text += (text.empty() ? "" : ",") + scalar(v);
        } else {
            text = scalar(value);
        }
        out.push_back(flag_name(key));
        out.push_back(text);
    }
}

// Config values are spliced in ahead of the command line's own flags; every
// option keeps its last value, so explicit flags win over the file.
std::vector<std::string> expand_config(std::vector<std::string> args, const std::set<std::string>& commands) {
    std::optional<std::string> path;
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw UsageError("--config needs a path");
            path = args[i + 1];
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
            break;
        }
        if (args[i].starts_with("--config=")) {
            path = args[i].substr(9);
            args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
            break;
        }
    }
    if (!path) return args;

    std::ifstream in(*path);
    if (!in) throw UsageError("cannot read config " + *path);
    json cfg;
    try {
        in >> cfg;
    } catch (const json::exception& e) {
        throw UsageError("malformed config " + *path + ": " + e.what());
    }
    if (!cfg.is_object()) throw UsageError("config must be a JSON object");

    std::size_t sub = args.size();
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (commands.count(args[i])) {
            sub = i;
            break;
        }
    }
    const std::string active = sub < args.size() ? args[sub] : "";
    json global = json::object();
    json local = json::object();
    for (const auto& [key, value] : cfg.items()) {
        if (commands.count(key)) {
            if (!value.is_object()) throw UsageError("config: '" + key + "' must be an object");
            if (key == active) {
                for (const auto& [k, v] : value.items()) local[k] = v;
            }
        } else if (kGlobalKeys.count(key)) {
            global[key] = value;
        } else {
            local[key] = value;
        }
    }
    std::vector<std::string> global_flags, local_flags;
    append_flags(global, global_flags);
    append_flags(local, local_flags);
    if (sub < args.size()) {
        args.insert(args.begin() + static_cast<std::ptrdiff_t>(sub) + 1, local_flags.begin(), local_flags.end());
    } else {
        args.insert(args.end(), local_flags.begin(), local_flags.end());
    }
    args.insert(args.begin() + 1, global_flags.begin(), global_flags.end());
    return args;
}

}  // namespace

int run(const std::vector<std::string>& raw_args) {
    CLI::App app{"Restoration of images degraded by participating media", "veil"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.fallthrough();
    unsigned threads = 0;
    std::string config_path;
    app.add_option("--threads", threads, "Worker cap (0 = all cores); never changes results")->capture_default_str();
    app.add_option("--config", config_path, "JSON file with flag values; explicit flags take precedence");

    RestoreCommand restore;
    TransmissionCommand transmission;
    DegradeCommand degrade;
    StatsCommand stats;
    EvalCommand eval;
    auto* restore_app = app.add_subcommand("restore", "Restore a degraded image");
    auto* transmission_app = app.add_subcommand("transmission", "Write one prior's transmission map");
    auto* degrade_app = app.add_subcommand("degrade", "Simulate a participating medium");
    auto* stats_app = app.add_subcommand("stats", "Average prior histograms over a corpus");
    auto* eval_app = app.add_subcommand("eval", "MSE curves over a degraded sequence");
    restore.add_to(*restore_app);
    transmission.add_to(*transmission_app);
    degrade.add_to(*degrade_app);
    stats.add_to(*stats_app);
    eval.add_to(*eval_app);
    const std::set<std::string> commands{"restore", "transmission", "degrade", "stats", "eval"};

    auto usage = [&](const std::string& message) {
        std::cerr << "error: " << message << "\n\n";
        const auto subs = app.get_subcommands();
        std::cerr << (subs.empty() ? app.help() : subs.front()->help());
        return kUsage;
    };

    std::vector<std::string> args;
    try {
        args = expand_config(raw_args, commands);
    } catch (const UsageError& e) {
        return usage(e.what());
    }
    // CLI11 wants the arguments after the program name, last first.
    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        return usage(e.what());
    }

    set_thread_count(threads);
    try {
        if (restore_app->parsed()) return restore.run();
        if (transmission_app->parsed()) return transmission.run();
        if (degrade_app->parsed()) return degrade.run();
        if (stats_app->parsed()) return stats.run();
        if (eval_app->parsed()) return eval.run();
    } catch (const UsageError& e) {
        return usage(e.what());
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kDataError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kDataError;
    }
    return usage("no subcommand given");
}

}  // namespace veil::cli
