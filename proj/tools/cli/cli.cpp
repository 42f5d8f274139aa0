#include "cli.hpp"

#include <chrono>
#include <fstream>
#include <optional>
#include <ostream>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "maskforge/losses.hpp"
#include "maskforge/mask_extract.hpp"
#include "maskforge/metrics.hpp"
#include "maskforge/png_io.hpp"
#include "maskforge/random.hpp"
#include "maskforge/synth.hpp"
#include "maskforge/synthetic_face.hpp"
#include "maskforge/video.hpp"
#include "tooling.hpp"

namespace maskforge::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Common {
    std::optional<fs::path> canon_path;
    int canon_side = tooling::kDefaultCanonSide;
    std::optional<fs::path> labels_path;
    std::optional<fs::path> lib_dir;
    bool json_out = false;
};

void add_common(CLI::App* cmd, Common& c, bool with_lib) {
    cmd->add_option("--canon", c.canon_path, "Canonical layout JSON")->check(CLI::ExistingFile);
    cmd->add_option("--canon-size", c.canon_side, "Working side of the canonical frame")
        ->check(CLI::Range(16, 4096))
        ->capture_default_str();
    cmd->add_option("--labels", c.labels_path, "Parsing label config JSON")->check(CLI::ExistingFile);
    if (with_lib) {
        cmd->add_option("--lib", c.lib_dir, "Style library directory")->check(CLI::ExistingDirectory);
    }
    cmd->add_flag("--json", c.json_out, "Print a machine-readable report on stdout");
}

struct ClusterFlags {
    int k = 6;
    int s = 2;
    std::uint64_t seed = 0;
    int max_iters = 100;
    double tol = 1e-4;
    bool chroma = false;
    bool joint = false;
    double roi_margin = 2.2;
};

void add_cluster_flags(CLI::App* cmd, ClusterFlags& f) {
    cmd->add_option("--k", f.k, "Number of colour clusters")->check(CLI::Range(2, 64))->capture_default_str();
    cmd->add_option("--s", f.s, "Clusters averaged into the skin tone")->check(CLI::Range(1, 64))->capture_default_str();
    cmd->add_option("--cluster-seed", f.seed, "k-means seed")->capture_default_str();
    cmd->add_option("--max-iters", f.max_iters, "k-means iteration cap")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--tol", f.tol, "k-means convergence tolerance (LAB units)")->check(CLI::NonNegativeNumber);
    cmd->add_flag("--chroma", f.chroma, "Compare only the a/b components");
    cmd->add_flag("--joint", f.joint, "Cluster both eyes together");
    cmd->add_option("--roi-margin", f.roi_margin, "Periocular rectangle scale")->check(CLI::PositiveNumber);
}

ExtractOptions extract_options(const ClusterFlags& f) {
    ExtractOptions o;
    o.clusters.k = f.k;
    o.clusters.s = f.s;
    o.clusters.seed = f.seed;
    o.clusters.max_iters = f.max_iters;
    o.clusters.tol = f.tol;
    o.components = f.chroma ? LabComponents::chroma : LabComponents::full;
    o.per_eye = !f.joint;
    o.roi_margin = f.roi_margin;
    o.clusters.validate();
    return o;
}

void prepare_output(const fs::path& path) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    prepare_output(path);
    std::ofstream out(path);
    out << text << '\n';
    if (!out) {
        throw Error(ErrorCode::io, "cannot write " + path.string());
    }
}

double ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

struct Invocation {
    std::ostream& out;
    Common common;
};

// extract ------------------------------------------------------------------

struct ExtractArgs {
    fs::path photo, landmarks, parsing, out;
    std::optional<fs::path> stats;
    ClusterFlags clusters;
};

int do_extract(Invocation& inv, const ExtractArgs& a) {
    const ExtractOptions options = extract_options(a.clusters);
    const CanonicalLayout canon = tooling::load_canon(inv.common.canon_path, inv.common.canon_side);
    const LabelConfig labels = tooling::load_labels(inv.common.labels_path);
    const ImageRgb photo = read_png_rgb(a.photo);
    const LandmarkSet lm = read_landmarks(a.landmarks);
    const LabelMap parsing = read_png_labels(a.parsing);
    const auto t0 = std::chrono::steady_clock::now();
    const EyeExtraction ex = extract_eye_mask(photo, lm, parsing, labels, options, canon);
    const json stats = tooling::extraction_stats(ex, ms_since(t0));
    prepare_output(a.out);
    write_png(a.out, ex.mask);
    if (a.stats) {
        write_text(*a.stats, stats.dump(2));
    }
    if (inv.common.json_out) {
        inv.out << stats.dump(2) << '\n';
    }
    return kOk;
}

// synth --------------------------------------------------------------------

struct SynthArgs {
    std::uint64_t seed = 0;
    std::string regions;
    fs::path out;
};

int do_synth(Invocation& inv, const SynthArgs& a) {
    const CanonicalLayout canon = tooling::load_canon(inv.common.canon_path, inv.common.canon_side);
    const StyleLibrary lib = tooling::load_library(inv.common.lib_dir, canon);
    const MakeupStyle style = sample_style(lib, a.seed, tooling::parse_regions(a.regions));
    const RgbaMask mask = render_style_mask(style, lib, canon);
    prepare_output(a.out);
    write_png(a.out, mask);
    if (inv.common.json_out) {
        inv.out << tooling::style_json(style).dump(2) << '\n';
    }
    return kOk;
}

// pair ---------------------------------------------------------------------

struct PairArgs {
    fs::path faces;
    fs::path out;
    int styles_per_face = 3;
    std::uint64_t seed = 0;
    int workers = 1;
    int grid_step = 4;
    std::string regions;
};

int do_pair(Invocation& inv, const PairArgs& a) {
    const CanonicalLayout canon = tooling::load_canon(inv.common.canon_path, inv.common.canon_side);
    const StyleLibrary lib = tooling::load_library(inv.common.lib_dir, canon);
    const auto faces = read_faces_manifest(a.faces);
    DatasetOptions options;
    options.styles_per_face = a.styles_per_face;
    options.seed = a.seed;
    options.workers = a.workers;
    options.warp.grid_step = a.grid_step;
    options.regions = tooling::parse_regions(a.regions);
    const DatasetResult result = generate_dataset(faces, lib, canon, a.out, options);
    const json summary{{"pairs", result.records.size()},
                       {"faces", faces.size()},
                       {"skipped_faces", result.failed_faces},
                       {"manifest", (a.out / "manifest.jsonl").string()}};
    if (inv.common.json_out) {
        inv.out << summary.dump(2) << '\n';
    }
    return kOk;
}

// apply --------------------------------------------------------------------

struct ApplyArgs {
    fs::path mask, image, landmarks, out;
    std::optional<fs::path> parsing;
    double alpha_scale = 1.0;
    bool no_gate = false;
    int grid_step = 4;
};

ApplyOptions apply_options(double alpha_scale, bool no_gate, int grid_step, const LabelConfig& labels) {
    ApplyOptions o;
    o.alpha_scale = alpha_scale;
    o.gate = !no_gate;
    o.warp.grid_step = grid_step;
    o.face_labels = labels.set_of(labels.face);
    return o;
}

int do_apply(Invocation& inv, const ApplyArgs& a) {
    const LabelConfig labels = tooling::load_labels(inv.common.labels_path);
    const RgbaMask mask = read_png_rgba(a.mask);
    const CanonicalLayout canon =
        tooling::canon_for_mask(tooling::load_canon(inv.common.canon_path, inv.common.canon_side), mask.size());
    FrameInput frame;
    frame.image = read_png_rgb(a.image);
    frame.landmarks = read_landmarks(a.landmarks);
    if (a.parsing) {
        frame.parsing = read_png_labels(*a.parsing);
    }
    const ApplyResult r = apply_to_frame(mask, frame, canon, apply_options(a.alpha_scale, a.no_gate, a.grid_step, labels));
    if (!r.warning.empty()) {
        spdlog::warn("{}", r.warning);
    }
    prepare_output(a.out);
    write_png(a.out, r.image);
    if (inv.common.json_out) {
        inv.out << json{{"applied", r.applied}, {"warning", r.warning}}.dump(2) << '\n';
    }
    return kOk;
}

// video --------------------------------------------------------------------

struct VideoArgs {
    fs::path mask, frames, out;
    std::optional<fs::path> timing;
    double beta = 0.0;
    int workers = 1;
    double alpha_scale = 1.0;
    bool no_gate = false;
    int grid_step = 4;
};

int do_video(Invocation& inv, const VideoArgs& a) {
    const LabelConfig labels = tooling::load_labels(inv.common.labels_path);
    const RgbaMask mask = read_png_rgba(a.mask);
    const CanonicalLayout canon =
        tooling::canon_for_mask(tooling::load_canon(inv.common.canon_path, inv.common.canon_side), mask.size());
    const auto files = list_frame_directory(a.frames);
    fs::create_directories(a.out);
    VideoConfig config;
    config.apply = apply_options(a.alpha_scale, a.no_gate, a.grid_step, labels);
    config.smoothing_beta = a.beta;
    config.workers = a.workers;
    const TimingReport report = run_video(
        mask, files.size(), [&](std::size_t i) { return load_frame(files[i]); },
        [&](std::size_t i, const ApplyResult& r) { write_png(a.out / files[i].image.filename(), r.image); }, canon,
        config);
    const std::string text = timing_report_json(report);
    write_text(a.timing.value_or(a.out / "timing.json"), text);
    if (inv.common.json_out) {
        inv.out << text << '\n';
    }
    return kOk;
}

// eval ---------------------------------------------------------------------

struct EvalArgs {
    std::optional<fs::path> faces;
    int synthetic = 20;
    std::uint64_t face_seed = 0;
    std::size_t pairs = 200;
    std::uint64_t seed = 0;
    std::string mode = "kmeans";
    std::string regions = "eyes";
    std::optional<fs::path> out;
    std::optional<fs::path> csv;
    int workers = 1;
    int face_size = 256;
    ClusterFlags clusters;
};

int do_eval(Invocation& inv, const EvalArgs& a) {
    const CanonicalLayout canon = tooling::load_canon(inv.common.canon_path, inv.common.canon_side);
    const StyleLibrary lib = tooling::load_library(inv.common.lib_dir, canon);
    std::vector<EvalFace> faces;
    if (a.faces) {
        faces = load_eval_faces(read_faces_manifest(*a.faces));
    } else {
        SyntheticFaceOptions fo;
        fo.size = {a.face_size, a.face_size};
        for (int i = 0; i < a.synthetic; ++i) {
            SyntheticFace f = make_synthetic_face(canon, mix_seed(a.face_seed, static_cast<std::uint64_t>(i)), fo);
            faces.push_back({"synthetic_" + std::to_string(i), std::move(f.image), std::move(f.landmarks),
                             std::move(f.parsing)});
        }
    }
    EvalOptions options;
    options.pairs = a.pairs;
    options.seed = a.seed;
    options.mode = a.mode == "oracle" ? TransferMode::oracle : TransferMode::kmeans;
    options.regions = tooling::parse_regions(a.regions);
    options.extract = extract_options(a.clusters);
    options.labels = tooling::load_labels(inv.common.labels_path);
    options.workers = a.workers;
    const EvalReport report = synthetic_transfer_eval(faces, lib, canon, options);
    const std::string text = eval_report_json(report);
    if (a.out) {
        write_text(*a.out, text);
    }
    if (a.csv) {
        prepare_output(*a.csv);
        std::ofstream(*a.csv) << eval_pairs_csv(report);
    }
    if (inv.common.json_out || !a.out) {
        inv.out << text << '\n';
    }
    return kOk;
}

// losses-check -------------------------------------------------------------

struct LossArgs {
    int seeds = 20;
    std::uint64_t first_seed = 0;
    double step = 1e-3;
    double tolerance = 1e-4;
    std::optional<fs::path> out;
};

int do_losses(Invocation& inv, const LossArgs& a) {
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < a.seeds; ++i) {
        seeds.push_back(a.first_seed + static_cast<std::uint64_t>(i));
    }
    const LossCheckReport report = run_gradient_checks(seeds, a.step);
    spdlog::info("gradient checks over {} seeds took {:.3f} s", seeds.size(), report.seconds);
    const std::string text = loss_report_json(report);
    if (a.out) {
        write_text(*a.out, text);
    }
    if (inv.common.json_out) {
        inv.out << text << '\n';
    } else {
        for (const auto& [name, err] : report.max_rel_error) {
            inv.out << name << " max_rel_error=" << err << '\n';
        }
    }
    if (!report.passed(a.tolerance)) {
        spdlog::error("gradient check exceeded tolerance {}", a.tolerance);
        return kInternal;
    }
    return kOk;
}

// faces --------------------------------------------------------------------

struct FacesArgs {
    int count = 20;
    std::uint64_t seed = 0;
    int size = 256;
    double noise = 0.0;
    fs::path out;
};

int do_faces(Invocation& inv, const FacesArgs& a) {
    const CanonicalLayout canon = tooling::load_canon(inv.common.canon_path, inv.common.canon_side);
    fs::create_directories(a.out);
    SyntheticFaceOptions fo;
    fo.size = {a.size, a.size};
    fo.noise = a.noise;
    std::vector<FaceEntry> entries;
    for (int i = 0; i < a.count; ++i) {
        const SyntheticFace f = make_synthetic_face(canon, mix_seed(a.seed, static_cast<std::uint64_t>(i)), fo);
        char stem[32];
        std::snprintf(stem, sizeof stem, "face_%04d", i);
        const std::string s = stem;
        write_png(a.out / (s + ".png"), f.image);
        write_landmarks(a.out / (s + ".json"), f.landmarks);
        write_png(a.out / (s + "_parsing.png"), f.parsing);
        entries.push_back({s + ".png", s + ".json", s + "_parsing.png"});
    }
    write_faces_manifest(a.out / "faces.jsonl", entries);
    if (inv.common.json_out) {
        inv.out << json{{"faces", a.count}, {"manifest", (a.out / "faces.jsonl").string()}}.dump(2) << '\n';
    }
    return kOk;
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
    tooling::configure_logging();
    CLI::App app{"maskforge: transparent makeup mask extraction, synthesis and application", "maskforge"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "maskforge 0.3.0");

    Invocation inv{out, {}};
    int status = kOk;
    std::function<int()> action;

    ExtractArgs ea;
    auto* extract = app.add_subcommand("extract", "Recover an eye makeup mask from a photo");
    extract->add_option("--photo", ea.photo, "Makeup photo (PNG)")->required()->check(CLI::ExistingFile);
    extract->add_option("--landmarks", ea.landmarks, "Landmark JSON")->required()->check(CLI::ExistingFile);
    extract->add_option("--parsing", ea.parsing, "Parsing label PNG")->required()->check(CLI::ExistingFile);
    extract->add_option("--out", ea.out, "Output RGBA mask PNG (canonical frame)")->required();
    extract->add_option("--stats", ea.stats, "Write extraction statistics JSON");
    add_cluster_flags(extract, ea.clusters);
    add_common(extract, inv.common, false);
    extract->callback([&] { action = [&] { return do_extract(inv, ea); }; });

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "Render a sampled style to a canonical mask");
    synth->add_option("--seed", sa.seed, "Style seed")->capture_default_str();
    synth->add_option("--regions", sa.regions, "Comma separated regions (default all)");
    synth->add_option("--out", sa.out, "Output RGBA mask PNG")->required();
    add_common(synth, inv.common, true);
    synth->callback([&] { action = [&] { return do_synth(inv, sa); }; });

    PairArgs pa;
    auto* pair = app.add_subcommand("pair", "Generate (after, mask) training pairs");
    pair->add_option("--faces", pa.faces, "Faces manifest (JSON lines)")->required()->check(CLI::ExistingFile);
    pair->add_option("--out", pa.out, "Output directory")->required();
    pair->add_option("--styles-per-face", pa.styles_per_face, "Styles sampled per face")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    pair->add_option("--seed", pa.seed, "Dataset seed")->capture_default_str();
    pair->add_option("--workers", pa.workers, "Worker threads")->check(CLI::Range(1, 256))->capture_default_str();
    pair->add_option("--grid-step", pa.grid_step, "Warp lattice spacing in pixels")->check(CLI::Range(1, 64));
    pair->add_option("--regions", pa.regions, "Comma separated regions (default all)");
    add_common(pair, inv.common, true);
    pair->callback([&] { action = [&] { return do_pair(inv, pa); }; });

    ApplyArgs aa;
    auto* apply = app.add_subcommand("apply", "Apply a canonical mask to one image");
    apply->add_option("--mask", aa.mask, "RGBA mask PNG (canonical frame)")->required()->check(CLI::ExistingFile);
    apply->add_option("--image", aa.image, "Target image PNG")->required()->check(CLI::ExistingFile);
    apply->add_option("--landmarks", aa.landmarks, "Target landmark JSON")->required()->check(CLI::ExistingFile);
    apply->add_option("--parsing", aa.parsing, "Target parsing PNG")->check(CLI::ExistingFile);
    apply->add_option("--out", aa.out, "Output PNG")->required();
    apply->add_option("--alpha-scale", aa.alpha_scale, "Mask alpha multiplier")->check(CLI::Range(0.0, 2.0));
    apply->add_flag("--no-gate", aa.no_gate, "Ignore the parsing map");
    apply->add_option("--grid-step", aa.grid_step, "Warp lattice spacing in pixels")->check(CLI::Range(1, 64));
    add_common(apply, inv.common, false);
    apply->callback([&] { action = [&] { return do_apply(inv, aa); }; });

    VideoArgs va;
    auto* video = app.add_subcommand("video", "Apply a mask to a directory of frames");
    video->add_option("--mask", va.mask, "RGBA mask PNG (canonical frame)")->required()->check(CLI::ExistingFile);
    video->add_option("--frames", va.frames, "Frame directory")->required()->check(CLI::ExistingDirectory);
    video->add_option("--out", va.out, "Output directory")->required();
    video->add_option("--timing", va.timing, "Timing report path (default <out>/timing.json)");
    video->add_option("--beta", va.beta, "Landmark EMA factor in [0,1)")->check(CLI::Range(0.0, 0.999999));
    video->add_option("--workers", va.workers, "Worker threads")->check(CLI::Range(1, 256));
    video->add_option("--alpha-scale", va.alpha_scale, "Mask alpha multiplier")->check(CLI::Range(0.0, 2.0));
    video->add_flag("--no-gate", va.no_gate, "Ignore parsing maps");
    video->add_option("--grid-step", va.grid_step, "Warp lattice spacing in pixels")->check(CLI::Range(1, 64));
    add_common(video, inv.common, false);
    video->callback([&] { action = [&] { return do_video(inv, va); }; });

    EvalArgs ev;
    auto* eval = app.add_subcommand("eval", "Paired synthetic transfer evaluation");
    eval->add_option("--faces", ev.faces, "Faces manifest with parsing maps")->check(CLI::ExistingFile);
    eval->add_option("--synthetic", ev.synthetic, "Synthetic faces when no manifest is given")
        ->check(CLI::Range(2, 100000))
        ->capture_default_str();
    eval->add_option("--face-seed", ev.face_seed, "Seed of the synthetic faces");
    eval->add_option("--face-size", ev.face_size, "Synthetic face side")->check(CLI::Range(64, 4096));
    eval->add_option("--pairs", ev.pairs, "Pairs to evaluate")->check(CLI::PositiveNumber)->capture_default_str();
    eval->add_option("--seed", ev.seed, "Protocol seed")->capture_default_str();
    eval->add_option("--mode", ev.mode, "kmeans or oracle")
        ->check(CLI::IsMember({"kmeans", "oracle"}))
        ->capture_default_str();
    eval->add_option("--regions", ev.regions, "Style regions")->capture_default_str();
    eval->add_option("--out", ev.out, "Report JSON path");
    eval->add_option("--csv", ev.csv, "Per-pair CSV path");
    eval->add_option("--workers", ev.workers, "Worker threads")->check(CLI::Range(1, 256));
    add_cluster_flags(eval, ev.clusters);
    add_common(eval, inv.common, true);
    eval->callback([&] { action = [&] { return do_eval(inv, ev); }; });

    LossArgs la;
    auto* losses = app.add_subcommand("losses-check", "Finite-difference check of every loss gradient");
    losses->add_option("--seeds", la.seeds, "Number of random inputs")->check(CLI::Range(1, 100000))->capture_default_str();
    losses->add_option("--first-seed", la.first_seed, "First input seed");
    losses->add_option("--step", la.step, "Central difference step")->check(CLI::PositiveNumber)->capture_default_str();
    losses->add_option("--tolerance", la.tolerance, "Maximum relative error")->check(CLI::PositiveNumber);
    losses->add_option("--out", la.out, "Loss vectors JSON path");
    losses->add_flag("--json", inv.common.json_out, "Print the loss vectors JSON");
    losses->callback([&] { action = [&] { return do_losses(inv, la); }; });

    FacesArgs fa;
    auto* faces = app.add_subcommand("faces", "Write synthetic no-makeup faces with landmarks and parsing");
    faces->add_option("--count", fa.count, "Number of faces")->check(CLI::Range(1, 100000))->capture_default_str();
    faces->add_option("--seed", fa.seed, "Seed")->capture_default_str();
    faces->add_option("--size", fa.size, "Image side")->check(CLI::Range(64, 4096))->capture_default_str();
    faces->add_option("--noise", fa.noise, "Uniform pixel noise amplitude")->check(CLI::Range(0.0, 0.5));
    faces->add_option("--out", fa.out, "Output directory")->required();
    faces->add_option("--canon", inv.common.canon_path, "Canonical layout JSON")->check(CLI::ExistingFile);
    faces->add_flag("--json", inv.common.json_out, "Print a summary");
    faces->callback([&] { action = [&] { return do_faces(inv, fa); }; });

    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::CallForVersion&) {
        out << app.version() << '\n';
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        err << sub->help();
        return kUsage;
    }

    try {
        status = action ? action() : kUsage;
    } catch (const Error& e) {
        err << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
        status = kDataError;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error (io): " << e.what() << '\n';
        status = kDataError;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        status = kInternal;
    }
    return status;
}

}  // namespace maskforge::cli
