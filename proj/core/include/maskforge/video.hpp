#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "maskforge/image.hpp"
#include "maskforge/landmarks.hpp"
#include "maskforge/parsing.hpp"
#include "maskforge/synth.hpp"

namespace maskforge {

struct FrameInput {
    ImageRgb image;
    LandmarkSet landmarks;
    std::optional<LabelMap> parsing;
    double timestamp_ms = 0.0;
};

struct SmootherState {
    std::optional<LandmarkSet> ema;
    double beta = 0.0;  // 0 disables smoothing
};

/// EMA: out = beta * prev + (1 - beta) * lm; the first frame seeds the state.
/// Throws invalid_argument for beta outside [0,1) or a layout change.
LandmarkSet smooth_landmarks(SmootherState& state, const LandmarkSet& lm);

struct ApplyOptions {
    WarpOptions warp;
    /// Multiplies mask alpha before compositing; the product is clamped to 1.
    double alpha_scale = 1.0;
    /// Parsing labels where makeup may appear. Ignored when the frame has no parsing.
    LabelSet face_labels = celebamask_hq_labels().set_of(LabelConfig{}.face);
    bool gate = true;
};

struct ApplyResult {
    ImageRgb image;
    bool applied = false;
    std::string warning;
};

/// Warps a canonical-frame mask onto the frame through a TPS on the
/// landmarks, zeroes alpha outside the face labels and composites. Degenerate
/// landmarks return the frame untouched with a warning.
ApplyResult apply_to_frame(const RgbaMask& mask, const FrameInput& frame, const CanonicalLayout& canon,
                           const ApplyOptions& options = {});

/// The warped, gated and scaled mask in the frame's coordinates.
RgbaMask warp_mask_to_frame(const RgbaMask& mask, const FrameInput& frame, const CanonicalLayout& canon,
                            const ApplyOptions& options = {});

struct TimingReport {
    double fps = 0.0;
    double p50_ms = 0.0;
    double p95_ms = 0.0;
    std::size_t frames = 0;
    double processing_seconds = 0.0;  // excludes frame I/O
    std::size_t passthrough = 0;
    int workers = 1;
};

std::string timing_report_json(const TimingReport& report);

/// Nearest-rank percentile, p in [0, 100].
double percentile(std::vector<double> values, double p);

struct VideoConfig {
    ApplyOptions apply;
    double smoothing_beta = 0.0;
    int workers = 1;
};

using FrameSource = std::function<FrameInput(std::size_t index)>;
using FrameSink = std::function<void(std::size_t index, const ApplyResult& result)>;

/// Streams `count` frames through smoothing and application. The source and
/// sink run on the calling thread and the sink sees frames in order. Failed
/// frames pass through and are logged.
TimingReport run_video(const RgbaMask& mask, std::size_t count, const FrameSource& source, const FrameSink& sink,
                       const CanonicalLayout& canon, const VideoConfig& config = {});

struct VideoResult {
    std::vector<ImageRgb> frames;
    TimingReport timing;
};

VideoResult run_video(const RgbaMask& mask, std::span<const FrameInput> frames, const CanonicalLayout& canon,
                      const VideoConfig& config = {});

/// Frame directory: <stem>.png with <stem>.json landmarks and an optional
/// <stem>_parsing.png, processed in file-name order.
struct FrameFiles {
    std::filesystem::path image;
    std::filesystem::path landmarks;
    std::optional<std::filesystem::path> parsing;
};

std::vector<FrameFiles> list_frame_directory(const std::filesystem::path& dir);
FrameInput load_frame(const FrameFiles& files);

}  // namespace maskforge
