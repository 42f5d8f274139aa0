#include "maskforge/video.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "maskforge/color.hpp"
#include "maskforge/geometry.hpp"
#include "maskforge/png_io.hpp"

namespace maskforge {

namespace fs = std::filesystem;

LandmarkSet smooth_landmarks(SmootherState& state, const LandmarkSet& lm) {
    if (!(state.beta >= 0.0 && state.beta < 1.0)) {
        throw Error(ErrorCode::invalid_argument, "smoothing beta must lie in [0, 1)");
    }
    if (state.ema && (state.ema->layout_id() != lm.layout_id() || state.ema->size() != lm.size())) {
        throw Error(ErrorCode::invalid_argument, "landmark layout changed mid-stream");
    }
    if (!state.ema || state.beta == 0.0) {
        state.ema = lm;
        return lm;
    }
    const double b = state.beta;
    std::vector<Point> pts(lm.size());
    for (std::size_t i = 0; i < lm.size(); ++i) {
        pts[i] = lm[i] + b * ((*state.ema)[i] - lm[i]);
    }
    state.ema = LandmarkSet(lm.layout_id(), std::move(pts));
    return *state.ema;
}

RgbaMask warp_mask_to_frame(const RgbaMask& mask, const FrameInput& frame, const CanonicalLayout& canon,
                            const ApplyOptions& options) {
    if (mask.size() != canon.size()) {
        throw Error(ErrorCode::dimension_mismatch, "mask " + to_string(mask.size()) +
                                                       " does not match canonical frame " + to_string(canon.size()));
    }
    if (!(options.alpha_scale >= 0.0 && options.alpha_scale <= 2.0)) {
        throw Error(ErrorCode::invalid_argument, "alpha_scale must lie in [0, 2]");
    }
    if (frame.landmarks.size() != canon.reference().size()) {
        throw Error(ErrorCode::invalid_argument, "frame landmarks do not follow the canonical layout");
    }
    if (frame.parsing) {
        require_same_size(*frame.parsing, frame.image, "frame parsing");
    }
    const TpsWarp inverse = tps_fit(frame.landmarks.points(), canon.reference().points(), options.warp.regularization);
    RgbaMask warped = tps_pull_back(mask, inverse, frame.image.size(), options.warp.grid_step);
    const bool gate = options.gate && frame.parsing.has_value();
    if (gate || options.alpha_scale != 1.0) {
        for (std::size_t i = 0; i < warped.pixel_count(); ++i) {
            Rgba& p = warped[i];
            if (gate && !options.face_labels[(*frame.parsing)[i]]) {
                p.a = 0.0;
            } else {
                p.a = std::min(1.0, p.a * options.alpha_scale);
            }
        }
    }
    return warped;
}

ApplyResult apply_to_frame(const RgbaMask& mask, const FrameInput& frame, const CanonicalLayout& canon,
                           const ApplyOptions& options) {
    ApplyResult out;
    try {
        const RgbaMask warped = warp_mask_to_frame(mask, frame, canon, options);
        out.image = composite_mask(warped, frame.image);
        out.applied = true;
        if (!frame.landmarks.within(frame.image.size())) {
            out.warning = "landmarks outside frame bounds";
        }
    } catch (const Error& e) {
        if (e.code() != ErrorCode::degenerate_geometry) {
            throw;
        }
        out.image = frame.image;
        out.warning = std::string("makeup not applied: ") + e.what();
    }
    return out;
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) {
        return 0.0;
    }
    std::sort(values.begin(), values.end());
    const double rank = std::ceil(std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(values.size()));
    const auto idx = static_cast<std::size_t>(std::max(1.0, rank)) - 1;
    return values[std::min(idx, values.size() - 1)];
}

std::string timing_report_json(const TimingReport& r) {
    return nlohmann::json{{"fps", r.fps},
                          {"p50_ms", r.p50_ms},
                          {"p95_ms", r.p95_ms},
                          {"frames", r.frames},
                          {"processing_seconds", r.processing_seconds},
                          {"passthrough", r.passthrough},
                          {"workers", r.workers}}
        .dump(2);
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

ApplyResult process(const RgbaMask& mask, const FrameInput& frame, const CanonicalLayout& canon,
                    const ApplyOptions& options, std::size_t index) {
    try {
        return apply_to_frame(mask, frame, canon, options);
    } catch (const Error& e) {
        spdlog::warn("frame {}: {}; passing through", index, e.what());
        return {frame.image, false, e.what()};
    }
}

}  // namespace

TimingReport run_video(const RgbaMask& mask, std::size_t count, const FrameSource& source, const FrameSink& sink,
                       const CanonicalLayout& canon, const VideoConfig& config) {
    if (count == 0) {
        throw Error(ErrorCode::invalid_argument, "video needs at least one frame");
    }
    SmootherState smoother{std::nullopt, config.smoothing_beta};
    TimingReport report;
    report.workers = std::max(1, config.workers);
    std::vector<double> latencies;
    latencies.reserve(count);
    double busy_ms = 0.0;

    const auto note = [&](std::size_t index, const ApplyResult& r) {
        if (!r.applied) {
            ++report.passthrough;
        }
        if (!r.warning.empty() && r.applied) {
            spdlog::debug("frame {}: {}", index, r.warning);
        }
        sink(index, r);
    };

    if (report.workers == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            FrameInput frame = source(i);
            const auto t0 = Clock::now();
            frame.landmarks = smooth_landmarks(smoother, frame.landmarks);
            const ApplyResult r = process(mask, frame, canon, config.apply, i);
            const double ms = ms_since(t0);
            latencies.push_back(ms);
            busy_ms += ms;
            note(i, r);
        }
    } else {
        // Chunks bound memory; the smoother stays on this thread and output
        // order follows the sequence number.
        const std::size_t chunk = static_cast<std::size_t>(report.workers) * 4;
        std::vector<FrameInput> frames;
        std::vector<ApplyResult> results;
        std::vector<double> chunk_ms;
        for (std::size_t base = 0; base < count; base += chunk) {
            const std::size_t n = std::min(chunk, count - base);
            frames.clear();
            for (std::size_t i = 0; i < n; ++i) {
                frames.push_back(source(base + i));
            }
            results.assign(n, {});
            chunk_ms.assign(n, 0.0);
            const auto t0 = Clock::now();
            for (auto& f : frames) {
                f.landmarks = smooth_landmarks(smoother, f.landmarks);
            }
            std::atomic<std::size_t> next{0};
            {
                std::vector<std::jthread> pool;
                for (int w = 0; w < report.workers; ++w) {
                    pool.emplace_back([&] {
                        for (std::size_t i = next++; i < n; i = next++) {
                            const auto f0 = Clock::now();
                            results[i] = process(mask, frames[i], canon, config.apply, base + i);
                            chunk_ms[i] = ms_since(f0);
                        }
                    });
                }
            }
            busy_ms += ms_since(t0);
            for (std::size_t i = 0; i < n; ++i) {
                latencies.push_back(chunk_ms[i]);
                note(base + i, results[i]);
            }
        }
    }
    report.frames = count;
    report.processing_seconds = busy_ms / 1000.0;
    report.fps = busy_ms > 0.0 ? static_cast<double>(count) / report.processing_seconds : 0.0;
    report.p50_ms = percentile(latencies, 50.0);
    report.p95_ms = percentile(latencies, 95.0);
    return report;
}

VideoResult run_video(const RgbaMask& mask, std::span<const FrameInput> frames, const CanonicalLayout& canon,
                      const VideoConfig& config) {
    VideoResult out;
    out.frames.resize(frames.size());
    out.timing = run_video(
        mask, frames.size(), [&](std::size_t i) { return frames[i]; },
        [&](std::size_t i, const ApplyResult& r) { out.frames[i] = r.image; }, canon, config);
    return out;
}

std::vector<FrameFiles> list_frame_directory(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw Error(ErrorCode::io, "frame directory not found: " + dir.string());
    }
    std::vector<fs::path> images;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto& p = entry.path();
        const std::string stem = p.stem().string();
        if (p.extension() == ".png" && !stem.ends_with("_parsing")) {
            images.push_back(p);
        }
    }
    std::sort(images.begin(), images.end());
    std::vector<FrameFiles> out;
    for (const auto& img : images) {
        FrameFiles f;
        f.image = img;
        f.landmarks = fs::path(img).replace_extension(".json");
        if (!fs::exists(f.landmarks)) {
            throw Error(ErrorCode::io, "missing landmarks for frame " + img.string());
        }
        const fs::path parsing = img.parent_path() / (img.stem().string() + "_parsing.png");
        if (fs::exists(parsing)) {
            f.parsing = parsing;
        }
        out.push_back(std::move(f));
    }
    if (out.empty()) {
        throw Error(ErrorCode::io, "no frames in " + dir.string());
    }
    return out;
}

FrameInput load_frame(const FrameFiles& files) {
    FrameInput f;
    f.image = read_png_rgb(files.image);
    f.landmarks = read_landmarks(files.landmarks);
    if (files.parsing) {
        f.parsing = read_png_labels(*files.parsing);
    }
    return f;
}

}  // namespace maskforge
