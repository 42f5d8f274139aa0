#include <gtest/gtest.h>

#include <atomic>
#include <cmath>

#include <nlohmann/json.hpp>

#include "maskforge/color.hpp"
#include "maskforge/png_io.hpp"
#include "maskforge/synth.hpp"
#include "maskforge/synthetic_face.hpp"
#include "maskforge/video.hpp"
#include "support/test_support.hpp"

using namespace maskforge;

namespace {

const CanonicalLayout& canon() {
    static const CanonicalLayout c = standard_layout(128);
    return c;
}

RgbaMask style_mask(std::uint64_t seed) {
    static const StyleLibrary lib = make_default_library(canon());
    return render_style_mask(sample_style(lib, seed), lib, canon());
}

FrameInput face_frame(std::uint64_t seed) {
    const SyntheticFace f = make_synthetic_face(canon(), seed, {.size = {128, 128}});
    return {f.image, f.landmarks, f.parsing, 0.0};
}

LandmarkSet shifted(const LandmarkSet& lm, double dx) {
    return lm.mapped([dx](Point p) { return Point{p.x + dx, p.y}; });
}

}  // namespace

TEST(Smoother, ZeroBetaPassesThrough) {
    SmootherState s;
    const LandmarkSet lm = canon().reference();
    EXPECT_EQ(smooth_landmarks(s, lm), lm);
    const LandmarkSet moved = shifted(lm, 3.0);
    EXPECT_EQ(smooth_landmarks(s, moved), moved);
}

TEST(Smoother, ConstantStreamIsFixedPoint) {
    SmootherState s{std::nullopt, 0.8};
    const LandmarkSet lm = canon().reference();
    for (int i = 0; i < 50; ++i) {
        EXPECT_EQ(smooth_landmarks(s, lm), lm);
    }
}

TEST(Smoother, ConvergesAfterStep) {
    SmootherState s{std::nullopt, 0.5};
    const LandmarkSet lm = canon().reference();
    smooth_landmarks(s, lm);
    LandmarkSet out;
    for (int i = 0; i < 60; ++i) {
        out = smooth_landmarks(s, shifted(lm, 4.0));
    }
    EXPECT_NEAR(out[0].x, lm[0].x + 4.0, 1e-12);
}

TEST(Smoother, AlternatingJitterSteadyState) {
    // Closed form for a +-1 px square wave: amplitude (1 - beta) / (1 + beta).
    const double beta = 0.6;
    SmootherState s{std::nullopt, beta};
    const LandmarkSet lm = canon().reference();
    double last = 0.0;
    for (int i = 0; i < 200; ++i) {
        last = smooth_landmarks(s, shifted(lm, i % 2 == 0 ? 1.0 : -1.0))[10].x - lm[10].x;
    }
    EXPECT_NEAR(std::abs(last), (1 - beta) / (1 + beta), 1e-9);
    EXPECT_NEAR(std::abs(last), 0.25, 1e-9);
}

TEST(Smoother, RejectsBadBetaAndLayoutChange) {
    SmootherState bad{std::nullopt, 1.0};
    EXPECT_THROW(smooth_landmarks(bad, canon().reference()), Error);
    SmootherState s{std::nullopt, 0.3};
    smooth_landmarks(s, canon().reference());
    EXPECT_THROW(smooth_landmarks(s, LandmarkSet("other", {{1, 1}})), Error);
}

TEST(Apply, TransparentMaskIsBitExact) {
    const FrameInput f = face_frame(2);
    const ApplyResult r = apply_to_frame(RgbaMask(canon().size()), f, canon());
    EXPECT_EQ(r.image, f.image);
}

TEST(Apply, DeterministicForIdenticalFrames) {
    const RgbaMask m = style_mask(1);
    const FrameInput f = face_frame(3);
    const ApplyResult a = apply_to_frame(m, f, canon());
    EXPECT_TRUE(a.applied);
    EXPECT_EQ(a.image, apply_to_frame(m, f, canon()).image);
    EXPECT_NE(a.image, f.image);
}

TEST(Apply, GatingLeavesNonFacePixelsExact) {
    const RgbaMask m = style_mask(4);
    const FrameInput f = face_frame(5);
    const ApplyResult r = apply_to_frame(m, f, canon());
    const LabelSet face = celebamask_hq_labels().set_of(LabelConfig{}.face);
    for (std::size_t i = 0; i < f.image.pixel_count(); ++i) {
        if (!face[(*f.parsing)[i]]) {
            ASSERT_EQ(r.image[i], f.image[i]);
        }
    }
}

TEST(Apply, LowerHalfExclusionOnlyChangesThatHalf) {
    const RgbaMask m = style_mask(6);
    FrameInput f = face_frame(7);
    const int skin = celebamask_hq_labels().id("skin");
    LabelMap parsing(f.image.size(), static_cast<std::uint8_t>(skin));
    for (int y = f.image.height() / 2; y < f.image.height(); ++y) {
        for (int x = 0; x < f.image.width(); ++x) {
            parsing.at(x, y) = 0;
        }
    }
    f.parsing = parsing;
    ApplyOptions ungated;
    ungated.gate = false;
    const ImageRgb free = apply_to_frame(m, f, canon(), ungated).image;
    const ImageRgb gated = apply_to_frame(m, f, canon()).image;
    bool lower_changed = false;
    for (int y = 0; y < f.image.height(); ++y) {
        for (int x = 0; x < f.image.width(); ++x) {
            if (y < f.image.height() / 2) {
                ASSERT_EQ(gated.at(x, y), free.at(x, y));
            } else {
                ASSERT_EQ(gated.at(x, y), f.image.at(x, y));
                lower_changed |= free.at(x, y) != f.image.at(x, y);
            }
        }
    }
    EXPECT_TRUE(lower_changed);
}

TEST(Apply, AlphaScale) {
    const RgbaMask m = style_mask(8);
    const FrameInput f = face_frame(9);
    ApplyOptions zero;
    zero.alpha_scale = 0.0;
    EXPECT_EQ(apply_to_frame(m, f, canon(), zero).image, f.image);
    ApplyOptions dbl;
    dbl.alpha_scale = 2.0;
    const RgbaMask w = warp_mask_to_frame(m, f, canon(), dbl);
    EXPECT_TRUE(channels_in_unit_range(w));
    const RgbaMask w1 = warp_mask_to_frame(m, f, canon());
    for (std::size_t i = 0; i < w.pixel_count(); ++i) {
        ASSERT_NEAR(w[i].a, std::min(1.0, 2.0 * w1[i].a), 1e-12);
    }
}

TEST(Apply, CanonicalLandmarksMatchDirectComposite) {
    const RgbaMask m = style_mask(10);
    const FrameInput f{fixtures::random_image(canon().size(), 1), canon().reference(), std::nullopt, 0.0};
    ApplyOptions o;
    o.warp.grid_step = 1;
    EXPECT_LT(fixtures::max_abs_diff(apply_to_frame(m, f, canon(), o).image, composite_mask(m, f.image)), 1e-9);
}

TEST(Apply, DegenerateLandmarksPassThroughWithWarning) {
    const RgbaMask m = style_mask(11);
    FrameInput f = face_frame(12);
    f.landmarks = f.landmarks.mapped([](Point) { return Point{64, 64}; });
    const ApplyResult r = apply_to_frame(m, f, canon());
    EXPECT_FALSE(r.applied);
    EXPECT_FALSE(r.warning.empty());
    EXPECT_EQ(r.image, f.image);
}

TEST(Apply, MaskIsNeverMutated) {
    const RgbaMask m = style_mask(13);
    const std::uint64_t before = content_hash(m);
    std::vector<FrameInput> frames;
    for (std::uint64_t i = 0; i < 5; ++i) {
        frames.push_back(face_frame(i));
    }
    run_video(m, frames, canon());
    EXPECT_EQ(content_hash(m), before);
}

TEST(RunVideo, IdenticalFramesGiveIdenticalOutputs) {
    const RgbaMask m = style_mask(14);
    const std::vector<FrameInput> frames(100, face_frame(15));
    const VideoResult r = run_video(m, frames, canon());
    ASSERT_EQ(r.frames.size(), 100u);
    for (const auto& out : r.frames) {
        ASSERT_EQ(out, r.frames.front());
    }
    EXPECT_EQ(r.timing.frames, 100u);
}

TEST(RunVideo, WorkersPreserveOrderAndResults) {
    const RgbaMask m = style_mask(16);
    std::vector<FrameInput> frames;
    for (std::uint64_t i = 0; i < 24; ++i) {
        frames.push_back(face_frame(100 + i));
    }
    VideoConfig one;
    one.smoothing_beta = 0.4;
    VideoConfig many = one;
    many.workers = 4;
    const VideoResult a = run_video(m, frames, canon(), one);
    const VideoResult b = run_video(m, frames, canon(), many);
    EXPECT_EQ(a.frames, b.frames);
    EXPECT_EQ(b.timing.workers, 4);

    std::vector<std::size_t> order;
    run_video(
        m, frames.size(), [&](std::size_t i) { return frames[i]; },
        [&](std::size_t i, const ApplyResult&) { order.push_back(i); }, canon(), many);
    for (std::size_t i = 0; i < order.size(); ++i) {
        EXPECT_EQ(order[i], i);
    }
}

TEST(RunVideo, FailedFramePassesThrough) {
    const RgbaMask m = style_mask(17);
    std::vector<FrameInput> frames{face_frame(1), face_frame(2), face_frame(3)};
    frames[1].parsing = LabelMap(7, 7);
    const VideoResult r = run_video(m, frames, canon());
    ASSERT_EQ(r.frames.size(), 3u);
    EXPECT_EQ(r.frames[1], frames[1].image);
    EXPECT_NE(r.frames[0], frames[0].image);
    EXPECT_EQ(r.timing.passthrough, 1u);
}

TEST(RunVideo, FpsDefinition) {
    const RgbaMask m = style_mask(18);
    const std::vector<FrameInput> frames(20, face_frame(19));
    const TimingReport t = run_video(m, frames, canon()).timing;
    ASSERT_GT(t.processing_seconds, 0.0);
    EXPECT_NEAR(t.fps, 20.0 / t.processing_seconds, 1e-9 * t.fps);
    EXPECT_LE(t.p50_ms, t.p95_ms);
    const auto j = nlohmann::json::parse(timing_report_json(t));
    for (const char* key : {"fps", "p50_ms", "p95_ms", "frames"}) {
        EXPECT_TRUE(j.contains(key)) << key;
    }
}

TEST(Percentile, NearestRank) {
    std::vector<double> v{5, 1, 4, 2, 3};
    EXPECT_EQ(percentile(v, 50), 3.0);
    EXPECT_EQ(percentile(v, 100), 5.0);
    EXPECT_EQ(percentile(v, 0), 1.0);
    std::vector<double> h(100);
    for (int i = 0; i < 100; ++i) {
        h[static_cast<std::size_t>(i)] = i + 1;
    }
    EXPECT_EQ(percentile(h, 95), 95.0);
}

TEST(FrameDirectory, ListsInNameOrderWithOptionalParsing) {
    const auto dir = fixtures::scratch_dir("frames");
    for (int i : {2, 0, 1}) {
        const FrameInput f = face_frame(static_cast<std::uint64_t>(i));
        const std::string stem = "frame_" + std::to_string(i);
        write_png(dir / (stem + ".png"), f.image);
        write_landmarks(dir / (stem + ".json"), f.landmarks);
        if (i == 1) {
            write_png(dir / (stem + "_parsing.png"), *f.parsing);
        }
    }
    const auto files = list_frame_directory(dir);
    ASSERT_EQ(files.size(), 3u);
    EXPECT_EQ(files[0].image.filename(), "frame_0.png");
    EXPECT_EQ(files[2].image.filename(), "frame_2.png");
    EXPECT_FALSE(files[0].parsing.has_value());
    ASSERT_TRUE(files[1].parsing.has_value());
    const FrameInput loaded = load_frame(files[1]);
    EXPECT_EQ(loaded.parsing, face_frame(1).parsing);
    EXPECT_EQ(loaded.image, quantized(face_frame(1).image));
}
