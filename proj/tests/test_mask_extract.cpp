#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "maskforge/color.hpp"
#include "maskforge/mask_extract.hpp"
#include "maskforge/random.hpp"
#include "maskforge/synth.hpp"
#include "maskforge/synthetic_face.hpp"

using namespace maskforge;

namespace {

double sq(const Lab& a, const Lab& b) {
    return (a.l - b.l) * (a.l - b.l) + (a.a - b.a) * (a.a - b.a) + (a.b - b.b) * (a.b - b.b);
}

// Plain Lloyd iterations from random distinct starting points.
double lloyd_sse(const std::vector<Lab>& pts, int k, Rng& rng) {
    std::vector<Lab> c;
    while (static_cast<int>(c.size()) < k) {
        c.push_back(pts[rng.below(pts.size())]);
    }
    std::vector<int> assign(pts.size(), -1);
    for (int it = 0; it < 200; ++it) {
        bool changed = false;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            int best = 0;
            for (int j = 1; j < k; ++j) {
                if (sq(pts[i], c[j]) < sq(pts[i], c[best])) {
                    best = j;
                }
            }
            changed |= assign[i] != best;
            assign[i] = best;
        }
        if (!changed) {
            break;
        }
        std::vector<Lab> sum(k);
        std::vector<int> n(k, 0);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            sum[assign[i]].l += pts[i].l;
            sum[assign[i]].a += pts[i].a;
            sum[assign[i]].b += pts[i].b;
            ++n[assign[i]];
        }
        for (int j = 0; j < k; ++j) {
            if (n[j] > 0) {
                c[j] = {sum[j].l / n[j], sum[j].a / n[j], sum[j].b / n[j]};
            }
        }
    }
    double sse = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        sse += sq(pts[i], c[assign[i]]);
    }
    return sse;
}

const CanonicalLayout& canon() {
    static const CanonicalLayout c = standard_layout(256);
    return c;
}

const LabelConfig& labels() {
    static const LabelConfig l = celebamask_hq_labels();
    return l;
}

}  // namespace

TEST(ClusterParams, Validation) {
    EXPECT_NO_THROW((ClusterParams{}).validate());
    EXPECT_THROW((ClusterParams{1, 1}).validate(), Error);
    EXPECT_THROW((ClusterParams{6, 7}).validate(), Error);
    EXPECT_THROW((ClusterParams{6, 0}).validate(), Error);
}

TEST(KMeans, ExactFlatClusters) {
    const std::vector<Lab> colours{{20, 5, 5}, {40, -20, 10}, {60, 30, -30}, {80, 0, 40}, {30, 50, 0}, {90, -5, -5}};
    std::vector<Lab> pts;
    for (int rep = 0; rep < 25; ++rep) {
        pts.insert(pts.end(), colours.begin(), colours.end());
    }
    const ClusterModel m = kmeans_lab(pts, ClusterParams{});
    ASSERT_EQ(m.centroids.size(), 6u);
    for (const Lab& c : colours) {
        const auto it = std::find_if(m.centroids.begin(), m.centroids.end(), [&](const Lab& x) { return sq(x, c) < 1e-18; });
        ASSERT_NE(it, m.centroids.end());
        EXPECT_EQ(m.counts[static_cast<std::size_t>(it - m.centroids.begin())], 25u);
    }
    EXPECT_EQ(m.total(), pts.size());
}

TEST(KMeans, SeparatedPair) {
    std::vector<Lab> pts(90, Lab{10, 0, 0});
    pts.insert(pts.end(), 10, Lab{90, 0, 0});
    const ClusterModel m = kmeans_lab(pts, ClusterParams{2, 1});
    ASSERT_EQ(m.centroids.size(), 2u);
    const std::size_t lo = m.centroids[0].l < m.centroids[1].l ? 0 : 1;
    EXPECT_EQ(m.centroids[lo], (Lab{10, 0, 0}));
    EXPECT_EQ(m.centroids[1 - lo], (Lab{90, 0, 0}));
    EXPECT_EQ(m.counts[lo], 90u);
    EXPECT_EQ(m.counts[1 - lo], 10u);
}

TEST(KMeans, GaussianMixtureNearBestOfFiftyRestarts) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(100 + seed);
        const Lab means[3] = {{30, 10, 10}, {60, -15, 20}, {75, 20, -10}};
        std::vector<Lab> pts;
        for (int i = 0; i < 600; ++i) {
            const Lab& m = means[i % 3];
            auto gauss = [&] {
                const double u1 = 1.0 - rng.uniform();
                const double u2 = rng.uniform();
                return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.141592653589793 * u2);
            };
            pts.push_back({m.l + 4 * gauss(), m.a + 4 * gauss(), m.b + 4 * gauss()});
        }
        ClusterParams p{3, 1, seed};
        p.max_iters = 300;
        const ClusterModel model = kmeans_lab(pts, p);
        double best = std::numeric_limits<double>::infinity();
        Rng restarts(seed);
        for (int r = 0; r < 50; ++r) {
            best = std::min(best, lloyd_sse(pts, 3, restarts));
        }
        EXPECT_LE(model.sse, 1.05 * best);
    }
}

TEST(KMeans, DeterministicForSeed) {
    Rng rng(1);
    std::vector<Lab> pts;
    for (int i = 0; i < 500; ++i) {
        pts.push_back({rng.uniform(0, 100), rng.uniform(-50, 50), rng.uniform(-50, 50)});
    }
    const ClusterModel a = kmeans_lab(pts, ClusterParams{6, 2, 42});
    const ClusterModel b = kmeans_lab(pts, ClusterParams{6, 2, 42});
    EXPECT_EQ(a.centroids, b.centroids);
    EXPECT_EQ(a.counts, b.counts);
}

TEST(KMeans, TooFewPointsRejected) {
    const std::vector<Lab> pts(5, Lab{50, 0, 0});
    EXPECT_THROW(kmeans_lab(pts, ClusterParams{}), Error);
}

TEST(KMeans, ImageRoiOverload) {
    ImageLab img(10, 10, Lab{50, 10, 10});
    LabelMap roi(10, 10, 0);
    for (int x = 0; x < 10; ++x) {
        roi.at(x, 0) = 1;
        img.at(x, 0) = x < 5 ? Lab{20, 0, 0} : Lab{80, 0, 0};
    }
    const ClusterModel m = kmeans_lab(img, roi, ClusterParams{2, 1});
    EXPECT_EQ(m.total(), 10u);
    EXPECT_EQ(m.counts[0], 5u);
}

TEST(SkinTone, TopSWeightedMean) {
    ClusterModel m;
    m.centroids = {{40, 10, 0}, {70, 0, 20}, {55, 5, 5}};
    m.counts = {20, 70, 10};
    const SkinTone one = estimate_skin_tone(m, 1);
    EXPECT_EQ(one.lab, (Lab{70, 0, 20}));
    const SkinTone two = estimate_skin_tone(m, 2);
    EXPECT_NEAR(two.lab.l, (70 * 70.0 + 20 * 40.0) / 90.0, 1e-12);
    EXPECT_NEAR(two.lab.a, (70 * 0.0 + 20 * 10.0) / 90.0, 1e-12);
    EXPECT_NEAR(two.lab.b, (70 * 20.0 + 20 * 0.0) / 90.0, 1e-12);
}

TEST(SkinTone, EqualCountsAndTies) {
    ClusterModel m;
    m.centroids = {{60, 0, 0}, {30, 6, 3}, {45, -3, 9}};
    m.counts = {10, 10, 10};
    const SkinTone all = estimate_skin_tone(m, 3);
    EXPECT_NEAR(all.lab.l, 45.0, 1e-12);
    EXPECT_NEAR(all.lab.a, 1.0, 1e-12);
    EXPECT_NEAR(all.lab.b, 4.0, 1e-12);
    // Ties go to the darker centroid.
    EXPECT_EQ(estimate_skin_tone(m, 1).lab, (Lab{30, 6, 3}));
}

TEST(AlphaMap, Examples) {
    ImageLab img(3, 1);
    img.at(0, 0) = {60, 10, 15};
    img.at(1, 0) = {0, -15, 10};  // orthogonal to the tone
    img.at(2, 0) = {50, 30, 0};
    const AlphaMap a = compute_alpha_map(img, SkinTone{{60, 10, 15}});
    EXPECT_NEAR(a.at(0, 0), 0.0, 1e-15);
    EXPECT_NEAR(a.at(1, 0), 1.0, 1e-15);
    EXPECT_NEAR(a.at(2, 0), 1.0 - 3300.0 / (std::sqrt(3400.0) * std::sqrt(3925.0)), 1e-14);
    EXPECT_NEAR(a.at(2, 0), 0.0967, 1e-4);
}

TEST(AlphaMap, ClampedAndScaleInvariant) {
    Rng rng(2);
    ImageLab img(50, 50);
    for (auto& p : img.pixels()) {
        p = {rng.uniform(0, 100), rng.uniform(-128, 127), rng.uniform(-128, 127)};
    }
    const SkinTone tone{{65, 12, 18}};
    const AlphaMap a = compute_alpha_map(img, tone);
    const AlphaMap b = compute_alpha_map(img, SkinTone{{65 * 3.7, 12 * 3.7, 18 * 3.7}});
    for (std::size_t i = 0; i < a.pixel_count(); ++i) {
        EXPECT_GE(a[i], 0.0);
        EXPECT_LE(a[i], 1.0);
        EXPECT_NEAR(a[i], b[i], 1e-12);
    }
}

TEST(AlphaMap, MonotoneAlongRayFromTone) {
    Rng rng(3);
    const Lab tone{65, 12, 18};
    for (int trial = 0; trial < 100; ++trial) {
        Lab d{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        ImageLab img(200, 1);
        for (int i = 0; i < 200; ++i) {
            const double t = i * 0.5;
            img.at(i, 0) = {tone.l + t * d.l, tone.a + t * d.a, tone.b + t * d.b};
        }
        const AlphaMap a = compute_alpha_map(img, SkinTone{tone});
        for (int i = 1; i < 200; ++i) {
            EXPECT_GE(a.at(i, 0), a.at(i - 1, 0) - 1e-12);
        }
    }
}

TEST(PeriocularRect, ScalesAboutEyeBox) {
    const std::vector<Point> eye{{100, 50}, {140, 50}, {120, 40}, {120, 60}};
    const PixelRect r = periocular_rect(eye, 2.0, {256, 256});
    EXPECT_EQ(r.x0, 80);
    EXPECT_EQ(r.x1, 160);
    EXPECT_LE(r.y0, 30);
    EXPECT_GE(r.y1, 70);
}

class ExtractFixture : public ::testing::Test {
protected:
    void SetUp() override { face = make_synthetic_face(canon(), 5); }
    SyntheticFace face;
};

TEST_F(ExtractFixture, NoMakeupGivesNearZeroAlpha) {
    const EyeExtraction ex = extract_eye_mask(face.image, face.landmarks, face.parsing, labels(), {}, canon());
    double sum = 0.0;
    for (const auto& p : ex.mask.pixels()) {
        sum += p.a;
    }
    EXPECT_EQ(ex.mask.size(), canon().size());
    // Averaged over the periocular rectangles, where the mask can be non-zero.
    std::size_t n = 0;
    for (std::size_t e = 0; e < 2; ++e) {
        const auto& schema = canon().reference().schema();
        std::vector<Point> pts;
        for (int i : schema.group(e == 0 ? "eye_left" : "eye_right")) {
            pts.push_back(ex.alignment(face.landmarks[static_cast<std::size_t>(i)]));
        }
        const PixelRect r = periocular_rect(pts, 2.2, canon().size());
        n += static_cast<std::size_t>((r.x1 - r.x0 + 1) * (r.y1 - r.y0 + 1));
    }
    EXPECT_LT(sum / static_cast<double>(n), 0.02);
}

TEST_F(ExtractFixture, DeterministicAndGated) {
    const EyeExtraction a = extract_eye_mask(face.image, face.landmarks, face.parsing, labels(), {}, canon());
    const EyeExtraction b = extract_eye_mask(face.image, face.landmarks, face.parsing, labels(), {}, canon());
    EXPECT_EQ(a.mask, b.mask);
    EXPECT_EQ(a.models[0].centroids, b.models[0].centroids);
    const LabelMap aligned = apply_affine(face.parsing, a.alignment, canon().size());
    const LabelSet gate = labels().set_of(labels().eye_region);
    for (int y = 0; y < aligned.height(); ++y) {
        for (int x = 0; x < aligned.width(); ++x) {
            if (!gate[aligned.at(x, y)]) {
                EXPECT_EQ(a.mask.at(x, y).a, 0.0);
            }
            EXPECT_GE(a.mask.at(x, y).a, 0.0);
            EXPECT_LE(a.mask.at(x, y).a, 1.0);
        }
    }
}

TEST_F(ExtractFixture, RecoversSyntheticEyeshadow) {
    const StyleLibrary lib = make_default_library(canon());
    MakeupStyle style;
    style.regions[MakeupRegion::eyeshadow] = {"eyeshadow_lid", Rgb{0.2, 0.3, 0.75}, 0.8, Finish::matte};
    const RgbaMask gt = render_style_mask(style, lib, canon());
    const GeneratedPair pair = generate_pair(face.image, face.landmarks, gt, canon());
    const EyeExtraction ex = extract_eye_mask(pair.after, face.landmarks, face.parsing, labels(), {}, canon());
    double inside = 0.0;
    double outside = 0.0;
    std::size_t n_in = 0;
    std::size_t n_out = 0;
    for (std::size_t i = 0; i < gt.pixel_count(); ++i) {
        if (gt[i].a > 0.3) {
            inside += ex.mask[i].a;
            ++n_in;
        } else if (gt[i].a == 0.0) {
            outside += ex.mask[i].a;
            ++n_out;
        }
    }
    ASSERT_GT(n_in, 100u);
    EXPECT_GT(inside / n_in, 5.0 * outside / n_out);
}

TEST_F(ExtractFixture, DroppingBrowLabelIsLocal) {
    const EyeExtraction base = extract_eye_mask(face.image, face.landmarks, face.parsing, labels(), {}, canon());
    LabelMap relabelled = face.parsing;
    const LabelSet brow = labels().set_of(labels().brow);
    for (auto& l : relabelled.pixels()) {
        if (brow[l]) {
            l = static_cast<std::uint8_t>(labels().id("skin"));
        }
    }
    const EyeExtraction ex = extract_eye_mask(face.image, face.landmarks, relabelled, labels(), {}, canon());
    const LabelMap aligned = apply_affine(face.parsing, base.alignment, canon().size());
    double outside = 0.0;
    double on_brow = 0.0;
    std::size_t n_brow = 0;
    for (std::size_t i = 0; i < aligned.pixel_count(); ++i) {
        const double d = std::abs(base.mask[i].a - ex.mask[i].a);
        if (brow[aligned[i]]) {
            on_brow += d;
            ++n_brow;
        } else {
            outside = std::max(outside, d);
        }
    }
    // Brow pixels now enter the clustering ROI, which may nudge the skin tone
    // slightly; the visible change stays on the brows.
    EXPECT_LT(outside, 0.01);
    ASSERT_GT(n_brow, 0u);
    EXPECT_GT(on_brow, 0.0);
}

TEST_F(ExtractFixture, MissingEyeLabelsRejected) {
    LabelMap parsing = face.parsing;
    const LabelSet eye = labels().set_of(labels().eye);
    for (auto& l : parsing.pixels()) {
        if (eye[l]) {
            l = 1;
        }
    }
    try {
        extract_eye_mask(face.image, face.landmarks, parsing, labels(), {}, canon());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::missing_region);
        EXPECT_STREQ(e.what(), "parsing lacks eye region");
    }
}

TEST_F(ExtractFixture, SizeMismatchRejected) {
    EXPECT_THROW(extract_eye_mask(face.image, face.landmarks, LabelMap(10, 10), labels(), {}, canon()), Error);
}
