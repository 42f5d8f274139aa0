#include <gtest/gtest.h>

#include <cmath>

#include "maskforge/color.hpp"
#include "maskforge/random.hpp"
#include "support/test_support.hpp"

using namespace maskforge;

TEST(Lab, ReferenceWhiteAndBlack) {
    const Lab w = srgb_to_lab(Rgb{1, 1, 1});
    EXPECT_NEAR(w.l, 100.0, 0.01);
    EXPECT_NEAR(w.a, 0.0, 0.01);
    EXPECT_NEAR(w.b, 0.0, 0.01);
    const Lab k = srgb_to_lab(Rgb{0, 0, 0});
    EXPECT_NEAR(k.l, 0.0, 1e-12);
    EXPECT_NEAR(k.a, 0.0, 1e-12);
    EXPECT_NEAR(k.b, 0.0, 1e-12);
}

TEST(Lab, MatchesArbitraryPrecisionColorimetry) {
    // 40-digit evaluation of the IEC 61966-2-1 matrices with the D65 white.
    const Lab lab = srgb_to_lab(Rgb{0.5, 0.25, 0.1});
    EXPECT_NEAR(lab.l, 34.524371259350184, 1e-9);
    EXPECT_NEAR(lab.a, 24.610417769657232, 1e-9);
    EXPECT_NEAR(lab.b, 34.582240435540479, 1e-9);
}

TEST(Lab, RoundTripTenThousandColours) {
    Rng rng(11);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const Rgb c{rng.uniform(), rng.uniform(), rng.uniform()};
        const Rgb back = lab_to_srgb(srgb_to_lab(c));
        worst = std::max({worst, std::abs(back.r - c.r), std::abs(back.g - c.g), std::abs(back.b - c.b)});
    }
    EXPECT_LE(worst, 1e-4);
}

TEST(Lab, ImageConversionIsPerPixel) {
    const ImageRgb img = fixtures::random_image({7, 5}, 3);
    const ImageLab lab = srgb_to_lab(img);
    ASSERT_EQ(lab.size(), img.size());
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        EXPECT_EQ(lab[i], srgb_to_lab(img[i]));
        EXPECT_GE(lab[i].l, 0.0);
        EXPECT_LE(lab[i].l, 100.0);
    }
}

TEST(CosineSimilarity, Examples) {
    EXPECT_DOUBLE_EQ(lab_cosine_similarity({40, 5, 9}, {40, 5, 9}), 1.0);
    EXPECT_NEAR(lab_cosine_similarity({1, 0, 0}, {0, 3, 0}), 0.0, 1e-15);
    // dot 3300 over sqrt(3400) sqrt(3925)
    const double expected = 3300.0 / (std::sqrt(3400.0) * std::sqrt(3925.0));
    EXPECT_NEAR(lab_cosine_similarity({50, 30, 0}, {60, 10, 15}), expected, 1e-14);
    EXPECT_NEAR(expected, 0.9033, 1e-4);
}

TEST(CosineSimilarity, DegenerateVectorsCountAsIdentical) {
    EXPECT_EQ(lab_cosine_similarity({0, 0, 0}, {50, 10, 10}), 1.0);
    EXPECT_EQ(lab_cosine_similarity({50, 10, 10}, {1e-12, 0, 0}), 1.0);
}

TEST(CosineSimilarity, SymmetricAndScaleInvariant) {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        const Lab p{rng.uniform(0, 100), rng.uniform(-128, 127), rng.uniform(-128, 127)};
        const Lab q{rng.uniform(0, 100), rng.uniform(-128, 127), rng.uniform(-128, 127)};
        const double lambda = rng.uniform(0.01, 50.0);
        const double s = lab_cosine_similarity(p, q);
        EXPECT_NEAR(s, lab_cosine_similarity(q, p), 1e-14);
        EXPECT_NEAR(s, lab_cosine_similarity({lambda * p.l, lambda * p.a, lambda * p.b}, q), 1e-12);
        EXPECT_GE(s, -1.0);
        EXPECT_LE(s, 1.0);
    }
}

TEST(CosineSimilarity, ChromaIgnoresLightness) {
    EXPECT_NEAR(lab_cosine_similarity({10, 3, 4}, {90, 6, 8}, LabComponents::chroma), 1.0, 1e-15);
}

TEST(BlendOver, Examples) {
    const Rgb bg{0.2, 0.4, 0.6};
    EXPECT_EQ(blend_over({0.9, 0.1, 0.3, 1.0}, bg), (Rgb{0.9, 0.1, 0.3}));
    EXPECT_EQ(blend_over({0.9, 0.1, 0.3, 0.0}, bg), bg);
    const Rgb mid = blend_over({1, 0, 0, 0.5}, {0, 0, 0});
    EXPECT_DOUBLE_EQ(mid.r, 0.5);
    EXPECT_DOUBLE_EQ(mid.g, 0.0);
    EXPECT_DOUBLE_EQ(mid.b, 0.0);
}

TEST(BlendOver, ConvexCombination) {
    Rng rng(8);
    for (int i = 0; i < 10000; ++i) {
        const Rgba fg{rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
        const Rgb bg{rng.uniform(), rng.uniform(), rng.uniform()};
        const Rgb out = blend_over(fg, bg);
        EXPECT_GE(out.r, std::min(fg.r, bg.r) - 1e-15);
        EXPECT_LE(out.r, std::max(fg.r, bg.r) + 1e-15);
        EXPECT_GE(out.b, std::min(fg.b, bg.b) - 1e-15);
        EXPECT_LE(out.b, std::max(fg.b, bg.b) + 1e-15);
    }
}

TEST(Over, MatchesPorterDuff) {
    const Rgba src{1.0, 0.0, 0.0, 0.5};
    const Rgba dst{0.0, 0.0, 1.0, 0.5};
    const Rgba o = over(src, dst);
    EXPECT_DOUBLE_EQ(o.a, 0.75);
    EXPECT_NEAR(o.r, 0.5 / 0.75, 1e-15);
    EXPECT_NEAR(o.b, 0.25 / 0.75, 1e-15);
    EXPECT_EQ(over({0.3, 0.3, 0.3, 0.0}, dst), dst);
}

TEST(Composite, TransparentAndOpaqueMasks) {
    const ImageRgb base = fixtures::random_image({9, 6}, 1);
    RgbaMask clear = fixtures::random_mask({9, 6}, 2);
    for (auto& p : clear.pixels()) {
        p.a = 0.0;
    }
    EXPECT_EQ(composite_mask(clear, base), base);
    RgbaMask solid = clear;
    for (auto& p : solid.pixels()) {
        p.a = 1.0;
    }
    const ImageRgb out = composite_mask(solid, base);
    for (std::size_t i = 0; i < out.pixel_count(); ++i) {
        EXPECT_EQ(out[i], solid[i].rgb());
    }
}

TEST(Composite, CheckerboardMatchesScalarLoop) {
    const ImageRgb base = fixtures::random_image({16, 16}, 4);
    RgbaMask mask = fixtures::random_mask({16, 16}, 5);
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) {
            mask.at(x, y).a = (x + y) % 2 == 0 ? 1.0 : 0.0;
        }
    }
    const ImageRgb out = composite_mask(mask, base);
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) {
            const Rgba& m = mask.at(x, y);
            const Rgb& b = base.at(x, y);
            const Rgb want = m.a == 1.0 ? m.rgb() : b;
            EXPECT_EQ(out.at(x, y), want);
        }
    }
}

TEST(Composite, RgbUnderZeroAlphaIsIrrelevant) {
    const ImageRgb base = fixtures::random_image({12, 12}, 6);
    RgbaMask a = fixtures::random_mask({12, 12}, 7);
    for (std::size_t i = 0; i < a.pixel_count(); i += 3) {
        a[i].a = 0.0;
    }
    RgbaMask b = a;
    Rng rng(9);
    for (std::size_t i = 0; i < a.pixel_count(); i += 3) {
        b[i] = {rng.uniform(), rng.uniform(), rng.uniform(), 0.0};
    }
    EXPECT_EQ(composite_mask(a, base), composite_mask(b, base));
}

TEST(Composite, DimensionMismatchNamesShapes) {
    try {
        composite_mask(RgbaMask(4, 4), ImageRgb(5, 4));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::dimension_mismatch);
        EXPECT_NE(std::string(e.what()).find("4x4"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("5x4"), std::string::npos);
    }
}
