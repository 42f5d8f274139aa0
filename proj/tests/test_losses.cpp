#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "maskforge/losses.hpp"
#include "maskforge/random.hpp"
#include "support/test_support.hpp"

using namespace maskforge;

namespace {

RgbaMask flat(Size s, Rgba c) { return RgbaMask(s, c); }

LipMask full_lip(Size s) { return LipMask(s, 1); }

// Lightweight reference loops, written independently of the library kernels.
double recon_loop(const RgbaMask& p, const RgbaMask& g) {
    long double s = 0.0L;
    for (int y = 0; y < p.height(); ++y) {
        for (int x = 0; x < p.width(); ++x) {
            const Rgba a = p.at(x, y);
            const Rgba b = g.at(x, y);
            s += static_cast<long double>(b.a) * (std::fabs(a.r - b.r) + std::fabs(a.g - b.g) + std::fabs(a.b - b.b));
        }
    }
    return static_cast<double>(s);
}

}  // namespace

TEST(Recon, HandExample) {
    const RgbaMask gt = flat({1, 1}, {0.8, 0.2, 0.0, 0.5});
    const RgbaMask pred = flat({1, 1}, {0.6, 0.4, 0.1, 0.9});
    const LossResult r = recon_alpha_weighted(pred, gt);
    EXPECT_NEAR(r.value, 0.25, 1e-15);
    EXPECT_DOUBLE_EQ(r.grad[0].r, -0.5);
    EXPECT_DOUBLE_EQ(r.grad[0].g, 0.5);
    EXPECT_DOUBLE_EQ(r.grad[0].b, 0.5);
    EXPECT_EQ(r.grad[0].a, 0.0);
}

TEST(Recon, ZeroAtEqualityAndUnderTransparentGt) {
    const RgbaMask m = fixtures::random_mask({8, 8}, 3);
    EXPECT_EQ(recon_alpha_weighted(m, m).value, 0.0);
    RgbaMask gt = fixtures::random_mask({8, 8}, 4);
    for (auto& p : gt.pixels()) {
        p.a = 0.0;
    }
    EXPECT_EQ(recon_alpha_weighted(m, gt).value, 0.0);
}

TEST(Recon, MatchesLoopOracle) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const RgbaMask p = fixtures::random_mask({8, 8}, 2 * s);
        const RgbaMask g = fixtures::random_mask({8, 8}, 2 * s + 1);
        EXPECT_NEAR(recon_alpha_weighted(p, g).value, recon_loop(p, g), 1e-12);
        EXPECT_NEAR(recon_alpha_weighted(p, g, Reduction::mean).value, recon_loop(p, g) / 64.0, 1e-12);
    }
}

TEST(Recon, GatingProperty) {
    // Perturbing pred RGB where gt alpha is zero never changes the loss.
    Rng rng(11);
    for (int trial = 0; trial < 1000; ++trial) {
        const RgbaMask pred = fixtures::random_mask({6, 6}, rng.bits());
        RgbaMask gt = fixtures::random_mask({6, 6}, rng.bits());
        for (auto& p : gt.pixels()) {
            if (rng.uniform() < 0.5) {
                p.a = 0.0;
            }
        }
        RgbaMask moved = pred;
        for (std::size_t i = 0; i < moved.pixel_count(); ++i) {
            if (gt[i].a == 0.0) {
                moved[i].r = rng.uniform();
                moved[i].g = rng.uniform();
                moved[i].b = rng.uniform();
            }
        }
        ASSERT_EQ(recon_alpha_weighted(pred, gt).value, recon_alpha_weighted(moved, gt).value);
    }
}

TEST(Recon, DimensionMismatch) {
    EXPECT_THROW(recon_alpha_weighted(RgbaMask(2, 2), RgbaMask(2, 3)), Error);
    EXPECT_THROW(alpha_l1(RgbaMask(2, 2), RgbaMask(3, 2)), Error);
}

TEST(AlphaL1, Examples) {
    const LossResult r = alpha_l1(flat({2, 2}, {0, 0, 0, 1}), flat({2, 2}, {0.3, 0.3, 0.3, 0}));
    EXPECT_EQ(r.value, 4.0);
    EXPECT_EQ(r.grad[0], (Rgba{0, 0, 0, 1}));
    const RgbaMask m = fixtures::random_mask({8, 8}, 9);
    EXPECT_EQ(alpha_l1(m, m).value, 0.0);
    const RgbaMask p = fixtures::random_mask({8, 8}, 10);
    double loop = 0.0;
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
            loop += std::fabs(p.at(x, y).a - m.at(x, y).a);
        }
    }
    EXPECT_NEAR(alpha_l1(p, m).value, loop, 1e-12);
}

TEST(MaskedMean, Examples) {
    const Rgb f = masked_mean_color(flat({3, 3}, {0.2, 0.4, 0.6, 0.7}), full_lip({3, 3}));
    EXPECT_NEAR(f.r, 0.2, 1e-15);
    EXPECT_NEAR(f.g, 0.4, 1e-15);
    EXPECT_NEAR(f.b, 0.6, 1e-15);
    RgbaMask half(2, 2);
    half[0] = half[1] = {1, 0, 0, 1};
    half[2] = half[3] = {0, 0, 1, 1};
    const Rgb c = masked_mean_color(half, full_lip({2, 2}));
    EXPECT_DOUBLE_EQ(c.r, 0.5);
    EXPECT_DOUBLE_EQ(c.g, 0.0);
    EXPECT_DOUBLE_EQ(c.b, 0.5);
}

TEST(MaskedMean, AccumulateAndDivideOracle) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const LossInputs in = make_loss_inputs(s);
        long double r = 0, g = 0, b = 0;
        int n = 0;
        for (std::size_t i = 0; i < in.pred.pixel_count(); ++i) {
            if (in.lip[i]) {
                r += in.pred[i].r;
                g += in.pred[i].g;
                b += in.pred[i].b;
                ++n;
            }
        }
        ASSERT_GT(n, 0);
        const Rgb c = masked_mean_color(in.pred, in.lip);
        EXPECT_NEAR(c.r, static_cast<double>(r / n), 1e-12);
        EXPECT_NEAR(c.g, static_cast<double>(g / n), 1e-12);
        EXPECT_NEAR(c.b, static_cast<double>(b / n), 1e-12);
    }
}

TEST(MaskedMean, EmptyLipMask) {
    try {
        masked_mean_color(RgbaMask(4, 4), LipMask(4, 4, 0));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::empty_mask);
        EXPECT_STREQ(e.what(), "empty lip mask");
    }
    EXPECT_THROW(lip_color_loss_noreg(RgbaMask(4, 4), RgbaMask(4, 4), LipMask(4, 4, 0)), Error);
}

TEST(LipColor, HandNorm) {
    const Size s{4, 4};
    const MaskedMeanEstimator c;
    const double v = lip_color_loss(flat(s, {0.5, 0, 0, 1}), flat(s, {0.1, 0.3, 0, 1}), full_lip(s), c).value;
    EXPECT_NEAR(v, 0.5, 1e-15);
    const RgbaMask m = fixtures::random_mask(s, 2);
    EXPECT_EQ(lip_color_loss(m, m, full_lip(s), c).value, 0.0);
}

TEST(LipColor, NoRegEqualsReferenceEstimatorAndTwoStageOracle) {
    const MaskedMeanEstimator c;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const LossInputs in = make_loss_inputs(s);
        const LossResult a = lip_color_loss(in.pred, in.gt, in.lip, c);
        const LossResult b = lip_color_loss_noreg(in.pred, in.gt, in.lip);
        EXPECT_EQ(a.value, b.value);
        EXPECT_EQ(a.grad, b.grad);
        const Rgb p = masked_mean_color(in.pred, in.lip);
        const Rgb g = masked_mean_color(in.gt, in.lip);
        EXPECT_NEAR(b.value, std::hypot(p.r - g.r, p.g - g.g, p.b - g.b), 1e-10);
    }
}

TEST(LipColor, GradientOnlyInsideLip) {
    const LossInputs in = make_loss_inputs(5);
    const LossResult r = lip_color_loss_noreg(in.pred, in.gt, in.lip);
    for (std::size_t i = 0; i < in.lip.pixel_count(); ++i) {
        if (!in.lip[i]) {
            EXPECT_EQ(r.grad[i], Rgba{});
        }
        EXPECT_EQ(r.grad[i].a, 0.0);
    }
}

TEST(LipColor, PremultipliedModeWeightsByAlpha) {
    const Size s{2, 1};
    RgbaMask m(s);
    m[0] = {1, 0, 0, 0.5};
    m[1] = {0, 1, 0, 1.0};
    const Rgb c = MaskedMeanEstimator(AlphaParticipation::premultiplied).estimate(m, full_lip(s));
    EXPECT_DOUBLE_EQ(c.r, 0.25);
    EXPECT_DOUBLE_EQ(c.g, 0.5);
}

TEST(Bce, Examples) {
    const double zero[] = {0.0};
    EXPECT_NEAR(adversarial_bce(zero, true).value, std::log(2.0), 1e-15);
    EXPECT_NEAR(adversarial_bce(zero, false).value, std::log(2.0), 1e-15);
    const double big[] = {20.0};
    EXPECT_LT(adversarial_bce(big, true).value, 1e-8);
    const double huge[] = {800.0, -800.0};
    EXPECT_TRUE(std::isfinite(adversarial_bce(huge, true).value));
    EXPECT_NEAR(adversarial_bce(huge, true).value, 400.0, 1e-9);
    const double bad[] = {NAN};
    EXPECT_THROW(adversarial_bce(bad, true), Error);
}

TEST(Bce, ExtendedPrecisionOracle) {
    Rng rng(3);
    std::vector<double> logits(64);
    for (double& x : logits) {
        x = rng.uniform(-12.0, 12.0);
    }
    for (bool real : {true, false}) {
        long double sum = 0.0L;
        for (double x : logits) {
            const long double sig = 1.0L / (1.0L + std::exp(-static_cast<long double>(x)));
            sum -= real ? std::log(sig) : std::log(1.0L - sig);
        }
        EXPECT_NEAR(adversarial_bce(logits, real).value, static_cast<double>(sum / logits.size()), 1e-9);
    }
}

TEST(TotalLoss, Examples) {
    const auto w = default_part_weights();
    EXPECT_EQ(w.at(Part::eye).recon, 100.0);
    EXPECT_EQ(w.at(Part::cheek).adv, 10.0);
    std::map<Part, PartComponents> zero{{Part::lip, {}}, {Part::eye, {}}, {Part::cheek, {}}};
    EXPECT_EQ(total_loss(zero, w), 0.0);
    std::map<Part, PartComponents> lip{{Part::lip, {1, 1, 1, 1, 1}}};
    EXPECT_DOUBLE_EQ(total_loss(lip, w), 270.0);
    // Colour applies to the lip part only.
    std::map<Part, PartComponents> eye{{Part::eye, {1, 1, 1, 1, 1}}};
    EXPECT_DOUBLE_EQ(total_loss(eye, w), 220.0);
}

TEST(TotalLoss, Linearity) {
    Rng rng(8);
    for (int t = 0; t < 100; ++t) {
        std::map<Part, PartComponents> c;
        for (Part p : {Part::lip, Part::eye, Part::cheek}) {
            c[p] = {rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
        }
        auto w = default_part_weights();
        const double base = total_loss(c, w);
        auto w2 = w;
        for (auto& [p, pw] : w2) {
            pw = {2 * pw.recon, 2 * pw.alpha, 2 * pw.adv, 2 * pw.color};
        }
        EXPECT_NEAR(total_loss(c, w2), 2 * base, 1e-9);
        auto c2 = c;
        c2[Part::cheek].alpha += 0.5;
        EXPECT_NEAR(total_loss(c2, w) - base, 0.5 * w[Part::cheek].alpha, 1e-9);
    }
    std::map<Part, PartComponents> neg{{Part::eye, {-1, 0, 0, 0, 0}}};
    EXPECT_THROW(total_loss(neg, default_part_weights()), Error);
}

TEST(FiniteDiff, QuadraticIsExact) {
    const std::vector<double> c{1.0, -2.0, 0.5, 3.0, 7.0};
    const std::vector<double> x{0.3, -1.2, 2.0, 0.01, -0.4};
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        g[i] = 2 * c[i] * x[i];
    }
    const auto f = [&](std::span<const double> v) {
        double s = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            s += c[i] * v[i] * v[i];
        }
        return s;
    };
    const GradCheck r = finite_diff_check(f, x, g);
    EXPECT_LT(r.max_rel_error, 1e-8);
    EXPECT_EQ(r.coordinates, x.size());
    g[2] += 0.1;
    EXPECT_GT(finite_diff_check(f, x, g).max_rel_error, 1e-3);
    EXPECT_EQ(finite_diff_check(f, x, g, 1e-3, 3, 1).coordinates, 3u);
}

TEST(FiniteDiff, AvoidKinksKeepsMargin) {
    const LossInputs in = make_loss_inputs(2);
    const RgbaMask p = avoid_kinks(in.pred, in.gt, 0.01);
    for (std::size_t i = 0; i < p.pixel_count(); ++i) {
        EXPECT_GE(std::fabs(p[i].r - in.gt[i].r), 0.01 - 1e-12);
        EXPECT_GE(std::fabs(p[i].a - in.gt[i].a), 0.01 - 1e-12);
    }
    EXPECT_TRUE(channels_in_unit_range(p));
}

TEST(GradientChecks, TwentySeedsWithinTolerance) {
    std::vector<std::uint64_t> seeds(20);
    std::iota(seeds.begin(), seeds.end(), 0);
    const LossCheckReport r = run_gradient_checks(seeds);
    ASSERT_EQ(r.entries.size(), 20u);
    for (const auto& [name, err] : r.max_rel_error) {
        const double tol = name.starts_with("adversarial") ? 1e-6 : 1e-4;
        EXPECT_LT(err, tol) << name;
    }
    EXPECT_EQ(r.max_rel_error.size(), 7u);
    EXPECT_TRUE(r.passed());
    for (const auto& e : r.entries) {
        for (const auto& [name, v] : e.values) {
            EXPECT_GE(v, 0.0) << name;
        }
    }
}

TEST(GradientChecks, ReportIsReproducible) {
    const std::uint64_t seeds[] = {4, 5};
    const auto a = nlohmann::json::parse(loss_report_json(run_gradient_checks(seeds)));
    const auto b = nlohmann::json::parse(loss_report_json(run_gradient_checks(seeds)));
    EXPECT_EQ(a["entries"], b["entries"]);
    EXPECT_EQ(a["entries"][0]["seed"], 4);
    EXPECT_EQ(a["entries"][0]["pred_hash"].get<std::string>().size(), 18u);
}

TEST(Flatten, RoundTrip) {
    const RgbaMask m = fixtures::random_mask({5, 3}, 1);
    const auto v = flatten(m);
    EXPECT_EQ(v.size(), 60u);
    EXPECT_EQ(unflatten(v, m.size()), m);
}
