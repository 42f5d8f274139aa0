#include "maskforge/synthetic_face.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "maskforge/geometry.hpp"
#include "maskforge/random.hpp"
#include "raster.hpp"

namespace maskforge {
namespace {

constexpr Rgb kSkinTones[] = {{0.93, 0.78, 0.68}, {0.85, 0.66, 0.55}, {0.76, 0.57, 0.45},
                              {0.63, 0.45, 0.34}, {0.50, 0.35, 0.26}, {0.89, 0.72, 0.62}};

std::vector<Point> pick(const LandmarkSet& lm, std::initializer_list<int> idx) {
    std::vector<Point> out;
    for (int i : idx) {
        out.push_back(lm[static_cast<std::size_t>(i)]);
    }
    return out;
}

}  // namespace

SyntheticFace make_synthetic_face(const CanonicalLayout& canon, std::uint64_t seed,
                                  const SyntheticFaceOptions& options) {
    Rng rng(mix_seed(seed, 0x5fac3ULL));
    const Size size = options.size;
    const double base = (std::min(size.width, size.height) - 1.0) /
                        (std::max(canon.size().width, canon.size().height) - 1.0);
    const double scale = base * rng.uniform(options.scale_min, options.scale_max);
    const double angle = rng.uniform(-1.0, 1.0) * options.max_rotation_deg * std::numbers::pi / 180.0;
    const double side = std::min(size.width, size.height);
    const Point shift{rng.uniform(-1.0, 1.0) * options.max_shift * side,
                      rng.uniform(-1.0, 1.0) * options.max_shift * side};
    const Point canon_centre{(canon.size().width - 1) / 2.0, (canon.size().height - 1) / 2.0};
    const Point frame_centre{(size.width - 1) / 2.0, (size.height - 1) / 2.0};
    const double c = std::cos(angle) * scale;
    const double s = std::sin(angle) * scale;
    const auto place = [&](Point p) {
        const Point d = p - canon_centre;
        return frame_centre + shift + Point{c * d.x - s * d.y, s * d.x + c * d.y};
    };
    const double jitter = options.landmark_jitter;
    const LandmarkSet lm = canon.reference().mapped([&](Point p) {
        return place(p) + Point{rng.uniform(-jitter, jitter), rng.uniform(-jitter, jitter)};
    });

    SyntheticFace face;
    face.skin = kSkinTones[rng.below(std::size(kSkinTones))];
    face.landmarks = lm;
    face.image = ImageRgb(size, Rgb{0.22, 0.26, 0.30});
    face.parsing = LabelMap(size, 0);

    // Face outline: jaw plus a forehead arc mirrored above the eye line.
    std::vector<Point> outline = pick(lm, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16});
    const Point top_left = lm[0];
    const Point top_right = lm[16];
    const Point mid = 0.5 * (top_left + top_right);
    const Point chin = lm[8];
    const Point up = 0.62 * (mid - chin);
    for (int i = 1; i < 16; ++i) {
        const double t = std::numbers::pi * i / 16.0;
        const Point across = std::cos(t) * (top_right - mid);
        outline.push_back(mid + across + std::sin(t) * up);
    }
    const double unit = distance(lm.group_centroid("eye_left"), lm.group_centroid("eye_right")) / 320.0;

    raster::paint_polygon(face.image, outline, face.skin);
    raster::paint_polygon(face.parsing, outline, std::uint8_t{1});
    raster::paint_polygon(face.parsing, pick(lm, {27, 31, 32, 33, 34, 35}), std::uint8_t{2});

    const Rgb brow_colour{0.22, 0.15, 0.10};
    const auto left_brow = pick(lm, {17, 18, 19, 20, 21});
    const auto right_brow = pick(lm, {22, 23, 24, 25, 26});
    raster::paint_stroke(face.image, left_brow, 7.0 * unit, brow_colour);
    raster::paint_stroke(face.parsing, left_brow, 7.0 * unit, std::uint8_t{7});
    raster::paint_stroke(face.image, right_brow, 7.0 * unit, brow_colour);
    raster::paint_stroke(face.parsing, right_brow, 7.0 * unit, std::uint8_t{6});

    const Rgb sclera{0.92, 0.92, 0.90};
    const Rgb iris{0.25, 0.18, 0.12};
    const auto left_eye = pick(lm, {36, 37, 38, 39, 40, 41});
    const auto right_eye = pick(lm, {42, 43, 44, 45, 46, 47});
    for (const auto* eye : {&left_eye, &right_eye}) {
        raster::paint_polygon(face.image, *eye, sclera);
        const Point centre = 0.5 * ((*eye)[0] + (*eye)[3]);
        const double r = 0.16 * distance((*eye)[0], (*eye)[3]);
        const raster::Box b = raster::bounds(*eye, 0.0, size);
        for (int y = b.y0; y <= b.y1; ++y) {
            for (int x = b.x0; x <= b.x1; ++x) {
                const Point p{static_cast<double>(x), static_cast<double>(y)};
                if (distance(p, centre) <= r && raster::inside_polygon(p, *eye)) {
                    face.image.at(x, y) = iris;
                }
            }
        }
    }
    // Image-left eye is the subject's right eye.
    raster::paint_polygon(face.parsing, left_eye, std::uint8_t{5});
    raster::paint_polygon(face.parsing, right_eye, std::uint8_t{4});

    const Rgb lip_colour{std::clamp(face.skin.r * 0.9 + 0.05, 0.0, 1.0), face.skin.g * 0.7, face.skin.b * 0.72};
    const auto upper_lip = pick(lm, {48, 49, 50, 51, 52, 53, 54, 64, 63, 62, 61, 60});
    const auto lower_lip = pick(lm, {48, 60, 67, 66, 65, 64, 54, 55, 56, 57, 58, 59});
    const auto mouth = pick(lm, {60, 61, 62, 63, 64, 65, 66, 67});
    raster::paint_polygon(face.image, upper_lip, lip_colour);
    raster::paint_polygon(face.image, lower_lip, lip_colour);
    raster::paint_polygon(face.parsing, upper_lip, std::uint8_t{11});
    raster::paint_polygon(face.parsing, lower_lip, std::uint8_t{12});
    raster::paint_polygon(face.image, mouth, Rgb{0.30, 0.12, 0.12});
    raster::paint_polygon(face.parsing, mouth, std::uint8_t{10});

    if (options.noise > 0.0) {
        for (auto& px : face.image.pixels()) {
            px.r = std::clamp(px.r + rng.uniform(-options.noise, options.noise), 0.0, 1.0);
            px.g = std::clamp(px.g + rng.uniform(-options.noise, options.noise), 0.0, 1.0);
            px.b = std::clamp(px.b + rng.uniform(-options.noise, options.noise), 0.0, 1.0);
        }
    }
    return face;
}

}  // namespace maskforge
