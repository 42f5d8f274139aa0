#include "maskforge/color.hpp"

#include <array>
#include <cmath>

namespace maskforge {
namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

// IEC 61966-2-1 linear sRGB -> XYZ (D65).
constexpr Mat3 kRgbToXyz{{
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
}};

constexpr double kWhiteX = 0.95047;
constexpr double kWhiteY = 1.0;
constexpr double kWhiteZ = 1.08883;

constexpr double kDelta = 6.0 / 29.0;

Mat3 invert(const Mat3& m) {
    const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                       m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                       m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    Mat3 inv{};
    inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
    inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
    inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
    inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
    inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
    inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
    inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
    inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
    inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
    return inv;
}

const Mat3& xyz_to_rgb() {
    static const Mat3 inv = invert(kRgbToXyz);
    return inv;
}

double decode_srgb(double c) {
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double encode_srgb(double c) {
    return c <= 0.0031308 ? c * 12.92 : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

double lab_f(double t) {
    return t > kDelta * kDelta * kDelta ? std::cbrt(t) : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

double lab_f_inv(double t) {
    return t > kDelta ? t * t * t : 3.0 * kDelta * kDelta * (t - 4.0 / 29.0);
}

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace

Lab srgb_to_lab(const Rgb& c) {
    const double r = decode_srgb(c.r);
    const double g = decode_srgb(c.g);
    const double b = decode_srgb(c.b);
    const auto& m = kRgbToXyz;
    const double x = m[0][0] * r + m[0][1] * g + m[0][2] * b;
    const double y = m[1][0] * r + m[1][1] * g + m[1][2] * b;
    const double z = m[2][0] * r + m[2][1] * g + m[2][2] * b;
    const double fx = lab_f(x / kWhiteX);
    const double fy = lab_f(y / kWhiteY);
    const double fz = lab_f(z / kWhiteZ);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

Rgb lab_to_srgb(const Lab& c) {
    const double fy = (c.l + 16.0) / 116.0;
    const double fx = fy + c.a / 500.0;
    const double fz = fy - c.b / 200.0;
    const double x = kWhiteX * lab_f_inv(fx);
    const double y = kWhiteY * lab_f_inv(fy);
    const double z = kWhiteZ * lab_f_inv(fz);
    const auto& m = xyz_to_rgb();
    const double r = m[0][0] * x + m[0][1] * y + m[0][2] * z;
    const double g = m[1][0] * x + m[1][1] * y + m[1][2] * z;
    const double b = m[2][0] * x + m[2][1] * y + m[2][2] * z;
    return {clamp01(encode_srgb(r)), clamp01(encode_srgb(g)), clamp01(encode_srgb(b))};
}

ImageLab srgb_to_lab(const ImageRgb& img) {
    ImageLab out(img.size());
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        out[i] = srgb_to_lab(img[i]);
    }
    return out;
}

ImageRgb lab_to_srgb(const ImageLab& img) {
    ImageRgb out(img.size());
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        out[i] = lab_to_srgb(img[i]);
    }
    return out;
}

double lab_cosine_similarity(const Lab& p, const Lab& q, LabComponents components) {
    const double pl = components == LabComponents::full ? p.l : 0.0;
    const double ql = components == LabComponents::full ? q.l : 0.0;
    const double np = std::sqrt(pl * pl + p.a * p.a + p.b * p.b);
    const double nq = std::sqrt(ql * ql + q.a * q.a + q.b * q.b);
    if (np < 1e-9 || nq < 1e-9) {
        return 1.0;
    }
    const double sim = (pl * ql + p.a * q.a + p.b * q.b) / (np * nq);
    return sim > 1.0 ? 1.0 : (sim < -1.0 ? -1.0 : sim);
}

Rgba over(const Rgba& src, const Rgba& dst) {
    const double dst_weight = dst.a * (1.0 - src.a);
    const double a = src.a + dst_weight;
    if (a <= 0.0) {
        return {};
    }
    if (src.a <= 0.0) {
        return dst;
    }
    if (src.a >= 1.0) {
        return src;
    }
    if (dst_weight <= 0.0) {
        return src;
    }
    return {(src.r * src.a + dst.r * dst_weight) / a, (src.g * src.a + dst.g * dst_weight) / a,
            (src.b * src.a + dst.b * dst_weight) / a, a};
}

ImageRgb composite_mask(const RgbaMask& mask, const ImageRgb& base) {
    require_same_size(mask, base, "composite_mask");
    ImageRgb out(base.size());
    for (std::size_t i = 0; i < base.pixel_count(); ++i) {
        out[i] = blend_over(mask[i], base[i]);
    }
    return out;
}

}  // namespace maskforge
