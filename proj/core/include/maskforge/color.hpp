#pragma once

#include "maskforge/image.hpp"

namespace maskforge {

/// Which LAB components participate in cosine similarity.
enum class LabComponents {
    full,    // (L, a, b)
    chroma,  // (a, b) only
};

Lab srgb_to_lab(const Rgb& c);
Rgb lab_to_srgb(const Lab& c);

ImageLab srgb_to_lab(const ImageRgb& img);
ImageRgb lab_to_srgb(const ImageLab& img);

/// Cosine of the angle between two LAB vectors. Returns 1 when either
/// vector has norm below 1e-9, so near-black pixels never read as makeup.
double lab_cosine_similarity(const Lab& p, const Lab& q,
                             LabComponents components = LabComponents::full);

/// Straight-alpha "over" of an RGBA foreground onto an opaque background.
inline Rgb blend_over(const Rgba& fg, const Rgb& bg) {
    const double keep = 1.0 - fg.a;
    return {fg.a * fg.r + keep * bg.r, fg.a * fg.g + keep * bg.g, fg.a * fg.b + keep * bg.b};
}

/// Porter-Duff "over" between two straight-alpha RGBA values.
Rgba over(const Rgba& src, const Rgba& dst);

/// Per-pixel blend_over. A=0 pixels leave the base value untouched bit-exactly.
ImageRgb composite_mask(const RgbaMask& mask, const ImageRgb& base);

}  // namespace maskforge
