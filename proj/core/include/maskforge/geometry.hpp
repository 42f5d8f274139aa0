#pragma once

#include <array>
#include <span>
#include <string_view>
#include <vector>

#include "maskforge/image.hpp"
#include "maskforge/landmarks.hpp"

namespace maskforge {

/// 2x3 matrix mapping (x, y) to (m00 x + m01 y + m02, m10 x + m11 y + m12).
class AffineTransform {
public:
    /// Identity.
    AffineTransform() = default;
    /// Throws degenerate_geometry when |det| <= 1e-9.
    explicit AffineTransform(const std::array<double, 6>& m);

    static AffineTransform translation(double dx, double dy);
    static AffineTransform similarity(double scale, double angle_rad, double dx, double dy);

    Point operator()(Point p) const {
        return {m_[0] * p.x + m_[1] * p.y + m_[2], m_[3] * p.x + m_[4] * p.y + m_[5]};
    }

    const std::array<double, 6>& coefficients() const noexcept { return m_; }
    double determinant() const noexcept { return m_[0] * m_[4] - m_[1] * m_[3]; }

    AffineTransform inverse() const;
    /// (a * b)(p) == a(b(p)).
    friend AffineTransform operator*(const AffineTransform& a, const AffineTransform& b);

private:
    std::array<double, 6> m_{1.0, 0.0, 0.0, 0.0, 1.0, 0.0};
};

/// Least-squares similarity taking the (left eye, right eye, lips) centroids of
/// `lm` onto the same centroids of the canonical reference. Throws
/// degenerate_geometry ("degenerate landmark triangle") on collinear input.
AffineTransform fit_canonical_affine(const LandmarkSet& lm, const CanonicalLayout& canon);

// Bilinear samplers at integer pixel centres. Coordinates within 1e-7 of an
// integer snap to it, so identity and integer shifts copy pixels exactly.
Rgb sample_clamped(const ImageRgb& img, double x, double y);
Rgba sample_transparent(const RgbaMask& mask, double x, double y);
double sample_zero(const AlphaMap& map, double x, double y);
std::uint8_t sample_nearest(const LabelMap& labels, double x, double y);

/// Resamples `img` into an `out` frame where `t` maps input coordinates to
/// output coordinates. RGB samples clamp at the edge, masks go transparent
/// outside, labels use nearest neighbour with 0 outside.
ImageRgb apply_affine(const ImageRgb& img, const AffineTransform& t, Size out);
RgbaMask apply_affine(const RgbaMask& mask, const AffineTransform& t, Size out);
AlphaMap apply_affine(const AlphaMap& map, const AffineTransform& t, Size out);
LabelMap apply_affine(const LabelMap& labels, const AffineTransform& t, Size out);

/// Thin-plate spline f: R^2 -> R^2 with kernel U(r) = r^2 log r^2.
///
/// Internally the control points are centred and scaled to unit RMS radius
/// before solving; accessors report coefficients in pixel units.
class TpsWarp {
public:
    Point operator()(Point p) const;

    std::span<const Point> control_src() const noexcept { return src_; }
    std::span<const Point> control_dst() const noexcept { return dst_; }
    double regularization() const noexcept { return reg_; }

    /// Per-control kernel weights in pixel units.
    std::vector<Point> kernel_weights() const;
    /// Affine part as a 2x3 matrix {a00, a01, a02, a10, a11, a12} in pixel units.
    std::array<double, 6> affine_part() const;

private:
    friend TpsWarp tps_fit(std::span<const Point>, std::span<const Point>, double);

    std::vector<Point> src_;
    std::vector<Point> dst_;
    double reg_ = 0.0;
    Point centre_;
    double scale_ = 1.0;
    std::vector<Point> normalized_src_;
    std::vector<Point> weights_;       // normalized frame
    std::array<double, 6> affine_{};   // normalized input -> pixel output
};

/// Solves the TPS interpolation system mapping src[i] to dst[i]. `reg` is
/// added to the kernel diagonal (normalized units). Throws invalid_argument
/// for fewer than 3 pairs and degenerate_geometry for collinear or
/// coincident controls.
TpsWarp tps_fit(std::span<const Point> src, std::span<const Point> dst, double reg = 0.0);

/// Warps `mask` forward by `warp` (control_src -> control_dst) into an `out`
/// frame. Output pixels are pulled back through a TPS fitted in the
/// dst -> src direction. With grid_step > 1 the pull-back is evaluated on a
/// coarse lattice and bilinearly interpolated between nodes.
RgbaMask tps_warp_image(const RgbaMask& mask, const TpsWarp& warp, Size out, int grid_step = 1);

/// Same, using an already fitted pull-back (output -> input) spline.
RgbaMask tps_pull_back(const RgbaMask& mask, const TpsWarp& inverse, Size out, int grid_step = 1);

enum class FaceRegion { eye_left, eye_right, lips, cheek_left, cheek_right };

FaceRegion parse_face_region(std::string_view name);
std::string_view to_string(FaceRegion region);

/// Source rectangle of a crop, inclusive pixel-centre coordinates.
struct CropPlacement {
    double x0 = 0.0;
    double y0 = 0.0;
    double x1 = 0.0;
    double y1 = 0.0;
    Size out;
    bool clamped = false;
};

template <typename Pixel>
struct Crop {
    Image<Pixel> image;
    CropPlacement placement;
};

/// Landmarks of a region used for its bounding box. Cheek regions use a
/// square of side 0.5 x inter-ocular distance around the cheek anchor.
std::vector<Point> region_points(const LandmarkSet& lm, FaceRegion region);

/// Bounding box of the region expanded by `margin` about its centre, clamped
/// to the image (placement.clamped set when clamping happened).
CropPlacement crop_placement(Size image, const LandmarkSet& lm, FaceRegion region, double margin = 1.4,
                             Size out = {256, 256});

Crop<Rgb> crop_region(const ImageRgb& img, const LandmarkSet& lm, FaceRegion region,
                      double margin = 1.4, Size out = {256, 256});
Crop<Rgba> crop_region(const RgbaMask& mask, const LandmarkSet& lm, FaceRegion region,
                       double margin = 1.4, Size out = {256, 256});

/// Writes `crop` back into `dest` over the placement rectangle.
ImageRgb paste_back(const ImageRgb& crop, const CropPlacement& placement, const ImageRgb& dest);
RgbaMask paste_back(const RgbaMask& crop, const CropPlacement& placement, const RgbaMask& dest);

}  // namespace maskforge
