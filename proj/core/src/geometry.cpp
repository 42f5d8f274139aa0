#include "maskforge/geometry.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace maskforge {
namespace {

constexpr double kSnap = 1e-7;

double snap(double v) {
    const double r = std::round(v);
    return std::abs(v - r) < kSnap ? r : v;
}

bool is_integral(double v) { return v == std::floor(v); }

double tps_kernel(double r2) { return r2 > 0.0 ? r2 * std::log(r2) : 0.0; }

double triangle_area2(Point a, Point b, Point c) {
    return std::abs((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x));
}

template <typename Pixel, typename Sampler>
Image<Pixel> resample(Size out, const AffineTransform& out_to_in, Sampler&& sample) {
    Image<Pixel> result(out);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            const Point p = out_to_in(Point{static_cast<double>(x), static_cast<double>(y)});
            result.at(x, y) = sample(p.x, p.y);
        }
    }
    return result;
}

}  // namespace

AffineTransform::AffineTransform(const std::array<double, 6>& m) : m_(m) {
    if (!(std::abs(determinant()) > 1e-9)) {
        throw Error(ErrorCode::degenerate_geometry, "affine transform is singular");
    }
}

AffineTransform AffineTransform::translation(double dx, double dy) {
    return AffineTransform({1.0, 0.0, dx, 0.0, 1.0, dy});
}

AffineTransform AffineTransform::similarity(double scale, double angle_rad, double dx, double dy) {
    const double c = scale * std::cos(angle_rad);
    const double s = scale * std::sin(angle_rad);
    return AffineTransform({c, -s, dx, s, c, dy});
}

AffineTransform AffineTransform::inverse() const {
    const double det = determinant();
    const double a = m_[4] / det;
    const double b = -m_[1] / det;
    const double d = -m_[3] / det;
    const double e = m_[0] / det;
    return AffineTransform({a, b, -(a * m_[2] + b * m_[5]), d, e, -(d * m_[2] + e * m_[5])});
}

AffineTransform operator*(const AffineTransform& a, const AffineTransform& b) {
    const auto& x = a.m_;
    const auto& y = b.m_;
    return AffineTransform({x[0] * y[0] + x[1] * y[3], x[0] * y[1] + x[1] * y[4], x[0] * y[2] + x[1] * y[5] + x[2],
                            x[3] * y[0] + x[4] * y[3], x[3] * y[1] + x[4] * y[4], x[3] * y[2] + x[4] * y[5] + x[5]});
}

AffineTransform fit_canonical_affine(const LandmarkSet& lm, const CanonicalLayout& canon) {
    if (lm.layout_id() != canon.reference().layout_id()) {
        throw Error(ErrorCode::invalid_argument, "landmark layout '" + lm.layout_id() +
                                                     "' does not match canonical layout '" +
                                                     canon.reference().layout_id() + "'");
    }
    const std::array<Point, 3> src{lm.group_centroid("eye_left"), lm.group_centroid("eye_right"),
                                   lm.group_centroid("lips")};
    const std::array<Point, 3> dst{canon.left_eye_center(), canon.right_eye_center(), canon.lip_center()};

    const double longest = std::max({distance(src[0], src[1]), distance(src[1], src[2]), distance(src[0], src[2])});
    if (!(longest > 1e-9) || triangle_area2(src[0], src[1], src[2]) < 1e-6 * longest * longest) {
        throw Error(ErrorCode::degenerate_geometry, "degenerate landmark triangle");
    }

    const Point ms = (1.0 / 3.0) * (src[0] + src[1] + src[2]);
    const Point md = (1.0 / 3.0) * (dst[0] + dst[1] + dst[2]);
    double num_a = 0.0;
    double num_b = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        const Point s = src[i] - ms;
        const Point d = dst[i] - md;
        num_a += s.x * d.x + s.y * d.y;
        num_b += s.x * d.y - s.y * d.x;
        den += s.x * s.x + s.y * s.y;
    }
    const double a = num_a / den;
    const double b = num_b / den;
    return AffineTransform({a, -b, md.x - (a * ms.x - b * ms.y), b, a, md.y - (b * ms.x + a * ms.y)});
}

Rgb sample_clamped(const ImageRgb& img, double x, double y) {
    const double max_x = img.width() - 1;
    const double max_y = img.height() - 1;
    x = std::clamp(snap(x), 0.0, max_x);
    y = std::clamp(snap(y), 0.0, max_y);
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0;
    const double fy = y - y0;
    if (fx == 0.0 && fy == 0.0) {
        return img.at(x0, y0);
    }
    const int x1 = std::min(x0 + 1, img.width() - 1);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const Rgb& p00 = img.at(x0, y0);
    const Rgb& p10 = img.at(x1, y0);
    const Rgb& p01 = img.at(x0, y1);
    const Rgb& p11 = img.at(x1, y1);
    const double w00 = (1 - fx) * (1 - fy);
    const double w10 = fx * (1 - fy);
    const double w01 = (1 - fx) * fy;
    const double w11 = fx * fy;
    return {w00 * p00.r + w10 * p10.r + w01 * p01.r + w11 * p11.r,
            w00 * p00.g + w10 * p10.g + w01 * p01.g + w11 * p11.g,
            w00 * p00.b + w10 * p10.b + w01 * p01.b + w11 * p11.b};
}

Rgba sample_transparent(const RgbaMask& mask, double x, double y) {
    x = snap(x);
    y = snap(y);
    if (is_integral(x) && is_integral(y)) {
        const int xi = static_cast<int>(x);
        const int yi = static_cast<int>(y);
        return mask.contains(xi, yi) ? mask.at(xi, yi) : Rgba{};
    }
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0;
    const double fy = y - y0;
    const double weights[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
    const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
    const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
    double a = 0.0;
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;
    for (int i = 0; i < 4; ++i) {
        if (weights[i] == 0.0 || !mask.contains(xs[i], ys[i])) {
            continue;
        }
        const Rgba& p = mask.at(xs[i], ys[i]);
        const double wa = weights[i] * p.a;
        a += wa;
        r += wa * p.r;
        g += wa * p.g;
        b += wa * p.b;
    }
    if (a <= 0.0) {
        return {};
    }
    return {std::min(r / a, 1.0), std::min(g / a, 1.0), std::min(b / a, 1.0), std::min(a, 1.0)};
}

double sample_zero(const AlphaMap& map, double x, double y) {
    x = snap(x);
    y = snap(y);
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0;
    const double fy = y - y0;
    auto at = [&](int xi, int yi) { return map.contains(xi, yi) ? map.at(xi, yi) : 0.0; };
    if (fx == 0.0 && fy == 0.0) {
        return at(x0, y0);
    }
    return (1 - fx) * (1 - fy) * at(x0, y0) + fx * (1 - fy) * at(x0 + 1, y0) +
           (1 - fx) * fy * at(x0, y0 + 1) + fx * fy * at(x0 + 1, y0 + 1);
}

std::uint8_t sample_nearest(const LabelMap& labels, double x, double y) {
    const auto xi = static_cast<int>(std::lround(x));
    const auto yi = static_cast<int>(std::lround(y));
    return labels.contains(xi, yi) ? labels.at(xi, yi) : std::uint8_t{0};
}

ImageRgb apply_affine(const ImageRgb& img, const AffineTransform& t, Size out) {
    return resample<Rgb>(out, t.inverse(), [&](double x, double y) { return sample_clamped(img, x, y); });
}

RgbaMask apply_affine(const RgbaMask& mask, const AffineTransform& t, Size out) {
    return resample<Rgba>(out, t.inverse(), [&](double x, double y) { return sample_transparent(mask, x, y); });
}

AlphaMap apply_affine(const AlphaMap& map, const AffineTransform& t, Size out) {
    return resample<double>(out, t.inverse(), [&](double x, double y) { return sample_zero(map, x, y); });
}

LabelMap apply_affine(const LabelMap& labels, const AffineTransform& t, Size out) {
    return resample<std::uint8_t>(out, t.inverse(),
                                  [&](double x, double y) { return sample_nearest(labels, x, y); });
}

Point TpsWarp::operator()(Point p) const {
    const double qx = (p.x - centre_.x) / scale_;
    const double qy = (p.y - centre_.y) / scale_;
    double fx = affine_[0] * qx + affine_[1] * qy + affine_[2];
    double fy = affine_[3] * qx + affine_[4] * qy + affine_[5];
    for (std::size_t j = 0; j < normalized_src_.size(); ++j) {
        const double dx = qx - normalized_src_[j].x;
        const double dy = qy - normalized_src_[j].y;
        const double u = tps_kernel(dx * dx + dy * dy);
        fx += weights_[j].x * u;
        fy += weights_[j].y * u;
    }
    return {fx, fy};
}

std::vector<Point> TpsWarp::kernel_weights() const {
    std::vector<Point> out;
    out.reserve(weights_.size());
    const double s2 = scale_ * scale_;
    for (const auto& w : weights_) {
        out.push_back({w.x / s2, w.y / s2});
    }
    return out;
}

std::array<double, 6> TpsWarp::affine_part() const {
    // U(r / s) = U(r) / s^2 - (log s^2 / s^2) r^2, and the side conditions
    // reduce sum_j w_j |x - p_j|^2 to the constant sum_j w_j |p_j|^2.
    const double s2 = scale_ * scale_;
    const double k = std::log(s2) / s2;
    double cx = 0.0;
    double cy = 0.0;
    for (std::size_t j = 0; j < src_.size(); ++j) {
        const double n2 = src_[j].x * src_[j].x + src_[j].y * src_[j].y;
        cx += weights_[j].x * n2;
        cy += weights_[j].y * n2;
    }
    const auto& a = affine_;
    const double s = scale_;
    return {a[0] / s, a[1] / s, a[2] - (a[0] * centre_.x + a[1] * centre_.y) / s - k * cx,
            a[3] / s, a[4] / s, a[5] - (a[3] * centre_.x + a[4] * centre_.y) / s - k * cy};
}

TpsWarp tps_fit(std::span<const Point> src, std::span<const Point> dst, double reg) {
    if (src.size() != dst.size()) {
        throw Error(ErrorCode::invalid_argument, "tps_fit: control point counts differ");
    }
    if (src.size() < 3) {
        throw Error(ErrorCode::invalid_argument, "tps_fit: need at least 3 control points");
    }
    if (reg < 0.0) {
        throw Error(ErrorCode::invalid_argument, "tps_fit: regularization must be >= 0");
    }
    const std::size_t n = src.size();
    TpsWarp warp;
    warp.src_.assign(src.begin(), src.end());
    warp.dst_.assign(dst.begin(), dst.end());
    warp.reg_ = reg;

    Point centre;
    for (const auto& p : src) {
        centre = centre + p;
    }
    centre = (1.0 / static_cast<double>(n)) * centre;
    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
    for (const auto& p : src) {
        const Point d = p - centre;
        sxx += d.x * d.x;
        syy += d.y * d.y;
        sxy += d.x * d.y;
    }
    const double rms = std::sqrt((sxx + syy) / static_cast<double>(n));
    if (!(rms > 1e-12)) {
        throw Error(ErrorCode::degenerate_geometry, "tps_fit: control points coincide");
    }
    // Smallest eigenvalue of the normalized covariance (trace 1).
    const double tr = (sxx + syy);
    const double det = (sxx * syy - sxy * sxy) / (tr * tr);
    const double min_eig = 0.5 - std::sqrt(std::max(0.0, 0.25 - det));
    if (min_eig < 1e-10) {
        throw Error(ErrorCode::degenerate_geometry,
                    "tps_fit: control points are collinear; the TPS system is singular");
    }
    warp.centre_ = centre;
    warp.scale_ = rms;
    warp.normalized_src_.reserve(n);
    for (const auto& p : src) {
        warp.normalized_src_.push_back((1.0 / rms) * (p - centre));
    }

    const auto dim = static_cast<Eigen::Index>(n + 3);
    Eigen::MatrixXd system = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(dim, 2);
    const auto& q = warp.normalized_src_;
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        for (std::size_t j = 0; j < n; ++j) {
            const double dx = q[i].x - q[j].x;
            const double dy = q[i].y - q[j].y;
            system(ii, static_cast<Eigen::Index>(j)) = tps_kernel(dx * dx + dy * dy);
        }
        system(ii, ii) += reg;
        const auto n3 = static_cast<Eigen::Index>(n);
        system(ii, n3) = 1.0;
        system(ii, n3 + 1) = q[i].x;
        system(ii, n3 + 2) = q[i].y;
        system(n3, ii) = 1.0;
        system(n3 + 1, ii) = q[i].x;
        system(n3 + 2, ii) = q[i].y;
        rhs(ii, 0) = dst[i].x;
        rhs(ii, 1) = dst[i].y;
    }

    const Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
    if (!lu.isInvertible()) {
        throw Error(ErrorCode::degenerate_geometry,
                    "tps_fit: singular system (duplicate controls?); retry with reg > 0");
    }
    const Eigen::MatrixXd solution = lu.solve(rhs);
    const double residual = (system * solution - rhs).norm();
    if (!std::isfinite(residual) || residual > 1e-6 * (1.0 + rhs.norm())) {
        throw Error(ErrorCode::degenerate_geometry,
                    "tps_fit: ill-conditioned system; retry with reg > 0");
    }
    warp.weights_.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        warp.weights_[j] = {solution(jj, 0), solution(jj, 1)};
    }
    const auto n3 = static_cast<Eigen::Index>(n);
    // f(q) = c + B q: stored as {B00, B01, c0, B10, B11, c1}.
    warp.affine_ = {solution(n3 + 1, 0), solution(n3 + 2, 0), solution(n3, 0),
                    solution(n3 + 1, 1), solution(n3 + 2, 1), solution(n3, 1)};
    return warp;
}

RgbaMask tps_pull_back(const RgbaMask& mask, const TpsWarp& inverse, Size out, int grid_step) {
    RgbaMask result(out);
    if (out.width == 0 || out.height == 0) {
        return result;
    }
    if (grid_step <= 1) {
        for (int y = 0; y < out.height; ++y) {
            for (int x = 0; x < out.width; ++x) {
                const Point p = inverse(Point{static_cast<double>(x), static_cast<double>(y)});
                result.at(x, y) = sample_transparent(mask, p.x, p.y);
            }
        }
        return result;
    }

    auto lattice = [grid_step](int extent) {
        std::vector<int> nodes;
        for (int v = 0; v < extent - 1; v += grid_step) {
            nodes.push_back(v);
        }
        nodes.push_back(extent - 1);
        return nodes;
    };
    const auto gx = lattice(out.width);
    const auto gy = lattice(out.height);
    std::vector<Point> field(gx.size() * gy.size());
    for (std::size_t j = 0; j < gy.size(); ++j) {
        for (std::size_t i = 0; i < gx.size(); ++i) {
            field[j * gx.size() + i] = inverse(Point{static_cast<double>(gx[i]), static_cast<double>(gy[j])});
        }
    }
    std::size_t cell_y = 0;
    for (int y = 0; y < out.height; ++y) {
        while (cell_y + 2 < gy.size() && y > gy[cell_y + 1]) {
            ++cell_y;
        }
        const std::size_t y_hi = std::min(cell_y + 1, gy.size() - 1);
        const double ty = y_hi == cell_y ? 0.0
                                         : static_cast<double>(y - gy[cell_y]) / (gy[y_hi] - gy[cell_y]);
        std::size_t cell_x = 0;
        for (int x = 0; x < out.width; ++x) {
            while (cell_x + 2 < gx.size() && x > gx[cell_x + 1]) {
                ++cell_x;
            }
            const std::size_t x_hi = std::min(cell_x + 1, gx.size() - 1);
            const double tx = x_hi == cell_x ? 0.0
                                             : static_cast<double>(x - gx[cell_x]) / (gx[x_hi] - gx[cell_x]);
            const Point& p00 = field[cell_y * gx.size() + cell_x];
            const Point& p10 = field[cell_y * gx.size() + x_hi];
            const Point& p01 = field[y_hi * gx.size() + cell_x];
            const Point& p11 = field[y_hi * gx.size() + x_hi];
            const double sx = (1 - tx) * (1 - ty) * p00.x + tx * (1 - ty) * p10.x + (1 - tx) * ty * p01.x +
                              tx * ty * p11.x;
            const double sy = (1 - tx) * (1 - ty) * p00.y + tx * (1 - ty) * p10.y + (1 - tx) * ty * p01.y +
                              tx * ty * p11.y;
            result.at(x, y) = sample_transparent(mask, sx, sy);
        }
    }
    return result;
}

RgbaMask tps_warp_image(const RgbaMask& mask, const TpsWarp& warp, Size out, int grid_step) {
    const TpsWarp inverse = tps_fit(warp.control_dst(), warp.control_src(), warp.regularization());
    return tps_pull_back(mask, inverse, out, grid_step);
}

FaceRegion parse_face_region(std::string_view name) {
    if (name == "eye_left") return FaceRegion::eye_left;
    if (name == "eye_right") return FaceRegion::eye_right;
    if (name == "lips") return FaceRegion::lips;
    if (name == "cheek_left") return FaceRegion::cheek_left;
    if (name == "cheek_right") return FaceRegion::cheek_right;
    throw Error(ErrorCode::invalid_argument, "unknown face region '" + std::string(name) + "'");
}

std::string_view to_string(FaceRegion region) {
    switch (region) {
        case FaceRegion::eye_left: return "eye_left";
        case FaceRegion::eye_right: return "eye_right";
        case FaceRegion::lips: return "lips";
        case FaceRegion::cheek_left: return "cheek_left";
        case FaceRegion::cheek_right: return "cheek_right";
    }
    return "unknown";
}

std::vector<Point> region_points(const LandmarkSet& lm, FaceRegion region) {
    const auto& schema = lm.schema();
    auto gather = [&](std::string_view group) {
        std::vector<Point> pts;
        for (int i : schema.group(group)) {
            pts.push_back(lm[static_cast<std::size_t>(i)]);
        }
        return pts;
    };
    switch (region) {
        case FaceRegion::eye_left: return gather("eye_left");
        case FaceRegion::eye_right: return gather("eye_right");
        case FaceRegion::lips: return gather("lips");
        case FaceRegion::cheek_left:
        case FaceRegion::cheek_right: {
            const Point anchor = region == FaceRegion::cheek_left ? cheek_anchor_left(lm) : cheek_anchor_right(lm);
            const double half = 0.25 * distance(lm.group_centroid("eye_left"), lm.group_centroid("eye_right"));
            return {anchor - Point{half, half}, anchor + Point{half, half}};
        }
    }
    return {};
}

CropPlacement crop_placement(Size image, const LandmarkSet& lm, FaceRegion region, double margin, Size out) {
    if (!(margin > 0.0) || out.width < 2 || out.height < 2) {
        throw Error(ErrorCode::invalid_argument, "crop_region: margin must be > 0 and output at least 2x2");
    }
    const auto pts = region_points(lm, region);
    double x0 = pts.front().x;
    double x1 = x0;
    double y0 = pts.front().y;
    double y1 = y0;
    for (const auto& p : pts) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    const double cx = 0.5 * (x0 + x1);
    const double cy = 0.5 * (y0 + y1);
    const double hw = std::max(0.5 * (x1 - x0) * margin, 1.0);
    const double hh = std::max(0.5 * (y1 - y0) * margin, 1.0);
    CropPlacement placement{cx - hw, cy - hh, cx + hw, cy + hh, out, false};
    const double max_x = image.width - 1;
    const double max_y = image.height - 1;
    if (placement.x0 < 0.0 || placement.y0 < 0.0 || placement.x1 > max_x || placement.y1 > max_y) {
        placement.clamped = true;
        placement.x0 = std::clamp(placement.x0, 0.0, max_x - 1.0);
        placement.y0 = std::clamp(placement.y0, 0.0, max_y - 1.0);
        placement.x1 = std::clamp(placement.x1, placement.x0 + 1.0, max_x);
        placement.y1 = std::clamp(placement.y1, placement.y0 + 1.0, max_y);
    }
    return placement;
}

namespace {

template <typename Pixel, typename Sampler>
Crop<Pixel> crop_with(const Image<Pixel>& img, const CropPlacement& placement, Sampler&& sample) {
    Crop<Pixel> crop{Image<Pixel>(placement.out), placement};
    const double sx = (placement.x1 - placement.x0) / (placement.out.width - 1);
    const double sy = (placement.y1 - placement.y0) / (placement.out.height - 1);
    for (int v = 0; v < placement.out.height; ++v) {
        for (int u = 0; u < placement.out.width; ++u) {
            crop.image.at(u, v) = sample(img, placement.x0 + u * sx, placement.y0 + v * sy);
        }
    }
    return crop;
}

template <typename Pixel, typename Sampler>
Image<Pixel> paste_with(const Image<Pixel>& crop, const CropPlacement& placement, const Image<Pixel>& dest,
                        Sampler&& sample) {
    if (crop.size() != placement.out) {
        throw Error(ErrorCode::dimension_mismatch, "paste_back: crop size does not match placement");
    }
    Image<Pixel> out = dest;
    const int xa = std::max(0, static_cast<int>(std::ceil(placement.x0)));
    const int xb = std::min(dest.width() - 1, static_cast<int>(std::floor(placement.x1)));
    const int ya = std::max(0, static_cast<int>(std::ceil(placement.y0)));
    const int yb = std::min(dest.height() - 1, static_cast<int>(std::floor(placement.y1)));
    const double su = (placement.out.width - 1) / (placement.x1 - placement.x0);
    const double sv = (placement.out.height - 1) / (placement.y1 - placement.y0);
    for (int y = ya; y <= yb; ++y) {
        for (int x = xa; x <= xb; ++x) {
            out.at(x, y) = sample(crop, (x - placement.x0) * su, (y - placement.y0) * sv);
        }
    }
    return out;
}

}  // namespace

Crop<Rgb> crop_region(const ImageRgb& img, const LandmarkSet& lm, FaceRegion region, double margin, Size out) {
    return crop_with(img, crop_placement(img.size(), lm, region, margin, out),
                     [](const ImageRgb& im, double x, double y) { return sample_clamped(im, x, y); });
}

Crop<Rgba> crop_region(const RgbaMask& mask, const LandmarkSet& lm, FaceRegion region, double margin,
                       Size out) {
    return crop_with(mask, crop_placement(mask.size(), lm, region, margin, out),
                     [](const RgbaMask& m, double x, double y) { return sample_transparent(m, x, y); });
}

ImageRgb paste_back(const ImageRgb& crop, const CropPlacement& placement, const ImageRgb& dest) {
    return paste_with(crop, placement, dest,
                      [](const ImageRgb& im, double x, double y) { return sample_clamped(im, x, y); });
}

RgbaMask paste_back(const RgbaMask& crop, const CropPlacement& placement, const RgbaMask& dest) {
    return paste_with(crop, placement, dest, [](const RgbaMask& m, double x, double y) {
        const double mx = m.width() - 1;
        const double my = m.height() - 1;
        return sample_transparent(m, std::clamp(x, 0.0, mx), std::clamp(y, 0.0, my));
    });
}

}  // namespace maskforge
