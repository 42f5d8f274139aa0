#pragma once

// Soft-edged shape rasterization used by the procedural template library and
// the synthetic face generator. Coverage writes are max-combined.

#include <functional>
#include <span>
#include <vector>

#include "maskforge/image.hpp"
#include "maskforge/landmarks.hpp"

namespace maskforge::raster {

struct Box {
    int x0, y0, x1, y1;  // inclusive
};

Box bounds(std::span<const Point> pts, double pad, Size frame);

bool inside_polygon(Point p, std::span<const Point> poly);
double distance_to_segment(Point p, Point a, Point b);
/// Positive inside, negative outside.
double signed_distance(Point p, std::span<const Point> poly);

double smoothstep(double edge0, double edge1, double x);

/// Polygon with a linear ramp of width `feather` pixels across its edge.
void fill_polygon(AlphaMap& dst, std::span<const Point> poly, double feather, double value = 1.0);

/// Ellipse (radii rx, ry, rotated by angle) with full coverage inside
/// normalized radius `core` and a smooth falloff to zero at radius 1.
void fill_ellipse(AlphaMap& dst, Point centre, double rx, double ry, double angle, double core,
                  double value = 1.0);

/// Polyline stroke; `thickness(t)` gives the full width at arc-length
/// fraction t in [0,1].
void stroke(AlphaMap& dst, std::span<const Point> pts, const std::function<double(double)>& thickness,
            double feather = 1.0);

/// Hard polygon fill into a label/colour image.
template <typename Pixel>
void paint_polygon(Image<Pixel>& dst, std::span<const Point> poly, Pixel value) {
    const Box b = bounds(poly, 1.0, dst.size());
    for (int y = b.y0; y <= b.y1; ++y) {
        for (int x = b.x0; x <= b.x1; ++x) {
            if (inside_polygon(Point{static_cast<double>(x), static_cast<double>(y)}, poly)) {
                dst.at(x, y) = value;
            }
        }
    }
}

/// Pixels within `radius` of the polyline.
template <typename Pixel>
void paint_stroke(Image<Pixel>& dst, std::span<const Point> pts, double radius, Pixel value) {
    const Box b = bounds(pts, radius + 1.0, dst.size());
    for (int y = b.y0; y <= b.y1; ++y) {
        for (int x = b.x0; x <= b.x1; ++x) {
            const Point p{static_cast<double>(x), static_cast<double>(y)};
            for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
                if (distance_to_segment(p, pts[i], pts[i + 1]) <= radius) {
                    dst.at(x, y) = value;
                    break;
                }
            }
        }
    }
}

std::vector<Point> scaled_about(std::span<const Point> pts, Point centre, double s);

}  // namespace maskforge::raster
