#include "raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace maskforge::raster {

Box bounds(std::span<const Point> pts, double pad, Size frame) {
    double x0 = std::numeric_limits<double>::infinity();
    double y0 = x0;
    double x1 = -x0;
    double y1 = -x0;
    for (const auto& p : pts) {
        x0 = std::min(x0, p.x);
        y0 = std::min(y0, p.y);
        x1 = std::max(x1, p.x);
        y1 = std::max(y1, p.y);
    }
    return {std::max(0, static_cast<int>(std::floor(x0 - pad))), std::max(0, static_cast<int>(std::floor(y0 - pad))),
            std::min(frame.width - 1, static_cast<int>(std::ceil(x1 + pad))),
            std::min(frame.height - 1, static_cast<int>(std::ceil(y1 + pad)))};
}

bool inside_polygon(Point p, std::span<const Point> poly) {
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const Point& a = poly[i];
        const Point& b = poly[j];
        if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) {
            inside = !inside;
        }
    }
    return inside;
}

double distance_to_segment(Point p, Point a, Point b) {
    const Point ab = b - a;
    const double len2 = ab.x * ab.x + ab.y * ab.y;
    double t = len2 > 0.0 ? ((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return distance(p, a + t * ab);
}

double signed_distance(Point p, std::span<const Point> poly) {
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        d = std::min(d, distance_to_segment(p, poly[j], poly[i]));
    }
    return inside_polygon(p, poly) ? d : -d;
}

double smoothstep(double edge0, double edge1, double x) {
    const double t = std::clamp((x - edge0) / (edge1 - edge0), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

void fill_polygon(AlphaMap& dst, std::span<const Point> poly, double feather, double value) {
    const Box b = bounds(poly, feather + 1.0, dst.size());
    for (int y = b.y0; y <= b.y1; ++y) {
        for (int x = b.x0; x <= b.x1; ++x) {
            const double sd = signed_distance(Point{static_cast<double>(x), static_cast<double>(y)}, poly);
            const double c = value * std::clamp(0.5 + sd / feather, 0.0, 1.0);
            dst.at(x, y) = std::max(dst.at(x, y), c);
        }
    }
}

void fill_ellipse(AlphaMap& dst, Point centre, double rx, double ry, double angle, double core, double value) {
    const double r = std::max(rx, ry);
    const Point corners[2] = {centre - Point{r, r}, centre + Point{r, r}};
    const Box b = bounds(corners, 1.0, dst.size());
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    for (int y = b.y0; y <= b.y1; ++y) {
        for (int x = b.x0; x <= b.x1; ++x) {
            const double dx = x - centre.x;
            const double dy = y - centre.y;
            const double u = (c * dx + s * dy) / rx;
            const double v = (-s * dx + c * dy) / ry;
            const double d = std::sqrt(u * u + v * v);
            if (d >= 1.0) {
                continue;
            }
            const double cov = value * (1.0 - smoothstep(core, 1.0, d));
            dst.at(x, y) = std::max(dst.at(x, y), cov);
        }
    }
}

void stroke(AlphaMap& dst, std::span<const Point> pts, const std::function<double(double)>& thickness,
            double feather) {
    std::vector<double> arc(pts.size(), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i) {
        arc[i] = arc[i - 1] + distance(pts[i - 1], pts[i]);
    }
    const double total = arc.back() > 0.0 ? arc.back() : 1.0;
    double max_t = 0.0;
    for (int i = 0; i <= 16; ++i) {
        max_t = std::max(max_t, thickness(i / 16.0));
    }
    const Box b = bounds(pts, max_t + feather + 1.0, dst.size());
    for (int y = b.y0; y <= b.y1; ++y) {
        for (int x = b.x0; x <= b.x1; ++x) {
            const Point p{static_cast<double>(x), static_cast<double>(y)};
            double best = std::numeric_limits<double>::infinity();
            double best_t = 0.0;
            for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
                const Point ab = pts[i + 1] - pts[i];
                const double len2 = ab.x * ab.x + ab.y * ab.y;
                double t = len2 > 0.0 ? ((p.x - pts[i].x) * ab.x + (p.y - pts[i].y) * ab.y) / len2 : 0.0;
                t = std::clamp(t, 0.0, 1.0);
                const double d = distance(p, pts[i] + t * ab);
                if (d < best) {
                    best = d;
                    best_t = (arc[i] + t * std::sqrt(len2)) / total;
                }
            }
            const double half = 0.5 * thickness(best_t);
            const double cov = std::clamp(0.5 + (half - best) / feather, 0.0, 1.0);
            dst.at(x, y) = std::max(dst.at(x, y), cov);
        }
    }
}

std::vector<Point> scaled_about(std::span<const Point> pts, Point centre, double s) {
    std::vector<Point> out;
    out.reserve(pts.size());
    for (const auto& p : pts) {
        out.push_back(centre + s * (p - centre));
    }
    return out;
}

}  // namespace maskforge::raster
