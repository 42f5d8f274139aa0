#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "maskforge/image.hpp"

namespace maskforge {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
    friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
    friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
    friend Point operator*(double s, Point p) { return {s * p.x, s * p.y}; }
};

double distance(Point a, Point b);

/// Named index groups of a landmark schema. "Left" and "right" refer to image
/// sides, not the subject's.
struct LandmarkSchema {
    std::string id;
    std::size_t point_count = 0;
    std::map<std::string, std::vector<int>, std::less<>> groups;

    const std::vector<int>& group(std::string_view name) const;
};

/// 68-point iBUG / 300-W ordering.
const LandmarkSchema& ibug68_schema();
const LandmarkSchema& schema_for(std::string_view layout_id);

inline constexpr std::string_view kIbug68 = "ibug68";

class LandmarkSet {
public:
    LandmarkSet() = default;
    LandmarkSet(std::string layout_id, std::vector<Point> points);

    const std::string& layout_id() const noexcept { return layout_id_; }
    std::span<const Point> points() const noexcept { return points_; }
    std::size_t size() const noexcept { return points_.size(); }
    const Point& operator[](std::size_t i) const { return points_[i]; }
    const LandmarkSchema& schema() const { return schema_for(layout_id_); }

    Point centroid(std::span<const int> indices) const;
    Point group_centroid(std::string_view group) const;

    /// Applies f to every point; layout id is preserved.
    template <typename F>
    LandmarkSet mapped(F&& f) const {
        std::vector<Point> out;
        out.reserve(points_.size());
        for (const auto& p : points_) {
            out.push_back(f(p));
        }
        return {layout_id_, std::move(out)};
    }

    bool within(Size frame) const;

    friend bool operator==(const LandmarkSet&, const LandmarkSet&) = default;

private:
    std::string layout_id_;
    std::vector<Point> points_;
};

/// Reference landmark configuration defining the canonical face frame.
class CanonicalLayout {
public:
    CanonicalLayout() = default;
    CanonicalLayout(Size size, LandmarkSet reference, int version = 1);

    Size size() const noexcept { return size_; }
    const LandmarkSet& reference() const noexcept { return reference_; }
    int version() const noexcept { return version_; }

    /// Same layout resampled to a square frame of `side` pixels.
    CanonicalLayout scaled_to(int side) const;

    Point left_eye_center() const { return reference_.group_centroid("eye_left"); }
    Point right_eye_center() const { return reference_.group_centroid("eye_right"); }
    Point lip_center() const { return reference_.group_centroid("lips"); }

private:
    Size size_;
    LandmarkSet reference_;
    int version_ = 1;
};

/// Built-in layout: 1024x1024, eyes horizontal, inter-ocular distance 320 px.
/// `side` rescales the frame.
CanonicalLayout standard_layout(int side = 1024);

/// Cheek anchors: midpoints of the outer eye corner and the same-side mouth
/// corner (ibug68 indices 36/48 and 45/54).
Point cheek_anchor_left(const LandmarkSet& lm);
Point cheek_anchor_right(const LandmarkSet& lm);

// JSON: {"layout_id": "...", "points": [[x, y], ...]}; the canonical layout
// file adds "width", "height" and "version".
LandmarkSet parse_landmarks_json(std::string_view text);
std::string landmarks_to_json(const LandmarkSet& lm);
LandmarkSet read_landmarks(const std::filesystem::path& path);
void write_landmarks(const std::filesystem::path& path, const LandmarkSet& lm);

CanonicalLayout parse_layout_json(std::string_view text);
std::string layout_to_json(const CanonicalLayout& layout);
CanonicalLayout read_layout(const std::filesystem::path& path);
void write_layout(const std::filesystem::path& path, const CanonicalLayout& layout);

}  // namespace maskforge
