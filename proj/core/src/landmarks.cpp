#include "maskforge/landmarks.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include <nlohmann/json.hpp>

#include "maskforge/png_io.hpp"

namespace maskforge {
namespace {

std::vector<int> iota(int first, int last_inclusive) {
    std::vector<int> v(static_cast<std::size_t>(last_inclusive - first + 1));
    std::iota(v.begin(), v.end(), first);
    return v;
}

LandmarkSchema make_ibug68() {
    LandmarkSchema s;
    s.id = std::string(kIbug68);
    s.point_count = 68;
    s.groups["jaw"] = iota(0, 16);
    s.groups["brow_left"] = iota(17, 21);
    s.groups["brow_right"] = iota(22, 26);
    s.groups["nose"] = iota(27, 35);
    s.groups["eye_left"] = iota(36, 41);
    s.groups["eye_right"] = iota(42, 47);
    s.groups["lips"] = iota(48, 67);
    s.groups["lips_outer"] = iota(48, 59);
    s.groups["lips_inner"] = iota(60, 67);
    return s;
}

// Hand-placed mean-face landmarks at 1024x1024.
std::vector<Point> standard_points() {
    std::vector<Point> p(68);
    for (int i = 0; i <= 16; ++i) {
        const double theta = std::numbers::pi - std::numbers::pi * i / 16.0;
        p[static_cast<std::size_t>(i)] = {512.0 + 280.0 * std::cos(theta), 420.0 + 480.0 * std::sin(theta)};
    }
    const Point brows[] = {{262, 360}, {302, 335}, {352, 325}, {402, 328}, {447, 342}};
    for (int i = 0; i < 5; ++i) {
        p[static_cast<std::size_t>(17 + i)] = brows[i];
        p[static_cast<std::size_t>(26 - i)] = {1024.0 - brows[i].x, brows[i].y};
    }
    const Point nose[] = {{512, 420}, {512, 480}, {512, 540}, {512, 600},
                          {462, 630}, {487, 640}, {512, 645}, {537, 640}, {562, 630}};
    for (int i = 0; i < 9; ++i) {
        p[static_cast<std::size_t>(27 + i)] = nose[i];
    }
    const Point eye_left[] = {{292, 420}, {330, 400}, {374, 400}, {412, 420}, {374, 440}, {330, 440}};
    const Point eye_right[] = {{612, 420}, {650, 400}, {694, 400}, {732, 420}, {694, 440}, {650, 440}};
    for (int i = 0; i < 6; ++i) {
        p[static_cast<std::size_t>(36 + i)] = eye_left[i];
        p[static_cast<std::size_t>(42 + i)] = eye_right[i];
    }
    const Point lips[] = {{432, 720}, {462, 700}, {490, 690}, {512, 695}, {534, 690}, {562, 700},
                          {592, 720}, {562, 745}, {537, 758}, {512, 760}, {487, 758}, {462, 745},
                          {442, 720}, {487, 712}, {512, 714}, {537, 712}, {582, 720}, {537, 728},
                          {512, 730}, {487, 728}};
    for (int i = 0; i < 20; ++i) {
        p[static_cast<std::size_t>(48 + i)] = lips[i];
    }
    return p;
}

nlohmann::json points_json(const LandmarkSet& lm) {
    auto arr = nlohmann::json::array();
    for (const auto& p : lm.points()) {
        arr.push_back({p.x, p.y});
    }
    return arr;
}

LandmarkSet landmarks_from(const nlohmann::json& j) {
    const auto layout_id = j.value("layout_id", std::string(kIbug68));
    const auto& arr = j.at("points");
    if (!arr.is_array()) {
        throw Error(ErrorCode::decode, "landmarks: \"points\" must be an array");
    }
    std::vector<Point> pts;
    pts.reserve(arr.size());
    for (const auto& item : arr) {
        if (!item.is_array() || item.size() != 2) {
            throw Error(ErrorCode::decode, "landmarks: each point must be [x, y]");
        }
        pts.push_back({item[0].get<double>(), item[1].get<double>()});
    }
    return {layout_id, std::move(pts)};
}

std::string slurp(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return {bytes.begin(), bytes.end()};
}

void dump(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::io, "cannot write " + path.string());
    }
    out << text << '\n';
}

nlohmann::json parse_json(std::string_view text, std::string_view what) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::decode, std::string(what) + ": " + e.what());
    }
}

}  // namespace

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

const std::vector<int>& LandmarkSchema::group(std::string_view name) const {
    const auto it = groups.find(name);
    if (it == groups.end()) {
        throw Error(ErrorCode::not_found, "landmark schema " + id + " has no group " + std::string(name));
    }
    return it->second;
}

const LandmarkSchema& ibug68_schema() {
    static const LandmarkSchema schema = make_ibug68();
    return schema;
}

const LandmarkSchema& schema_for(std::string_view layout_id) {
    if (layout_id == kIbug68) {
        return ibug68_schema();
    }
    throw Error(ErrorCode::invalid_argument, "unknown landmark layout '" + std::string(layout_id) + "'");
}

LandmarkSet::LandmarkSet(std::string layout_id, std::vector<Point> points)
    : layout_id_(std::move(layout_id)), points_(std::move(points)) {
    const auto& schema = schema_for(layout_id_);
    if (points_.size() != schema.point_count) {
        throw Error(ErrorCode::invalid_argument,
                    "layout " + layout_id_ + " expects " + std::to_string(schema.point_count) +
                        " points, got " + std::to_string(points_.size()));
    }
    for (const auto& p : points_) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            throw Error(ErrorCode::invalid_argument, "landmark coordinates must be finite");
        }
    }
}

Point LandmarkSet::centroid(std::span<const int> indices) const {
    Point sum;
    for (int i : indices) {
        sum = sum + points_.at(static_cast<std::size_t>(i));
    }
    return (1.0 / static_cast<double>(indices.size())) * sum;
}

Point LandmarkSet::group_centroid(std::string_view group) const {
    return centroid(schema().group(group));
}

bool LandmarkSet::within(Size frame) const {
    for (const auto& p : points_) {
        if (p.x < 0.0 || p.y < 0.0 || p.x > frame.width - 1 || p.y > frame.height - 1) {
            return false;
        }
    }
    return true;
}

CanonicalLayout::CanonicalLayout(Size size, LandmarkSet reference, int version)
    : size_(size), reference_(std::move(reference)), version_(version) {
    if (size_.width <= 0 || size_.height <= 0) {
        throw Error(ErrorCode::invalid_argument, "canonical layout needs a positive frame size");
    }
    if (!reference_.within(size_)) {
        throw Error(ErrorCode::invalid_argument, "canonical reference landmarks leave the frame");
    }
}

CanonicalLayout CanonicalLayout::scaled_to(int side) const {
    // Pixel centres sit at integer coordinates: map [0, n-1] onto [0, side-1].
    const double fx = (side - 1.0) / (size_.width - 1.0);
    const double fy = (side - 1.0) / (size_.height - 1.0);
    return {Size{side, side}, reference_.mapped([&](Point p) { return Point{p.x * fx, p.y * fy}; }),
            version_};
}

CanonicalLayout standard_layout(int side) {
    CanonicalLayout base(Size{1024, 1024}, LandmarkSet(std::string(kIbug68), standard_points()), 1);
    return side == 1024 ? base : base.scaled_to(side);
}

Point cheek_anchor_left(const LandmarkSet& lm) { return 0.5 * (lm[36] + lm[48]); }
Point cheek_anchor_right(const LandmarkSet& lm) { return 0.5 * (lm[45] + lm[54]); }

LandmarkSet parse_landmarks_json(std::string_view text) {
    const auto j = parse_json(text, "landmarks");
    try {
        return landmarks_from(j);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::decode, std::string("landmarks: ") + e.what());
    }
}

std::string landmarks_to_json(const LandmarkSet& lm) {
    nlohmann::json j;
    j["layout_id"] = lm.layout_id();
    j["points"] = points_json(lm);
    return j.dump();
}

LandmarkSet read_landmarks(const std::filesystem::path& path) { return parse_landmarks_json(slurp(path)); }

void write_landmarks(const std::filesystem::path& path, const LandmarkSet& lm) {
    dump(path, landmarks_to_json(lm));
}

CanonicalLayout parse_layout_json(std::string_view text) {
    const auto j = parse_json(text, "canonical layout");
    try {
        return {Size{j.at("width").get<int>(), j.at("height").get<int>()}, landmarks_from(j),
                j.value("version", 1)};
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::decode, std::string("canonical layout: ") + e.what());
    }
}

std::string layout_to_json(const CanonicalLayout& layout) {
    nlohmann::json j;
    j["layout_id"] = layout.reference().layout_id();
    j["version"] = layout.version();
    j["width"] = layout.size().width;
    j["height"] = layout.size().height;
    j["points"] = points_json(layout.reference());
    return j.dump(1);
}

CanonicalLayout read_layout(const std::filesystem::path& path) { return parse_layout_json(slurp(path)); }

void write_layout(const std::filesystem::path& path, const CanonicalLayout& layout) {
    dump(path, layout_to_json(layout));
}

}  // namespace maskforge
