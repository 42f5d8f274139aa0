#include "maskforge/synth.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "maskforge/color.hpp"
#include "maskforge/geometry.hpp"
#include "maskforge/png_io.hpp"
#include "maskforge/random.hpp"
#include "raster.hpp"

namespace maskforge {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view to_string(MakeupRegion region) {
    switch (region) {
        case MakeupRegion::blush: return "blush";
        case MakeupRegion::eyeshadow: return "eyeshadow";
        case MakeupRegion::eyeliner: return "eyeliner";
        case MakeupRegion::lipstick: return "lipstick";
    }
    return "?";
}

MakeupRegion parse_makeup_region(std::string_view name) {
    for (auto r : kAllRegions) {
        if (to_string(r) == name) {
            return r;
        }
    }
    if (name == "cheeks" || name == "cheek") {
        return MakeupRegion::blush;
    }
    if (name == "lips" || name == "lip") {
        return MakeupRegion::lipstick;
    }
    throw Error(ErrorCode::invalid_argument, "unknown makeup region '" + std::string(name) + "'");
}

std::string_view to_string(Finish finish) {
    switch (finish) {
        case Finish::matte: return "matte";
        case Finish::gloss: return "gloss";
        case Finish::shimmer: return "shimmer";
    }
    return "?";
}

Finish parse_finish(std::string_view name) {
    for (auto f : {Finish::matte, Finish::gloss, Finish::shimmer}) {
        if (to_string(f) == name) {
            return f;
        }
    }
    throw Error(ErrorCode::invalid_argument, "unknown finish '" + std::string(name) + "'");
}

const ShapeTemplate* StyleLibrary::find(std::string_view id) const {
    for (const auto& t : templates) {
        if (t.id == id) {
            return &t;
        }
    }
    return nullptr;
}

std::vector<const ShapeTemplate*> StyleLibrary::templates_for(MakeupRegion region) const {
    std::vector<const ShapeTemplate*> out;
    for (const auto& t : templates) {
        if (t.region == region) {
            out.push_back(&t);
        }
    }
    return out;
}

const std::vector<Rgb>& StyleLibrary::palette_for(MakeupRegion region) const {
    if (auto it = palettes.find(to_string(region)); it != palettes.end() && !it->second.empty()) {
        return it->second;
    }
    if (auto it = palettes.find("default"); it != palettes.end() && !it->second.empty()) {
        return it->second;
    }
    throw Error(ErrorCode::invalid_argument, "no palette for region " + std::string(to_string(region)));
}

std::vector<Finish> StyleLibrary::finishes_for(MakeupRegion region) const {
    if (auto it = finishes.find(to_string(region)); it != finishes.end() && !it->second.empty()) {
        return it->second;
    }
    return {Finish::matte, Finish::gloss, Finish::shimmer};
}

Size StyleLibrary::frame() const {
    if (templates.empty()) {
        return {};
    }
    return templates.front().coverage.size();
}

StyleLibrary StyleLibrary::rescaled_to(Size frame) const {
    StyleLibrary out = *this;
    for (auto& t : out.templates) {
        const Size from = t.coverage.size();
        if (from == frame) {
            continue;
        }
        // Maps pixel-centre extremes onto each other, matching CanonicalLayout::scaled_to.
        const double sx = from.width > 1 ? (frame.width - 1.0) / (from.width - 1.0) : 1.0;
        const double sy = from.height > 1 ? (frame.height - 1.0) / (from.height - 1.0) : 1.0;
        AlphaMap resized(frame);
        for (int y = 0; y < frame.height; ++y) {
            for (int x = 0; x < frame.width; ++x) {
                resized.at(x, y) = sample_zero(t.coverage, x / sx, y / sy);
            }
        }
        t.coverage = std::move(resized);
    }
    return out;
}

namespace {

Rgb hex_color(std::string_view hex) {
    if (hex.size() != 7 || hex[0] != '#') {
        throw Error(ErrorCode::decode, "bad colour '" + std::string(hex) + "', expected #RRGGBB");
    }
    const auto byte = [&](int i) {
        return std::stoi(std::string(hex.substr(1 + 2 * i, 2)), nullptr, 16) / 255.0;
    };
    return {byte(0), byte(1), byte(2)};
}

std::string hex_string(const Rgb& c) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", quantize(c.r), quantize(c.g), quantize(c.b));
    return buf;
}

std::vector<Point> group_points(const LandmarkSet& lm, std::string_view group) {
    std::vector<Point> out;
    for (int i : lm.schema().group(group)) {
        out.push_back(lm[static_cast<std::size_t>(i)]);
    }
    return out;
}

Point mean_of(std::span<const Point> pts) {
    Point c;
    for (const auto& p : pts) {
        c = c + p;
    }
    return (1.0 / static_cast<double>(pts.size())) * c;
}

/// Coverage *= (1 - polygon), used to keep eye templates off the eyeball.
void cut_polygon(AlphaMap& cov, std::span<const Point> poly, double feather) {
    AlphaMap hole(cov.size());
    raster::fill_polygon(hole, poly, feather);
    for (std::size_t i = 0; i < cov.pixel_count(); ++i) {
        cov[i] *= 1.0 - hole[i];
    }
}

struct EyeGeometry {
    std::vector<Point> poly;  // 6 points, outer corner first
    Point centre;
    double width = 0.0;
    double out = 1.0;  // +1 when the outer corner lies at larger x
    std::vector<Point> upper;  // outer corner -> inner corner along the upper lid
    std::vector<Point> lower;  // inner corner -> outer corner along the lower lid
};

EyeGeometry eye_geometry(const LandmarkSet& lm, bool image_left) {
    // ibug68: image-left eye 36 (outer) .. 39 (inner); image-right eye 42 (inner) .. 45 (outer).
    EyeGeometry g;
    const auto pts = group_points(lm, image_left ? "eye_left" : "eye_right");
    g.centre = mean_of(pts);
    if (image_left) {
        g.poly = pts;
        g.upper = {pts[0], pts[1], pts[2], pts[3]};
        g.lower = {pts[3], pts[4], pts[5], pts[0]};
        g.out = -1.0;
    } else {
        g.poly = {pts[3], pts[4], pts[5], pts[0], pts[1], pts[2]};
        g.upper = {pts[3], pts[2], pts[1], pts[0]};
        g.lower = {pts[0], pts[5], pts[4], pts[3]};
        g.out = 1.0;
    }
    g.width = distance(g.upper.front(), g.upper.back());
    return g;
}

std::vector<Point> lifted(std::span<const Point> pts, double dy) {
    std::vector<Point> out(pts.begin(), pts.end());
    for (auto& p : out) {
        p.y -= dy;
    }
    return out;
}

ShapeTemplate make_template(std::string id, MakeupRegion region, AlphaMap cov) {
    for (auto& v : cov.pixels()) {
        v = std::clamp(v, 0.0, 1.0);
    }
    return {std::move(id), region, std::move(cov)};
}

void add_eyeshadow(StyleLibrary& lib, const LandmarkSet& lm, Size frame) {
    const double deg = std::numbers::pi / 180.0;
    const auto build = [&](auto&& shape) {
        AlphaMap cov(frame);
        for (bool left : {true, false}) {
            const EyeGeometry g = eye_geometry(lm, left);
            shape(cov, g);
            cut_polygon(cov, g.poly, std::max(1.0, g.width * 0.02));
        }
        return cov;
    };
    lib.templates.push_back(make_template("eyeshadow_lid", MakeupRegion::eyeshadow, build([](AlphaMap& c, const EyeGeometry& g) {
        raster::fill_ellipse(c, g.centre + Point{0.0, -0.22 * g.width}, 0.68 * g.width, 0.33 * g.width, 0.0, 0.45);
    })));
    lib.templates.push_back(make_template("eyeshadow_smoky", MakeupRegion::eyeshadow, build([](AlphaMap& c, const EyeGeometry& g) {
        raster::fill_ellipse(c, g.centre + Point{0.05 * g.out * g.width, -0.08 * g.width}, 0.8 * g.width,
                             0.42 * g.width, 0.0, 0.3);
    })));
    lib.templates.push_back(make_template("eyeshadow_wing", MakeupRegion::eyeshadow, build([&](AlphaMap& c, const EyeGeometry& g) {
        raster::fill_ellipse(c, g.centre + Point{0.25 * g.out * g.width, -0.25 * g.width}, 0.62 * g.width,
                             0.26 * g.width, -18.0 * deg * g.out, 0.4);
    })));
    lib.templates.push_back(make_template("eyeshadow_inner", MakeupRegion::eyeshadow, build([](AlphaMap& c, const EyeGeometry& g) {
        raster::fill_ellipse(c, g.centre + Point{0.0, -0.22 * g.width}, 0.68 * g.width, 0.33 * g.width, 0.0, 0.45, 0.5);
        raster::fill_ellipse(c, g.centre + Point{-0.3 * g.out * g.width, -0.12 * g.width}, 0.4 * g.width,
                             0.28 * g.width, 0.0, 0.35);
    })));
}

void add_eyeliner(StyleLibrary& lib, const LandmarkSet& lm, Size frame) {
    const auto build = [&](double thick, bool wing, bool lower) {
        AlphaMap cov(frame);
        for (bool left : {true, false}) {
            const EyeGeometry g = eye_geometry(lm, left);
            const double t = thick * g.width;
            const auto upper = lifted(g.upper, 0.4 * t);
            // Thickest at the outer corner, tapering toward the inner corner.
            raster::stroke(cov, upper, [t](double s) { return t * (1.0 - 0.6 * s); });
            if (wing) {
                const Point a = upper.front();
                const std::vector<Point> tail = {Point{a.x - 0.02 * g.out * g.width, a.y + 0.01 * g.width},
                                                 a + Point{0.28 * g.out * g.width, -0.12 * g.width}};
                raster::stroke(cov, tail, [t](double s) { return t * (1.0 - 0.8 * s); });
            }
            if (lower) {
                const double tl = 0.035 * g.width;
                raster::stroke(cov, lifted(g.lower, -0.4 * tl), [tl](double) { return tl; });
            }
            cut_polygon(cov, g.poly, 1.0);
        }
        return cov;
    };
    lib.templates.push_back(make_template("eyeliner_thin", MakeupRegion::eyeliner, build(0.05, false, false)));
    lib.templates.push_back(make_template("eyeliner_wing", MakeupRegion::eyeliner, build(0.06, true, false)));
    lib.templates.push_back(make_template("eyeliner_bold", MakeupRegion::eyeliner, build(0.09, false, false)));
    lib.templates.push_back(make_template("eyeliner_full", MakeupRegion::eyeliner, build(0.05, false, true)));
}

void add_blush(StyleLibrary& lib, const LandmarkSet& lm, Size frame) {
    const double deg = std::numbers::pi / 180.0;
    const double iod = distance(lm.group_centroid("eye_left"), lm.group_centroid("eye_right"));
    const auto build = [&](double dx, double dy, double rx, double ry, double angle, double core) {
        AlphaMap cov(frame);
        const Point anchors[2] = {cheek_anchor_left(lm), cheek_anchor_right(lm)};
        for (int side = 0; side < 2; ++side) {
            const double out = side == 0 ? -1.0 : 1.0;
            raster::fill_ellipse(cov, anchors[side] + Point{dx * out * iod, dy * iod}, rx * iod, ry * iod,
                                 angle * deg * out, core);
        }
        return cov;
    };
    lib.templates.push_back(make_template("blush_round", MakeupRegion::blush, build(0.0, 0.0, 0.3, 0.3, 0.0, 0.1)));
    lib.templates.push_back(make_template("blush_lifted", MakeupRegion::blush, build(0.08, -0.05, 0.34, 0.18, -25.0, 0.2)));
    lib.templates.push_back(make_template("blush_apple", MakeupRegion::blush, build(-0.05, 0.0, 0.2, 0.2, 0.0, 0.3)));
    lib.templates.push_back(make_template("blush_contour", MakeupRegion::blush, build(0.15, 0.1, 0.35, 0.1, 20.0, 0.2)));
}

void add_lipstick(StyleLibrary& lib, const LandmarkSet& lm, Size frame) {
    const auto outer = group_points(lm, "lips_outer");
    const auto inner = group_points(lm, "lips_inner");
    const Point centre = mean_of(outer);
    const double scale = distance(lm.group_centroid("eye_left"), lm.group_centroid("eye_right")) / 320.0;
    const auto build = [&](std::span<const Point> poly, double feather) {
        AlphaMap cov(frame);
        raster::fill_polygon(cov, poly, feather);
        cut_polygon(cov, inner, feather);
        return cov;
    };
    lib.templates.push_back(make_template("lipstick_full", MakeupRegion::lipstick, build(outer, 1.5 * scale)));

    AlphaMap ombre = build(outer, 1.5 * scale);
    const raster::Box box = raster::bounds(outer, 0.0, frame);
    const double hx = std::max(1.0, 0.5 * (box.x1 - box.x0));
    const double hy = std::max(1.0, 0.5 * (box.y1 - box.y0));
    for (int y = 0; y < frame.height; ++y) {
        for (int x = 0; x < frame.width; ++x) {
            const double u = (x - centre.x) / hx;
            const double v = (y - centre.y) / hy;
            ombre.at(x, y) *= std::clamp(1.0 - 0.5 * std::sqrt(u * u + v * v), 0.5, 1.0);
        }
    }
    lib.templates.push_back(make_template("lipstick_ombre", MakeupRegion::lipstick, std::move(ombre)));
    lib.templates.push_back(make_template("lipstick_overline", MakeupRegion::lipstick,
                                          build(raster::scaled_about(outer, centre, 1.08), 1.5 * scale)));
    AlphaMap tint = build(outer, 4.0 * scale);
    for (auto& v : tint.pixels()) {
        v *= 0.7;
    }
    lib.templates.push_back(make_template("lipstick_tint", MakeupRegion::lipstick, std::move(tint)));
}

}  // namespace

StyleLibrary make_default_library(const CanonicalLayout& canon) {
    StyleLibrary lib;
    const LandmarkSet& lm = canon.reference();
    add_blush(lib, lm, canon.size());
    add_eyeshadow(lib, lm, canon.size());
    add_eyeliner(lib, lm, canon.size());
    add_lipstick(lib, lm, canon.size());
    lib.palettes["eyeshadow"] = {{0.45, 0.20, 0.40}, {0.20, 0.30, 0.60}, {0.10, 0.45, 0.35}, {0.80, 0.62, 0.25},
                                 {0.55, 0.35, 0.20}, {0.80, 0.45, 0.55}, {0.15, 0.50, 0.55}, {0.55, 0.35, 0.75}};
    lib.palettes["eyeliner"] = {{0.05, 0.05, 0.06}, {0.25, 0.15, 0.10}, {0.10, 0.12, 0.35}, {0.30, 0.10, 0.25}};
    lib.palettes["blush"] = {{0.90, 0.45, 0.50}, {0.95, 0.55, 0.45}, {0.80, 0.35, 0.40}, {0.85, 0.50, 0.60}};
    lib.palettes["lipstick"] = {{0.75, 0.08, 0.15}, {0.55, 0.10, 0.30}, {0.95, 0.45, 0.40},
                                {0.75, 0.50, 0.45}, {0.45, 0.12, 0.25}, {0.90, 0.40, 0.60}};
    lib.finishes["eyeliner"] = {Finish::matte, Finish::gloss};
    return lib;
}

void save_style_library(const StyleLibrary& lib, const fs::path& dir) {
    fs::create_directories(dir);
    json j;
    j["version"] = 1;
    j["seed"] = lib.seed;
    j["opacity_range"] = {lib.opacity_min, lib.opacity_max};
    j["finish_params"] = {{"gloss_strength", lib.finish_params.gloss_strength},
                          {"gloss_band", lib.finish_params.gloss_band},
                          {"shimmer_density", lib.finish_params.shimmer_density},
                          {"shimmer_boost", lib.finish_params.shimmer_boost}};
    json templates = json::array();
    for (const auto& t : lib.templates) {
        const std::string file = t.id + ".png";
        write_png(dir / file, t.coverage);
        templates.push_back({{"id", t.id}, {"region", to_string(t.region)}, {"file", file}});
    }
    j["templates"] = templates;
    json palettes = json::object();
    for (const auto& [name, colors] : lib.palettes) {
        json arr = json::array();
        for (const auto& c : colors) {
            arr.push_back(hex_string(c));
        }
        palettes[name] = arr;
    }
    j["palettes"] = palettes;
    json finishes = json::object();
    for (const auto& [name, list] : lib.finishes) {
        json arr = json::array();
        for (auto f : list) {
            arr.push_back(to_string(f));
        }
        finishes[name] = arr;
    }
    j["finishes"] = finishes;
    std::ofstream(dir / "library.json") << j.dump(2) << '\n';
}

namespace {

AlphaMap read_coverage(const fs::path& file) {
    const RawImage raw = decode_png(read_file(file));
    AlphaMap cov(raw.width, raw.height);
    for (std::size_t i = 0; i < cov.pixel_count(); ++i) {
        // Colour templates contribute their first channel.
        cov[i] = raw.data[i * static_cast<std::size_t>(raw.channels)] / 255.0;
    }
    return cov;
}

}  // namespace

StyleLibrary load_style_library(const fs::path& dir) {
    const fs::path index = dir / "library.json";
    if (!fs::exists(index)) {
        throw Error(ErrorCode::io, "style library index not found: " + index.string());
    }
    StyleLibrary lib;
    std::set<std::string> listed;
    try {
        std::ifstream in(index);
        const json j = json::parse(in);
        lib.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("opacity_range")) {
            lib.opacity_min = j["opacity_range"].at(0).get<double>();
            lib.opacity_max = j["opacity_range"].at(1).get<double>();
        }
        if (j.contains("finish_params")) {
            const auto& fp = j["finish_params"];
            lib.finish_params.gloss_strength = fp.value("gloss_strength", lib.finish_params.gloss_strength);
            lib.finish_params.gloss_band = fp.value("gloss_band", lib.finish_params.gloss_band);
            lib.finish_params.shimmer_density = fp.value("shimmer_density", lib.finish_params.shimmer_density);
            lib.finish_params.shimmer_boost = fp.value("shimmer_boost", lib.finish_params.shimmer_boost);
        }
        const json templates = j.value("templates", json::array());
        const json palettes = j.value("palettes", json::object());
        const json finishes = j.value("finishes", json::object());
        for (const auto& t : templates) {
            const std::string id = t.at("id").get<std::string>();
            const std::string file = t.value("file", id + ".png");
            listed.insert(file);
            lib.templates.push_back(
                {id, parse_makeup_region(t.at("region").get<std::string>()), read_coverage(dir / file)});
        }
        for (const auto& [name, arr] : palettes.items()) {
            auto& colors = lib.palettes[name];
            for (const auto& c : arr) {
                colors.push_back(hex_color(c.get<std::string>()));
            }
        }
        for (const auto& [name, arr] : finishes.items()) {
            auto& list = lib.finishes[name];
            for (const auto& f : arr) {
                list.push_back(parse_finish(f.get<std::string>()));
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::decode, "malformed library.json: " + std::string(e.what()));
    }
    // Unlisted PNGs named <region>_<anything>.png join the library.
    std::vector<fs::path> extra;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (entry.path().extension() == ".png" && !listed.contains(name)) {
            extra.push_back(entry.path());
        }
    }
    std::sort(extra.begin(), extra.end());
    for (const auto& path : extra) {
        const std::string stem = path.stem().string();
        const auto us = stem.find('_');
        try {
            const MakeupRegion region = parse_makeup_region(stem.substr(0, us));
            lib.templates.push_back({stem, region, read_coverage(path)});
        } catch (const Error&) {
            spdlog::warn("ignoring {}: file name does not start with a region name", path.string());
        }
    }
    if (lib.templates.empty()) {
        throw Error(ErrorCode::invalid_argument, "style library has no templates: " + dir.string());
    }
    const Size frame = lib.frame();
    for (const auto& t : lib.templates) {
        if (t.coverage.size() != frame) {
            throw Error(ErrorCode::dimension_mismatch, "template " + t.id + " is " + to_string(t.coverage.size()) +
                                                           ", expected " + to_string(frame));
        }
    }
    return lib;
}

MakeupStyle sample_style(const StyleLibrary& lib, std::uint64_t seed, RegionSet regions) {
    if (lib.templates.empty()) {
        throw Error(ErrorCode::invalid_argument, "cannot sample from an empty style library");
    }
    if (!(lib.opacity_min > 0.0 && lib.opacity_min <= lib.opacity_max && lib.opacity_max <= 1.0)) {
        throw Error(ErrorCode::invalid_argument, "opacity range must satisfy 0 < min <= max <= 1");
    }
    Rng rng(mix_seed(lib.seed, seed));
    MakeupStyle style;
    style.seed = seed;
    for (auto region : kAllRegions) {
        const auto candidates = lib.templates_for(region);
        if (candidates.empty()) {
            continue;
        }
        const auto& palette = lib.palette_for(region);
        const auto finishes = lib.finishes_for(region);
        RegionStyle rs;
        rs.template_id = candidates[rng.below(candidates.size())]->id;
        rs.color = palette[rng.below(palette.size())];
        rs.opacity = rng.uniform(lib.opacity_min, lib.opacity_max);
        rs.finish = finishes[rng.below(finishes.size())];
        if (regions.has(region)) {
            style.regions.emplace(region, std::move(rs));
        }
    }
    if (style.regions.empty()) {
        throw Error(ErrorCode::invalid_argument, "style library has no templates for the requested regions");
    }
    return style;
}

namespace {

/// Coverage-weighted row statistics locate the gloss highlight ridge.
AlphaMap gloss_profile(const AlphaMap& cov, double band) {
    double w = 0.0;
    double m1 = 0.0;
    double m2 = 0.0;
    for (int y = 0; y < cov.height(); ++y) {
        for (int x = 0; x < cov.width(); ++x) {
            const double c = cov.at(x, y);
            w += c;
            m1 += c * y;
            m2 += c * y * y;
        }
    }
    AlphaMap h(cov.size());
    if (w <= 0.0) {
        return h;
    }
    const double mean = m1 / w;
    const double sd = std::sqrt(std::max(m2 / w - mean * mean, 1.0));
    const double width = band * sd;
    for (int y = 0; y < cov.height(); ++y) {
        const double t = (y - mean) / width;
        const double v = std::exp(-t * t);
        for (int x = 0; x < cov.width(); ++x) {
            h.at(x, y) = v;
        }
    }
    return h;
}

bool sparkles(std::uint64_t seed, MakeupRegion region, std::size_t index, double density) {
    const std::uint64_t h = mix_seed(mix_seed(seed, static_cast<std::uint64_t>(region) + 1), index);
    return static_cast<double>(h >> 11) * 0x1.0p-53 < density;
}

}  // namespace

RgbaMask render_style_mask(const MakeupStyle& style, const StyleLibrary& lib, const CanonicalLayout& canon) {
    if (style.regions.empty()) {
        throw Error(ErrorCode::invalid_argument, "style has no regions");
    }
    const Size frame = canon.size();
    RgbaMask out(frame);
    const FinishParams& fp = lib.finish_params;
    for (auto region : kAllRegions) {
        const auto it = style.regions.find(region);
        if (it == style.regions.end()) {
            continue;
        }
        const RegionStyle& rs = it->second;
        if (!(rs.opacity > 0.0 && rs.opacity <= 1.0)) {
            throw Error(ErrorCode::invalid_argument, "opacity must lie in (0, 1]");
        }
        const ShapeTemplate* t = lib.find(rs.template_id);
        if (t == nullptr) {
            throw Error(ErrorCode::not_found, "unknown template id '" + rs.template_id + "'");
        }
        AlphaMap coverage;
        const AlphaMap* cov = &t->coverage;
        if (t->coverage.size() != frame) {
            StyleLibrary single;
            single.templates.push_back(*t);
            coverage = std::move(single.rescaled_to(frame).templates.front().coverage);
            cov = &coverage;
        }
        AlphaMap ridge;
        Lab base_lab{};
        if (rs.finish == Finish::gloss) {
            ridge = gloss_profile(*cov, fp.gloss_band);
            base_lab = srgb_to_lab(rs.color);
        }
        const Rgb white{1.0, 1.0, 1.0};
        for (std::size_t i = 0; i < out.pixel_count(); ++i) {
            const double a = (*cov)[i] * rs.opacity;
            if (a <= 0.0) {
                continue;
            }
            Rgb c = rs.color;
            if (rs.finish == Finish::gloss) {
                Lab l = base_lab;
                l.l = std::min(100.0, l.l + 100.0 * fp.gloss_strength * ridge[i]);
                c = lab_to_srgb(l);
            } else if (rs.finish == Finish::shimmer && sparkles(style.seed, region, i, fp.shimmer_density)) {
                const double m = fp.shimmer_boost;
                c = {c.r + m * (white.r - c.r), c.g + m * (white.g - c.g), c.b + m * (white.b - c.b)};
            }
            out[i] = over(Rgba{c.r, c.g, c.b, a}, out[i]);
        }
    }
    return out;
}

GeneratedPair generate_pair(const ImageRgb& face, const LandmarkSet& face_landmarks, const RgbaMask& style_mask,
                            const CanonicalLayout& canon, const WarpOptions& warp) {
    if (style_mask.size() != canon.size()) {
        throw Error(ErrorCode::dimension_mismatch, "style mask " + to_string(style_mask.size()) +
                                                       " does not match canonical frame " + to_string(canon.size()));
    }
    if (face_landmarks.size() != canon.reference().size()) {
        throw Error(ErrorCode::invalid_argument, "face landmarks do not follow the canonical layout");
    }
    // Pull-back from face pixels to canonical coordinates.
    const TpsWarp inverse = tps_fit(face_landmarks.points(), canon.reference().points(), warp.regularization);
    GeneratedPair pair;
    pair.mask = tps_pull_back(style_mask, inverse, face.size(), warp.grid_step);
    pair.after = composite_mask(pair.mask, face);
    return pair;
}

AlphaMap build_average_alpha(std::span<const RgbaMask> masks) {
    if (masks.empty()) {
        throw Error(ErrorCode::invalid_argument, "average alpha needs at least one mask");
    }
    AlphaMap mean(masks.front().size());
    double n = 0.0;
    for (const auto& m : masks) {
        require_same_size(m, masks.front(), "build_average_alpha");
        n += 1.0;
        for (std::size_t i = 0; i < mean.pixel_count(); ++i) {
            mean[i] += (m[i].a - mean[i]) / n;
        }
    }
    return mean;
}

std::vector<FaceEntry> read_faces_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::io, "cannot open faces manifest " + path.string());
    }
    const fs::path base = path.parent_path();
    const auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
    std::vector<FaceEntry> faces;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            const json j = json::parse(line);
            FaceEntry e;
            e.image = resolve(j.at("image").get<std::string>());
            e.landmarks = resolve(j.at("landmarks").get<std::string>());
            if (j.contains("parsing") && !j["parsing"].is_null()) {
                e.parsing = resolve(j["parsing"].get<std::string>());
            }
            faces.push_back(std::move(e));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::decode,
                        path.string() + ":" + std::to_string(line_no) + ": " + std::string(e.what()));
        }
    }
    return faces;
}

void write_faces_manifest(const fs::path& path, std::span<const FaceEntry> faces) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::io, "cannot write faces manifest " + path.string());
    }
    for (const auto& f : faces) {
        json j{{"image", f.image.string()}, {"landmarks", f.landmarks.string()}};
        if (f.parsing) {
            j["parsing"] = f.parsing->string();
        }
        out << j.dump() << '\n';
    }
}

std::string dataset_record_json(const DatasetRecord& record) {
    return json{{"face", record.face},
                {"landmarks", record.landmarks},
                {"seed", record.seed},
                {"after_png", record.after_png},
                {"mask_png", record.mask_png}}
        .dump();
}

std::uint64_t pair_seed(std::uint64_t base, std::size_t face_index, std::size_t style_index) {
    return mix_seed(mix_seed(base, face_index), style_index);
}

DatasetResult generate_dataset(std::span<const FaceEntry> faces, const StyleLibrary& lib, const CanonicalLayout& canon,
                               const fs::path& out_dir, const DatasetOptions& options) {
    if (options.styles_per_face < 1) {
        throw Error(ErrorCode::invalid_argument, "styles per face must be at least 1");
    }
    if (faces.empty()) {
        throw Error(ErrorCode::invalid_argument, "faces manifest is empty");
    }
    fs::create_directories(out_dir);
    const StyleLibrary scaled = lib.frame() == canon.size() ? lib : lib.rescaled_to(canon.size());

    struct FaceOutcome {
        std::vector<DatasetRecord> records;
        bool failed = false;
    };
    std::vector<FaceOutcome> outcomes(faces.size());
    // Integer sums of the stored 8-bit alpha keep the average independent of
    // worker scheduling.
    std::vector<std::uint64_t> alpha_sum(static_cast<std::size_t>(canon.size().width) * canon.size().height, 0);
    std::mutex sum_mutex;
    std::atomic<std::size_t> next{0};

    const auto work = [&] {
        std::vector<std::uint64_t> local(alpha_sum.size(), 0);
        for (std::size_t i = next++; i < faces.size(); i = next++) {
            const FaceEntry& entry = faces[i];
            FaceOutcome& outcome = outcomes[i];
            try {
                const ImageRgb face = read_png_rgb(entry.image);
                const LandmarkSet lm = read_landmarks(entry.landmarks);
                char prefix[16];
                std::snprintf(prefix, sizeof prefix, "%04zu_", i);
                const std::string stem = prefix + entry.image.stem().string();
                std::vector<std::uint64_t> face_sum(local.size(), 0);
                for (int j = 0; j < options.styles_per_face; ++j) {
                    const std::uint64_t seed = pair_seed(options.seed, i, static_cast<std::size_t>(j));
                    const MakeupStyle style = sample_style(scaled, seed, options.regions);
                    const RgbaMask style_mask = quantized(render_style_mask(style, scaled, canon));
                    for (std::size_t p = 0; p < face_sum.size(); ++p) {
                        face_sum[p] += quantize(style_mask[p].a);
                    }
                    // The stored GT mask is what the after-image is composed from.
                    const RgbaMask gt = quantized(generate_pair(face, lm, style_mask, canon, options.warp).mask);
                    const ImageRgb after = composite_mask(gt, face);
                    DatasetRecord rec;
                    rec.face = entry.image.string();
                    rec.landmarks = entry.landmarks.string();
                    rec.seed = seed;
                    rec.after_png = stem + "_" + std::to_string(j) + "_after.png";
                    rec.mask_png = stem + "_" + std::to_string(j) + "_mask.png";
                    write_png(out_dir / rec.after_png, after);
                    write_png(out_dir / rec.mask_png, gt);
                    outcome.records.push_back(std::move(rec));
                }
                for (std::size_t p = 0; p < local.size(); ++p) {
                    local[p] += face_sum[p];
                }
            } catch (const Error& e) {
                spdlog::warn("skipping face {} ({}): {}", i, entry.image.string(), e.what());
                outcome.records.clear();
                outcome.failed = true;
            }
        }
        std::lock_guard lock(sum_mutex);
        for (std::size_t p = 0; p < local.size(); ++p) {
            alpha_sum[p] += local[p];
        }
    };

    const int workers = std::max(1, options.workers);
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back(work);
        }
    }

    DatasetResult result;
    for (auto& o : outcomes) {
        result.failed_faces += o.failed ? 1 : 0;
        for (auto& r : o.records) {
            result.records.push_back(std::move(r));
        }
    }
    const double failure_rate = static_cast<double>(result.failed_faces) / static_cast<double>(faces.size());
    if (failure_rate > options.max_failure_rate) {
        throw Error(ErrorCode::io, std::to_string(result.failed_faces) + " of " + std::to_string(faces.size()) +
                                       " faces failed; aborting dataset generation");
    }
    const std::size_t pairs = result.records.size();
    if (pairs > 0) {
        AlphaMap average(canon.size());
        for (std::size_t p = 0; p < alpha_sum.size(); ++p) {
            average[p] = static_cast<double>(alpha_sum[p]) / (255.0 * static_cast<double>(pairs));
        }
        write_png(out_dir / "average_alpha.png", average);
    }
    std::ofstream manifest(out_dir / "manifest.jsonl");
    for (const auto& r : result.records) {
        manifest << dataset_record_json(r) << '\n';
    }
    if (!manifest) {
        throw Error(ErrorCode::io, "failed writing manifest in " + out_dir.string());
    }
    spdlog::info("dataset: {} pairs from {} faces ({} skipped)", pairs, faces.size(), result.failed_faces);
    return result;
}

}  // namespace maskforge
