#include "tooling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <mutex>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#ifndef MASKFORGE_SOURCE_ASSET_DIR
#define MASKFORGE_SOURCE_ASSET_DIR "assets"
#endif

namespace maskforge::tooling {

namespace fs = std::filesystem;

fs::path asset_dir() {
    if (const char* env = std::getenv("MASKFORGE_ASSETS"); env != nullptr && *env != '\0') {
        return env;
    }
    return MASKFORGE_SOURCE_ASSET_DIR;
}

CanonicalLayout load_canon(const std::optional<fs::path>& path, int side) {
    if (side < 16) {
        throw Error(ErrorCode::invalid_argument, "canonical frame side must be at least 16");
    }
    CanonicalLayout base;
    if (path) {
        base = read_layout(*path);
    } else if (const fs::path fallback = asset_dir() / "canonical_ibug68.json"; fs::exists(fallback)) {
        base = read_layout(fallback);
    } else {
        base = standard_layout();
    }
    if (base.size() == Size{side, side}) {
        return base;
    }
    return base.scaled_to(side);
}

StyleLibrary load_library(const std::optional<fs::path>& dir, const CanonicalLayout& canon) {
    StyleLibrary lib;
    if (dir) {
        lib = load_style_library(*dir);
    } else if (const fs::path fallback = asset_dir() / "styles"; fs::exists(fallback / "library.json")) {
        lib = load_style_library(fallback);
    } else {
        spdlog::info("no style library on disk; using the procedural default");
        return make_default_library(canon);
    }
    return lib.frame() == canon.size() ? lib : lib.rescaled_to(canon.size());
}

LabelConfig load_labels(const std::optional<fs::path>& path) {
    return path ? read_label_config(*path) : celebamask_hq_labels();
}

CanonicalLayout canon_for_mask(const CanonicalLayout& canon, Size mask_size) {
    if (mask_size == canon.size()) {
        return canon;
    }
    if (mask_size.width != mask_size.height) {
        throw Error(ErrorCode::dimension_mismatch,
                    "mask " + to_string(mask_size) + " does not match canonical frame " + to_string(canon.size()));
    }
    return canon.scaled_to(mask_size.width);
}

void configure_logging() {
    static std::once_flag once;
    std::call_once(once, [] {
        auto logger = spdlog::stderr_logger_mt("maskforge");
        spdlog::set_default_logger(logger);
        spdlog::set_pattern("[%l] %v");
    });
    spdlog::level::level_enum level = spdlog::level::warn;
    if (const char* env = std::getenv("MASKFORGE_LOG"); env != nullptr && *env != '\0') {
        level = spdlog::level::from_str(env);
    }
    spdlog::set_level(level);
}

std::string hex_color(const Rgb& c) {
    const auto q = [](double v) { return static_cast<int>(std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5)); };
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", q(c.r), q(c.g), q(c.b));
    return buf;
}

nlohmann::json extraction_stats(const EyeExtraction& ex, double elapsed_ms) {
    nlohmann::json tones = nlohmann::json::array();
    nlohmann::json counts = nlohmann::json::array();
    for (std::size_t e = 0; e < 2; ++e) {
        const Lab& t = ex.tones[e].lab;
        tones.push_back({t.l, t.a, t.b});
        counts.push_back(ex.models[e].counts);
    }
    return {{"skin_tone_lab", tones},
            {"cluster_counts", counts},
            {"iterations", {ex.models[0].iterations, ex.models[1].iterations}},
            {"elapsed_ms", elapsed_ms}};
}

namespace {

Rgb colour_from_json(const nlohmann::json& j) {
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s.size() != 7 || s[0] != '#') {
            throw Error(ErrorCode::decode, "colour must be #rrggbb");
        }
        const auto byte = [&](int i) { return std::stoi(s.substr(1 + 2 * i, 2), nullptr, 16) / 255.0; };
        return {byte(0), byte(1), byte(2)};
    }
    if (j.is_array() && j.size() == 3) {
        return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
    }
    throw Error(ErrorCode::decode, "colour must be \"#rrggbb\" or [r, g, b]");
}

}  // namespace

nlohmann::json style_json(const MakeupStyle& style) {
    nlohmann::json regions = nlohmann::json::object();
    for (const auto& [region, rs] : style.regions) {
        regions[std::string(to_string(region))] = {{"template", rs.template_id},
                                                   {"color", hex_color(rs.color)},
                                                   {"rgb", {rs.color.r, rs.color.g, rs.color.b}},
                                                   {"opacity", rs.opacity},
                                                   {"finish", to_string(rs.finish)}};
    }
    return {{"seed", style.seed}, {"regions", regions}};
}

MakeupStyle style_from_json(const nlohmann::json& j) {
    try {
        MakeupStyle style;
        style.seed = j.value("seed", std::uint64_t{0});
        for (const auto& [name, r] : j.at("regions").items()) {
            RegionStyle rs;
            rs.template_id = r.at("template").get<std::string>();
            rs.color = colour_from_json(r.contains("rgb") ? r["rgb"] : r.at("color"));
            rs.opacity = r.value("opacity", 1.0);
            rs.finish = parse_finish(r.value("finish", std::string("matte")));
            style.regions[parse_makeup_region(name)] = rs;
        }
        if (style.regions.empty()) {
            throw Error(ErrorCode::invalid_argument, "style needs at least one region");
        }
        return style;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::decode, std::string("style: ") + e.what());
    }
}

ExtractOptions extract_options_from_json(const nlohmann::json& j, ExtractOptions o) {
    try {
        o.clusters.k = j.value("k", o.clusters.k);
        o.clusters.s = j.value("s", o.clusters.s);
        o.clusters.seed = j.value("seed", o.clusters.seed);
        o.clusters.max_iters = j.value("max_iters", o.clusters.max_iters);
        o.clusters.tol = j.value("tol", o.clusters.tol);
        o.per_eye = j.value("per_eye", o.per_eye);
        o.roi_margin = j.value("roi_margin", o.roi_margin);
        if (j.contains("components")) {
            const auto c = j["components"].get<std::string>();
            if (c == "full") {
                o.components = LabComponents::full;
            } else if (c == "chroma") {
                o.components = LabComponents::chroma;
            } else {
                throw Error(ErrorCode::invalid_argument, "components must be \"full\" or \"chroma\"");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::decode, std::string("params: ") + e.what());
    }
    o.clusters.validate();
    if (!(o.roi_margin > 0.0)) {
        throw Error(ErrorCode::invalid_argument, "roi_margin must be positive");
    }
    return o;
}

RegionSet parse_regions(const std::string& list) {
    if (list.empty() || list == "all") {
        return RegionSet::all();
    }
    RegionSet set;
    std::size_t start = 0;
    while (start <= list.size()) {
        const auto comma = list.find(',', start);
        const std::string name = list.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (name == "eyes") {
            set.add(MakeupRegion::eyeshadow).add(MakeupRegion::eyeliner);
        } else if (!name.empty()) {
            set.add(parse_makeup_region(name));
        }
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    if (set.empty()) {
        throw Error(ErrorCode::invalid_argument, "no regions selected");
    }
    return set;
}

}  // namespace maskforge::tooling
