#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "maskforge/landmarks.hpp"
#include "maskforge/mask_extract.hpp"
#include "maskforge/parsing.hpp"
#include "maskforge/synth.hpp"

namespace maskforge::tooling {

/// Default working side of the canonical frame for the tools.
inline constexpr int kDefaultCanonSide = 512;

/// $MASKFORGE_ASSETS, else the source tree's assets directory.
std::filesystem::path asset_dir();

/// Reads `path`, else <assets>/canonical_ibug68.json, else the built-in
/// layout; the result is rescaled to a square frame of `side` pixels.
CanonicalLayout load_canon(const std::optional<std::filesystem::path>& path, int side);

/// Reads `dir`, else <assets>/styles, else builds the procedural library.
StyleLibrary load_library(const std::optional<std::filesystem::path>& dir, const CanonicalLayout& canon);

LabelConfig load_labels(const std::optional<std::filesystem::path>& path);

/// Canonical layout matching a square mask of another resolution.
CanonicalLayout canon_for_mask(const CanonicalLayout& canon, Size mask_size);

/// Routes spdlog to stderr at the level named by $MASKFORGE_LOG (default warn).
void configure_logging();

/// Skin tones, cluster populations and timing of an extraction.
nlohmann::json extraction_stats(const EyeExtraction& ex, double elapsed_ms);

std::string hex_color(const Rgb& c);

nlohmann::json style_json(const MakeupStyle& style);
/// Inverse of style_json; colours are "#rrggbb" or [r, g, b] in [0,1].
MakeupStyle style_from_json(const nlohmann::json& j);

/// Overrides fields present in `j` ({k, s, seed, max_iters, tol, components, per_eye, roi_margin}).
ExtractOptions extract_options_from_json(const nlohmann::json& j, ExtractOptions base = {});

/// Comma separated region names ("eyes" expands to eyeshadow and eyeliner); empty means all.
RegionSet parse_regions(const std::string& list);

}  // namespace maskforge::tooling
