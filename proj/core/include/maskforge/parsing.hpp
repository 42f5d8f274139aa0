#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "maskforge/image.hpp"

namespace maskforge {

/// Lookup table over 8-bit labels.
using LabelSet = std::array<bool, 256>;

/// Name <-> id mapping for face-parsing PNGs plus the label groups the
/// pipeline cares about. Defaults follow CelebAMask-HQ.
struct LabelConfig {
    std::map<std::string, int, std::less<>> ids;
    std::vector<std::string> eye{"l_eye", "r_eye"};
    std::vector<std::string> brow{"l_brow", "r_brow"};
    /// Where extracted eye makeup may live (after the periocular crop).
    std::vector<std::string> eye_region{"skin"};
    /// Where makeup may be applied on a target face.
    std::vector<std::string> face{"skin", "nose", "u_lip", "l_lip", "l_brow", "r_brow"};

    int id(std::string_view name) const;
    /// Unknown names are ignored so configs can list optional labels
    /// (e.g. an "eyelid" class some parsers emit).
    LabelSet set_of(const std::vector<std::string>& names) const;
};

LabelConfig celebamask_hq_labels();

/// Sidecar JSON: {"labels": {"skin": 1, ...}, "eye": [...], "brow": [...],
/// "eye_region": [...], "face": [...]}; groups are optional.
LabelConfig parse_label_config(std::string_view json_text);
LabelConfig read_label_config(const std::filesystem::path& path);
std::string label_config_to_json(const LabelConfig& config);

bool contains_any(const LabelMap& labels, const LabelSet& set);

}  // namespace maskforge
