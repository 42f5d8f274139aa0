#include "maskforge/parsing.hpp"

#include <nlohmann/json.hpp>

#include "maskforge/png_io.hpp"

namespace maskforge {

int LabelConfig::id(std::string_view name) const {
    const auto it = ids.find(name);
    if (it == ids.end()) {
        throw Error(ErrorCode::not_found, "unknown parsing label '" + std::string(name) + "'");
    }
    return it->second;
}

LabelSet LabelConfig::set_of(const std::vector<std::string>& names) const {
    LabelSet set{};
    for (const auto& name : names) {
        const auto it = ids.find(name);
        if (it != ids.end() && it->second >= 0 && it->second < 256) {
            set[static_cast<std::size_t>(it->second)] = true;
        }
    }
    return set;
}

LabelConfig celebamask_hq_labels() {
    LabelConfig config;
    const char* names[] = {"background", "skin", "nose", "eye_g", "l_eye", "r_eye", "l_brow",
                           "r_brow", "l_ear", "r_ear", "mouth", "u_lip", "l_lip", "hair",
                           "hat", "ear_r", "neck_l", "neck", "cloth"};
    int id = 0;
    for (const char* n : names) {
        config.ids.emplace(n, id++);
    }
    return config;
}

LabelConfig parse_label_config(std::string_view json_text) {
    LabelConfig config;
    try {
        const auto j = nlohmann::json::parse(json_text);
        for (const auto& [name, value] : j.at("labels").items()) {
            const int v = value.get<int>();
            if (v < 0 || v > 255) {
                throw Error(ErrorCode::decode, "label id out of 8-bit range: " + name);
            }
            config.ids[name] = v;
        }
        auto group = [&](const char* key, std::vector<std::string>& out) {
            if (j.contains(key)) {
                out = j.at(key).get<std::vector<std::string>>();
            }
        };
        group("eye", config.eye);
        group("brow", config.brow);
        group("eye_region", config.eye_region);
        group("face", config.face);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::decode, std::string("label config: ") + e.what());
    }
    return config;
}

LabelConfig read_label_config(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return parse_label_config(std::string(bytes.begin(), bytes.end()));
}

std::string label_config_to_json(const LabelConfig& config) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json labels;
    std::vector<std::pair<int, std::string>> by_id;
    for (const auto& [name, id] : config.ids) {
        by_id.emplace_back(id, name);
    }
    std::sort(by_id.begin(), by_id.end());
    for (const auto& [id, name] : by_id) {
        labels[name] = id;
    }
    j["labels"] = labels;
    j["eye"] = config.eye;
    j["brow"] = config.brow;
    j["eye_region"] = config.eye_region;
    j["face"] = config.face;
    return j.dump(2);
}

bool contains_any(const LabelMap& labels, const LabelSet& set) {
    for (auto v : labels.pixels()) {
        if (set[v]) {
            return true;
        }
    }
    return false;
}

}  // namespace maskforge
