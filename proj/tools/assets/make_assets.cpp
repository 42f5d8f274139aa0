// Regenerates the shipped assets: canonical layout, parsing labels and the
// default style library at 1024x1024.

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "maskforge/landmarks.hpp"
#include "maskforge/parsing.hpp"
#include "maskforge/synth.hpp"

int main(int argc, char** argv) {
    namespace fs = std::filesystem;
    if (argc != 2) {
        std::fprintf(stderr, "usage: %s <asset-dir>\n", argv[0]);
        return 1;
    }
    try {
        const fs::path dir = argv[1];
        fs::create_directories(dir);
        const maskforge::CanonicalLayout canon = maskforge::standard_layout(1024);
        maskforge::write_layout(dir / "canonical_ibug68.json", canon);
        std::ofstream(dir / "parsing_labels.json") << maskforge::label_config_to_json(maskforge::celebamask_hq_labels())
                                                   << '\n';
        const maskforge::StyleLibrary lib = maskforge::make_default_library(canon);
        maskforge::save_style_library(lib, dir / "styles");
        std::printf("wrote %zu templates to %s\n", lib.templates.size(), (dir / "styles").c_str());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "make_assets: %s\n", e.what());
        return 2;
    }
    return 0;
}
