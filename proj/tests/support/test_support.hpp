#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "maskforge/image.hpp"
#include "maskforge/landmarks.hpp"
#include "maskforge/random.hpp"

namespace maskforge::fixtures {

inline RgbaMask random_mask(Size size, std::uint64_t seed) {
    Rng rng(seed);
    RgbaMask m(size);
    for (auto& p : m.pixels()) {
        p = {rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
    }
    return m;
}

inline ImageRgb random_image(Size size, std::uint64_t seed) {
    Rng rng(seed);
    ImageRgb img(size);
    for (auto& p : img.pixels()) {
        p = {rng.uniform(), rng.uniform(), rng.uniform()};
    }
    return img;
}

inline double max_abs_diff(const ImageRgb& a, const ImageRgb& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.pixel_count(); ++i) {
        d = std::max({d, std::abs(a[i].r - b[i].r), std::abs(a[i].g - b[i].g), std::abs(a[i].b - b[i].b)});
    }
    return d;
}

/// Landmarks of `canon` pushed through an affine map.
template <typename F>
LandmarkSet mapped(const LandmarkSet& lm, F&& f) {
    std::vector<Point> pts;
    for (const Point& p : lm.points()) {
        pts.push_back(f(p));
    }
    return LandmarkSet(lm.layout_id(), pts);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("maskforge_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace maskforge::fixtures
