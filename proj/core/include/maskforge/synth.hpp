#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "maskforge/image.hpp"
#include "maskforge/landmarks.hpp"

namespace maskforge {

/// Makeup regions in back-to-front compositing order.
enum class MakeupRegion { blush, eyeshadow, eyeliner, lipstick };

inline constexpr MakeupRegion kAllRegions[] = {MakeupRegion::blush, MakeupRegion::eyeshadow,
                                               MakeupRegion::eyeliner, MakeupRegion::lipstick};

std::string_view to_string(MakeupRegion region);
MakeupRegion parse_makeup_region(std::string_view name);

enum class Finish { matte, gloss, shimmer };

std::string_view to_string(Finish finish);
Finish parse_finish(std::string_view name);

/// Bit set over MakeupRegion.
class RegionSet {
public:
    constexpr RegionSet() = default;
    static constexpr RegionSet all() { return RegionSet(0b1111u); }
    static constexpr RegionSet eyes() {
        return RegionSet((1u << static_cast<unsigned>(MakeupRegion::eyeshadow)) |
                         (1u << static_cast<unsigned>(MakeupRegion::eyeliner)));
    }
    constexpr RegionSet& add(MakeupRegion r) {
        bits_ |= 1u << static_cast<unsigned>(r);
        return *this;
    }
    constexpr bool has(MakeupRegion r) const { return (bits_ >> static_cast<unsigned>(r)) & 1u; }
    constexpr bool empty() const { return bits_ == 0; }

private:
    constexpr explicit RegionSet(unsigned bits) : bits_(bits) {}
    unsigned bits_ = 0;
};

/// Grayscale coverage map in the canonical frame (the shape's native opacity).
struct ShapeTemplate {
    std::string id;
    MakeupRegion region = MakeupRegion::eyeshadow;
    AlphaMap coverage;
};

struct RegionStyle {
    std::string template_id;
    Rgb color;
    double opacity = 1.0;
    Finish finish = Finish::matte;

    friend bool operator==(const RegionStyle&, const RegionStyle&) = default;
};

struct MakeupStyle {
    std::map<MakeupRegion, RegionStyle> regions;
    std::uint64_t seed = 0;

    friend bool operator==(const MakeupStyle&, const MakeupStyle&) = default;
};

/// Tunables for finishes that the source method leaves unspecified.
struct FinishParams {
    double gloss_strength = 0.25;     // LAB L gain on the ridge, in units of 100
    double gloss_band = 0.35;         // ridge half-width, in coverage row std-devs
    double shimmer_density = 0.02;    // fraction of covered pixels that sparkle
    double shimmer_boost = 0.5;       // sparkle mix toward white
};

class StyleLibrary {
public:
    std::vector<ShapeTemplate> templates;
    /// Keyed by region name ("eyeshadow", ...) or "default".
    std::map<std::string, std::vector<Rgb>, std::less<>> palettes;
    /// Allowed finishes per region name; missing regions allow all three.
    std::map<std::string, std::vector<Finish>, std::less<>> finishes;
    std::uint64_t seed = 0;
    double opacity_min = 0.2;
    double opacity_max = 0.95;
    FinishParams finish_params;

    const ShapeTemplate* find(std::string_view id) const;
    std::vector<const ShapeTemplate*> templates_for(MakeupRegion region) const;
    const std::vector<Rgb>& palette_for(MakeupRegion region) const;
    std::vector<Finish> finishes_for(MakeupRegion region) const;
    Size frame() const;

    /// Copy with every coverage map resampled to `frame`.
    StyleLibrary rescaled_to(Size frame) const;
};

/// Procedural library with four templates per region, laid out on `canon`.
StyleLibrary make_default_library(const CanonicalLayout& canon);

/// Directory layout: library.json + one grayscale PNG per template.
StyleLibrary load_style_library(const std::filesystem::path& dir);
void save_style_library(const StyleLibrary& lib, const std::filesystem::path& dir);

/// Per region: uniform template, palette colour, opacity ~ U(opacity_min,
/// opacity_max) and uniform finish. Every region is drawn so that filtering
/// with `regions` does not perturb the remaining draws.
MakeupStyle sample_style(const StyleLibrary& lib, std::uint64_t seed, RegionSet regions = RegionSet::all());

/// Renders a style into a full-face RGBA mask in the canonical frame.
/// Depends only on the style and library.
RgbaMask render_style_mask(const MakeupStyle& style, const StyleLibrary& lib, const CanonicalLayout& canon);

/// Controls the per-pixel TPS pull-back used by pairing and application.
struct WarpOptions {
    int grid_step = 4;
    double regularization = 0.0;
};

struct GeneratedPair {
    ImageRgb after;
    RgbaMask mask;  // ground-truth mask in the face frame
};

/// Warps a canonical style mask onto a face with a TPS through the landmarks
/// and alpha-blends it.
GeneratedPair generate_pair(const ImageRgb& face, const LandmarkSet& face_landmarks, const RgbaMask& style_mask,
                            const CanonicalLayout& canon, const WarpOptions& warp = {});

/// Per-pixel mean alpha, accumulated as a running mean.
AlphaMap build_average_alpha(std::span<const RgbaMask> masks);

/// One line of a faces manifest (JSON lines: image, landmarks, parsing?).
struct FaceEntry {
    std::filesystem::path image;
    std::filesystem::path landmarks;
    std::optional<std::filesystem::path> parsing;
};

std::vector<FaceEntry> read_faces_manifest(const std::filesystem::path& path);
void write_faces_manifest(const std::filesystem::path& path, std::span<const FaceEntry> faces);

/// One line of a dataset manifest.
struct DatasetRecord {
    std::string face;
    std::string landmarks;
    std::uint64_t seed = 0;
    std::string after_png;
    std::string mask_png;
};

struct DatasetOptions {
    int styles_per_face = 3;
    std::uint64_t seed = 0;
    int workers = 1;
    WarpOptions warp;
    RegionSet regions = RegionSet::all();
    double max_failure_rate = 0.10;
};

struct DatasetResult {
    std::vector<DatasetRecord> records;
    std::size_t failed_faces = 0;
};

/// Writes `<stem>_<j>_after.png`, `<stem>_<j>_mask.png`, average_alpha.png and
/// manifest.jsonl under `out_dir`. Unreadable faces are skipped and logged;
/// more than max_failure_rate failures aborts with an io error.
DatasetResult generate_dataset(std::span<const FaceEntry> faces, const StyleLibrary& lib,
                               const CanonicalLayout& canon, const std::filesystem::path& out_dir,
                               const DatasetOptions& options);

std::string dataset_record_json(const DatasetRecord& record);

/// Seed used for face `face_index`, style `style_index` of a dataset run.
std::uint64_t pair_seed(std::uint64_t base, std::size_t face_index, std::size_t style_index);

}  // namespace maskforge
