#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "maskforge/color.hpp"
#include "maskforge/geometry.hpp"
#include "maskforge/image.hpp"
#include "maskforge/landmarks.hpp"
#include "maskforge/parsing.hpp"

namespace maskforge {

struct ClusterParams {
    int k = 6;
    int s = 2;
    std::uint64_t seed = 0;
    int max_iters = 100;
    double tol = 1e-4;  // max centroid shift, LAB units

    /// Throws invalid_argument unless k >= 2, 1 <= s <= k, max_iters >= 1, tol >= 0.
    void validate() const;
};

struct ClusterModel {
    std::vector<Lab> centroids;
    std::vector<std::size_t> counts;
    double sse = 0.0;
    int iterations = 0;

    std::size_t total() const;
};

struct SkinTone {
    Lab lab;
};

/// Lloyd's algorithm with k-means++ seeding. Deterministic for a fixed seed;
/// empty clusters are re-seeded with the point farthest from its centroid.
ClusterModel kmeans_lab(std::span<const Lab> points, const ClusterParams& params);

/// Clusters the pixels where `roi` is non-zero. Throws invalid_argument when
/// the ROI holds fewer than k pixels.
ClusterModel kmeans_lab(const ImageLab& img, const LabelMap& roi, const ClusterParams& params);

/// Count-weighted mean of the s most populated centroids (ties: darker first).
SkinTone estimate_skin_tone(const ClusterModel& model, int s);

/// Per-pixel clamp(1 - CosSim(pixel, tone), 0, 1).
AlphaMap compute_alpha_map(const ImageLab& img, const SkinTone& tone,
                           LabComponents components = LabComponents::full);

struct ExtractOptions {
    ClusterParams clusters;
    LabComponents components = LabComponents::full;
    /// Periocular rectangle scale about the eye bounding box centre.
    double roi_margin = 2.2;
    /// Cluster each eye separately (true) or both eye ROIs jointly.
    bool per_eye = true;
};

struct EyeExtraction {
    RgbaMask mask;                    // canonical frame
    std::array<SkinTone, 2> tones;    // image-left eye, image-right eye
    std::array<ClusterModel, 2> models;
    AffineTransform alignment;        // photo -> canonical frame
};

/// Periocular rectangle of one eye in the canonical frame: the eye bounding
/// box with its height floored at half its width, scaled by `margin`.
struct PixelRect {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;  // inclusive
    int y1 = 0;  // inclusive

    bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};
PixelRect periocular_rect(std::span<const Point> eye_points, double margin, Size frame);

/// Unsupervised eye-makeup mask from a real makeup photo:
///   align to the canonical frame, drop eyeball/brow pixels, cluster the
///   periocular colours, estimate the skin tone, gate to the eye region and
///   attach alpha from colour dissimilarity. RGB carries the aligned photo.
/// Throws missing_region ("parsing lacks eye region") when the parsing map
/// has no eye labels.
EyeExtraction extract_eye_mask(const ImageRgb& photo, const LandmarkSet& landmarks, const LabelMap& parsing,
                               const LabelConfig& labels, const ExtractOptions& options,
                               const CanonicalLayout& canon);

}  // namespace maskforge
