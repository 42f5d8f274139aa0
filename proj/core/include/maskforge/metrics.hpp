#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "maskforge/image.hpp"
#include "maskforge/landmarks.hpp"
#include "maskforge/mask_extract.hpp"
#include "maskforge/parsing.hpp"
#include "maskforge/synth.hpp"

namespace maskforge {

struct Psnr {
    double db = 0.0;
    bool infinite = false;  // images identical
};

double mse(const ImageRgb& a, const ImageRgb& b);

/// 10 log10(1 / MSE) over all channels in [0,1].
Psnr psnr(const ImageRgb& a, const ImageRgb& b);

/// Mean |a.A - b.A|, optionally restricted to non-zero pixels of `region`.
double alpha_mae(const RgbaMask& a, const RgbaMask& b, const LabelMap* region = nullptr);

/// IoU of {A > threshold}; two empty supports give 1.
double mask_iou(const RgbaMask& a, const RgbaMask& b, double threshold = 0.1, const LabelMap* region = nullptr);

struct EvalFace {
    std::string name;
    ImageRgb image;
    LandmarkSet landmarks;
    std::optional<LabelMap> parsing;
};

std::vector<EvalFace> load_eval_faces(std::span<const FaceEntry> entries);

enum class TransferMode {
    kmeans,  // extract from face 1's after-image, apply to face 2
    oracle,  // transfer the ground-truth canonical mask itself
};

struct EvalOptions {
    std::size_t pairs = 200;
    std::uint64_t seed = 0;
    TransferMode mode = TransferMode::kmeans;
    /// Only eye makeup can be recovered by the k-means extractor.
    RegionSet regions = RegionSet::eyes();
    ExtractOptions extract;
    LabelConfig labels = celebamask_hq_labels();
    WarpOptions warp;
    int workers = 1;
};

struct PairEval {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    std::size_t source_face = 0;
    std::size_t target_face = 0;
    bool skipped = false;
    std::string reason;
    Psnr psnr;
    double mse = 0.0;
    double alpha_mae = 0.0;
    double mask_iou = 0.0;
};

struct EvalReport {
    /// Mean of the finite per-pair PSNR values; `psnr_infinite` when every
    /// evaluated pair reproduced its target exactly.
    double psnr_db = 0.0;
    bool psnr_infinite = false;
    /// PSNR of the MSE pooled over all evaluated pairs.
    double pooled_psnr_db = 0.0;
    double alpha_mae = 0.0;
    double mask_iou = 0.0;
    std::size_t n_pairs = 0;
    std::size_t requested = 0;
    std::size_t skipped = 0;
    std::size_t infinite_pairs = 0;
    std::vector<PairEval> pairs;
};

/// Paired-transfer protocol: for each pair, sample two distinct faces and a
/// style, synthesize both after-images, recover the mask from the first and
/// apply it to the second's bare face, then compare with the second's
/// after-image. alpha_mae and mask_iou compare the recovered canonical mask
/// with the style mask inside the periocular rectangles.
EvalReport synthetic_transfer_eval(std::span<const EvalFace> faces, const StyleLibrary& lib,
                                   const CanonicalLayout& canon, const EvalOptions& options);

std::string eval_report_json(const EvalReport& report);
std::string eval_pairs_csv(const EvalReport& report);

}  // namespace maskforge
