#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "maskforge/image.hpp"

namespace maskforge {

/// Pixel losses sum over the image by default; `mean` divides by the pixel count.
enum class Reduction { sum, mean };

struct LossResult {
    double value = 0.0;
    RgbaMask grad;  // d value / d pred, same layout as pred
};

/// Binary lip segmentation: non-zero pixels belong to the mask.
using LipMask = LabelMap;

/// Opacity-weighted L1 on RGB: sum gt.a * |pred_k - gt_k|. No gradient reaches pred.a.
LossResult recon_alpha_weighted(const RgbaMask& pred, const RgbaMask& gt, Reduction reduction = Reduction::sum);

/// Sum |pred.a - gt.a|.
LossResult alpha_l1(const RgbaMask& pred, const RgbaMask& gt, Reduction reduction = Reduction::sum);

/// Per-channel RGB mean over the support of `lip`. Throws empty_mask ("empty lip mask").
Rgb masked_mean_color(const RgbaMask& mask, const LipMask& lip);

/// Lip colour estimator. Implementations must be differentiable in the mask;
/// `backward` returns the vector-Jacobian product for an upstream gradient.
class ColorEstimator {
public:
    virtual ~ColorEstimator() = default;
    virtual Rgb estimate(const RgbaMask& mask, const LipMask& lip) const = 0;
    virtual RgbaMask backward(const RgbaMask& mask, const LipMask& lip, const Rgb& upstream) const = 0;
};

/// Whether alpha takes part in the colour target.
enum class AlphaParticipation {
    rgb_only,       // mean of RGB
    premultiplied,  // mean of RGB * A
};

/// Exact masked-mean estimator.
class MaskedMeanEstimator final : public ColorEstimator {
public:
    explicit MaskedMeanEstimator(AlphaParticipation mode = AlphaParticipation::rgb_only) : mode_(mode) {}

    Rgb estimate(const RgbaMask& mask, const LipMask& lip) const override;
    RgbaMask backward(const RgbaMask& mask, const LipMask& lip, const Rgb& upstream) const override;
    AlphaParticipation mode() const noexcept { return mode_; }

private:
    AlphaParticipation mode_;
};

/// || C(pred) - C(gt) ||_2 with the estimator frozen; the gradient flows into pred only.
LossResult lip_color_loss(const RgbaMask& pred, const RgbaMask& gt, const LipMask& lip,
                          const ColorEstimator& estimator);

/// Same loss with the masked mean in place of a learned regressor.
LossResult lip_color_loss_noreg(const RgbaMask& pred, const RgbaMask& gt, const LipMask& lip);

struct BceResult {
    double value = 0.0;
    std::vector<double> grad;
};

/// Mean binary cross-entropy with logits against label 1 (real) or 0 (fake),
/// evaluated as softplus(x) - t x.
BceResult adversarial_bce(std::span<const double> logits, bool target_real);

enum class Part { lip, eye, cheek };

std::string_view to_string(Part part);

struct PartComponents {
    double recon = 0.0;
    double alpha = 0.0;
    double color = 0.0;  // used for the lip part only
    double adv_g = 0.0;
    double adv_d = 0.0;
};

struct PartWeights {
    double recon = 100.0;
    double alpha = 100.0;
    double adv = 10.0;
    double color = 50.0;  // lip only
};

/// recon*L_recon + alpha*L_alpha + adv*(L_adv_G + L_adv_D) per part, plus
/// color*L_col for the lip part. Throws invalid_argument on negative input.
double total_loss(const std::map<Part, PartComponents>& components, const std::map<Part, PartWeights>& weights);
std::map<Part, PartWeights> default_part_weights();

struct GradCheck {
    double max_rel_error = 0.0;
    std::size_t coordinates = 0;
};

/// Central differences of `f` at `x` against `analytic`. The relative error
/// of each coordinate is |num - ana| / max(|num|, |ana|, 1e-6). With
/// max_coords > 0 a seeded subset of coordinates is checked.
GradCheck finite_diff_check(const std::function<double(std::span<const double>)>& f, std::span<const double> x,
                            std::span<const double> analytic, double step = 1e-3, std::size_t max_coords = 0,
                            std::uint64_t seed = 0);

std::vector<double> flatten(const RgbaMask& mask);
RgbaMask unflatten(std::span<const double> values, Size size);

/// Moves pred channels at least `margin` away from gt (staying inside
/// [0,1]) so L1 terms are differentiable within a finite-difference step.
RgbaMask avoid_kinks(const RgbaMask& pred, const RgbaMask& gt, double margin);

/// Portable pseudo-random inputs for gradient checks and golden vectors.
struct LossInputs {
    RgbaMask pred;
    RgbaMask gt;
    LipMask lip;
    std::vector<double> logits;
};
LossInputs make_loss_inputs(std::uint64_t seed, Size size = {8, 8}, std::size_t n_logits = 16);

struct LossCheckEntry {
    std::uint64_t seed = 0;
    std::uint64_t pred_hash = 0;
    std::uint64_t gt_hash = 0;
    std::map<std::string, double> values;
    std::map<std::string, double> rel_errors;
};

struct LossCheckReport {
    std::vector<LossCheckEntry> entries;
    std::map<std::string, double> max_rel_error;
    double step = 1e-3;
    double seconds = 0.0;

    bool passed(double tolerance = 1e-4) const;
};

/// Gradient oracle over `seeds` random 8x8 inputs for the reconstruction,
/// alpha, lip colour (both forms) and adversarial losses.
LossCheckReport run_gradient_checks(std::span<const std::uint64_t> seeds, double step = 1e-3);

/// Golden "loss vectors" document: input hashes, loss values and gradient-check results.
std::string loss_report_json(const LossCheckReport& report);

}  // namespace maskforge
