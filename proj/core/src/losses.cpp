#include "maskforge/losses.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "maskforge/random.hpp"

namespace maskforge {
namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double reduce_scale(const RgbaMask& m, Reduction r) {
    return r == Reduction::mean && m.pixel_count() > 0 ? 1.0 / static_cast<double>(m.pixel_count()) : 1.0;
}

std::size_t support(const LipMask& lip) {
    return static_cast<std::size_t>(std::count_if(lip.pixels().begin(), lip.pixels().end(),
                                                  [](std::uint8_t v) { return v != 0; }));
}

std::size_t require_support(const RgbaMask& mask, const LipMask& lip) {
    require_same_size(mask, lip, "lip mask");
    const std::size_t n = support(lip);
    if (n == 0) {
        throw Error(ErrorCode::empty_mask, "empty lip mask");
    }
    return n;
}

}  // namespace

LossResult recon_alpha_weighted(const RgbaMask& pred, const RgbaMask& gt, Reduction reduction) {
    require_same_size(pred, gt, "recon_alpha_weighted");
    const double s = reduce_scale(pred, reduction);
    LossResult out{0.0, RgbaMask(pred.size())};
    for (std::size_t i = 0; i < pred.pixel_count(); ++i) {
        const Rgba& p = pred[i];
        const Rgba& g = gt[i];
        const double w = g.a * s;
        out.value += w * (std::abs(p.r - g.r) + std::abs(p.g - g.g) + std::abs(p.b - g.b));
        out.grad[i] = {w * sign(p.r - g.r), w * sign(p.g - g.g), w * sign(p.b - g.b), 0.0};
    }
    return out;
}

LossResult alpha_l1(const RgbaMask& pred, const RgbaMask& gt, Reduction reduction) {
    require_same_size(pred, gt, "alpha_l1");
    const double s = reduce_scale(pred, reduction);
    LossResult out{0.0, RgbaMask(pred.size())};
    for (std::size_t i = 0; i < pred.pixel_count(); ++i) {
        const double d = pred[i].a - gt[i].a;
        out.value += s * std::abs(d);
        out.grad[i].a = s * sign(d);
    }
    return out;
}

Rgb masked_mean_color(const RgbaMask& mask, const LipMask& lip) {
    return MaskedMeanEstimator(AlphaParticipation::rgb_only).estimate(mask, lip);
}

Rgb MaskedMeanEstimator::estimate(const RgbaMask& mask, const LipMask& lip) const {
    const double n = static_cast<double>(require_support(mask, lip));
    Rgb sum;
    for (std::size_t i = 0; i < mask.pixel_count(); ++i) {
        if (lip[i] == 0) {
            continue;
        }
        const double w = mode_ == AlphaParticipation::premultiplied ? mask[i].a : 1.0;
        sum.r += w * mask[i].r;
        sum.g += w * mask[i].g;
        sum.b += w * mask[i].b;
    }
    return {sum.r / n, sum.g / n, sum.b / n};
}

RgbaMask MaskedMeanEstimator::backward(const RgbaMask& mask, const LipMask& lip, const Rgb& up) const {
    const double n = static_cast<double>(require_support(mask, lip));
    RgbaMask grad(mask.size());
    for (std::size_t i = 0; i < mask.pixel_count(); ++i) {
        if (lip[i] == 0) {
            continue;
        }
        if (mode_ == AlphaParticipation::premultiplied) {
            const Rgba& m = mask[i];
            grad[i] = {up.r * m.a / n, up.g * m.a / n, up.b * m.a / n, (up.r * m.r + up.g * m.g + up.b * m.b) / n};
        } else {
            grad[i] = {up.r / n, up.g / n, up.b / n, 0.0};
        }
    }
    return grad;
}

LossResult lip_color_loss(const RgbaMask& pred, const RgbaMask& gt, const LipMask& lip,
                          const ColorEstimator& estimator) {
    require_same_size(pred, gt, "lip_color_loss");
    const Rgb cp = estimator.estimate(pred, lip);
    const Rgb cg = estimator.estimate(gt, lip);
    const Rgb d{cp.r - cg.r, cp.g - cg.g, cp.b - cg.b};
    const double norm = std::sqrt(d.r * d.r + d.g * d.g + d.b * d.b);
    // Subgradient 0 at the kink.
    const Rgb up = norm > 0.0 ? Rgb{d.r / norm, d.g / norm, d.b / norm} : Rgb{};
    return {norm, estimator.backward(pred, lip, up)};
}

LossResult lip_color_loss_noreg(const RgbaMask& pred, const RgbaMask& gt, const LipMask& lip) {
    return lip_color_loss(pred, gt, lip, MaskedMeanEstimator(AlphaParticipation::rgb_only));
}

BceResult adversarial_bce(std::span<const double> logits, bool target_real) {
    BceResult out;
    out.grad.resize(logits.size());
    if (logits.empty()) {
        return out;
    }
    const double t = target_real ? 1.0 : 0.0;
    const double n = static_cast<double>(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double x = logits[i];
        if (!std::isfinite(x)) {
            throw Error(ErrorCode::invalid_argument, "adversarial_bce: logits must be finite");
        }
        const double softplus = std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
        sum += softplus - t * x;
        const double sigmoid = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        out.grad[i] = (sigmoid - t) / n;
    }
    out.value = sum / n;
    return out;
}

std::string_view to_string(Part part) {
    switch (part) {
        case Part::lip: return "lip";
        case Part::eye: return "eye";
        case Part::cheek: return "cheek";
    }
    return "?";
}

std::map<Part, PartWeights> default_part_weights() {
    return {{Part::lip, {}}, {Part::eye, {}}, {Part::cheek, {}}};
}

double total_loss(const std::map<Part, PartComponents>& components, const std::map<Part, PartWeights>& weights) {
    double total = 0.0;
    for (const auto& [part, c] : components) {
        for (double v : {c.recon, c.alpha, c.color, c.adv_g, c.adv_d}) {
            if (!(v >= 0.0)) {
                throw Error(ErrorCode::invalid_argument, "loss components must be non-negative");
            }
        }
        const auto it = weights.find(part);
        if (it == weights.end()) {
            throw Error(ErrorCode::invalid_argument, "no weights for part " + std::string(to_string(part)));
        }
        const PartWeights& w = it->second;
        for (double v : {w.recon, w.alpha, w.adv, w.color}) {
            if (!(v >= 0.0)) {
                throw Error(ErrorCode::invalid_argument, "loss weights must be non-negative");
            }
        }
        total += w.recon * c.recon + w.alpha * c.alpha + w.adv * (c.adv_g + c.adv_d);
        if (part == Part::lip) {
            total += w.color * c.color;
        }
    }
    return total;
}

GradCheck finite_diff_check(const std::function<double(std::span<const double>)>& f, std::span<const double> x,
                            std::span<const double> analytic, double step, std::size_t max_coords,
                            std::uint64_t seed) {
    if (x.size() != analytic.size()) {
        throw Error(ErrorCode::dimension_mismatch, "finite_diff_check: gradient size differs from input size");
    }
    if (!(step > 0.0)) {
        throw Error(ErrorCode::invalid_argument, "finite_diff_check: step must be positive");
    }
    std::vector<std::size_t> coords(x.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (max_coords > 0 && max_coords < coords.size()) {
        Rng rng(seed);
        for (std::size_t i = 0; i < max_coords; ++i) {
            std::swap(coords[i], coords[i + rng.below(coords.size() - i)]);
        }
        coords.resize(max_coords);
    }
    std::vector<double> probe(x.begin(), x.end());
    GradCheck out;
    for (std::size_t c : coords) {
        const double keep = probe[c];
        probe[c] = keep + step;
        const double up = f(probe);
        probe[c] = keep - step;
        const double down = f(probe);
        probe[c] = keep;
        const double numeric = (up - down) / (2.0 * step);
        const double denom = std::max({std::abs(numeric), std::abs(analytic[c]), 1e-6});
        out.max_rel_error = std::max(out.max_rel_error, std::abs(numeric - analytic[c]) / denom);
        ++out.coordinates;
    }
    return out;
}

std::vector<double> flatten(const RgbaMask& mask) {
    std::vector<double> out;
    out.reserve(mask.pixel_count() * 4);
    for (const auto& p : mask.pixels()) {
        out.insert(out.end(), {p.r, p.g, p.b, p.a});
    }
    return out;
}

RgbaMask unflatten(std::span<const double> values, Size size) {
    RgbaMask out(size);
    if (values.size() != out.pixel_count() * 4) {
        throw Error(ErrorCode::dimension_mismatch, "unflatten: value count does not match size");
    }
    for (std::size_t i = 0; i < out.pixel_count(); ++i) {
        out[i] = {values[4 * i], values[4 * i + 1], values[4 * i + 2], values[4 * i + 3]};
    }
    return out;
}

RgbaMask avoid_kinks(const RgbaMask& pred, const RgbaMask& gt, double margin) {
    require_same_size(pred, gt, "avoid_kinks");
    const auto push = [margin](double p, double g) {
        if (std::abs(p - g) >= margin) {
            return p;
        }
        const bool up = p > g || (p == g && g + margin <= 1.0);
        const double moved = up ? g + margin : g - margin;
        return (moved < 0.0 || moved > 1.0) ? (up ? g - margin : g + margin) : moved;
    };
    RgbaMask out = pred;
    for (std::size_t i = 0; i < out.pixel_count(); ++i) {
        out[i] = {push(pred[i].r, gt[i].r), push(pred[i].g, gt[i].g), push(pred[i].b, gt[i].b),
                  push(pred[i].a, gt[i].a)};
    }
    return out;
}

LossInputs make_loss_inputs(std::uint64_t seed, Size size, std::size_t n_logits) {
    std::uint64_t counter = 0;
    const auto next = [&] { return static_cast<double>(mix_seed(seed, counter++) >> 11) * 0x1.0p-53; };
    LossInputs in{RgbaMask(size), RgbaMask(size), LipMask(size), {}};
    for (auto& p : in.pred.pixels()) {
        p = {next(), next(), next(), next()};
    }
    for (auto& p : in.gt.pixels()) {
        p = {next(), next(), next(), next()};
    }
    for (auto& v : in.lip.pixels()) {
        v = next() < 0.5 ? 1 : 0;
    }
    if (!in.lip.empty()) {
        in.lip[0] = 1;
    }
    in.logits.resize(n_logits);
    for (auto& x : in.logits) {
        x = -4.0 + 8.0 * next();
    }
    return in;
}

bool LossCheckReport::passed(double tolerance) const {
    return std::all_of(max_rel_error.begin(), max_rel_error.end(),
                       [tolerance](const auto& kv) { return kv.second <= tolerance; });
}

LossCheckReport run_gradient_checks(std::span<const std::uint64_t> seeds, double step) {
    const auto start = std::chrono::steady_clock::now();
    LossCheckReport report;
    report.step = step;
    const MaskedMeanEstimator straight(AlphaParticipation::rgb_only);
    const MaskedMeanEstimator premult(AlphaParticipation::premultiplied);
    for (std::uint64_t seed : seeds) {
        LossInputs in = make_loss_inputs(seed);
        const RgbaMask pred = avoid_kinks(in.pred, in.gt, 10.0 * step);
        const Size size = pred.size();
        const std::vector<double> x = flatten(pred);
        LossCheckEntry entry;
        entry.seed = seed;
        entry.pred_hash = content_hash(pred);
        entry.gt_hash = content_hash(in.gt);

        const auto check_mask = [&](const std::string& name, auto&& loss) {
            const LossResult r = loss(pred);
            const auto f = [&](std::span<const double> v) { return loss(unflatten(v, size)).value; };
            const auto g = flatten(r.grad);
            entry.values[name] = r.value;
            entry.rel_errors[name] = finite_diff_check(f, x, g, step).max_rel_error;
        };
        check_mask("recon_alpha_weighted", [&](const RgbaMask& p) { return recon_alpha_weighted(p, in.gt); });
        check_mask("alpha_l1", [&](const RgbaMask& p) { return alpha_l1(p, in.gt); });
        check_mask("lip_color", [&](const RgbaMask& p) { return lip_color_loss(p, in.gt, in.lip, straight); });
        check_mask("lip_color_premultiplied",
                   [&](const RgbaMask& p) { return lip_color_loss(p, in.gt, in.lip, premult); });
        check_mask("lip_color_noreg", [&](const RgbaMask& p) { return lip_color_loss_noreg(p, in.gt, in.lip); });

        for (bool real : {true, false}) {
            const std::string name = real ? "adversarial_bce_real" : "adversarial_bce_fake";
            const BceResult r = adversarial_bce(in.logits, real);
            const auto f = [&](std::span<const double> v) { return adversarial_bce(v, real).value; };
            entry.values[name] = r.value;
            entry.rel_errors[name] = finite_diff_check(f, in.logits, r.grad, step).max_rel_error;
        }
        for (const auto& [name, err] : entry.rel_errors) {
            report.max_rel_error[name] = std::max(report.max_rel_error[name], err);
        }
        report.entries.push_back(std::move(entry));
    }
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

std::string loss_report_json(const LossCheckReport& report) {
    const auto hex = [](std::uint64_t v) {
        char buf[19];
        std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
        return std::string(buf);
    };
    nlohmann::json j;
    j["format"] = "maskforge-loss-vectors";
    j["version"] = 1;
    j["input_generator"] = "splitmix64";
    j["hash"] = "fnv1a64";
    j["step"] = report.step;
    auto entries = nlohmann::json::array();
    for (const auto& e : report.entries) {
        entries.push_back({{"seed", e.seed},
                           {"pred_hash", hex(e.pred_hash)},
                           {"gt_hash", hex(e.gt_hash)},
                           {"values", e.values},
                           {"rel_errors", e.rel_errors}});
    }
    j["entries"] = entries;
    j["max_rel_error"] = report.max_rel_error;
    j["passed"] = report.passed();
    return j.dump(2);
}

}  // namespace maskforge
