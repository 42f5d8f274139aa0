#include "maskforge/metrics.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "maskforge/color.hpp"
#include "maskforge/png_io.hpp"
#include "maskforge/random.hpp"
#include "maskforge/video.hpp"

namespace maskforge {

double mse(const ImageRgb& a, const ImageRgb& b) {
    require_same_size(a, b, "mse");
    if (a.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.pixel_count(); ++i) {
        const double dr = a[i].r - b[i].r;
        const double dg = a[i].g - b[i].g;
        const double db = a[i].b - b[i].b;
        sum += dr * dr + dg * dg + db * db;
    }
    return sum / (3.0 * static_cast<double>(a.pixel_count()));
}

namespace {

Psnr psnr_from_mse(double m) {
    if (m <= 0.0) {
        return {std::numeric_limits<double>::infinity(), true};
    }
    return {10.0 * std::log10(1.0 / m), false};
}

}  // namespace

Psnr psnr(const ImageRgb& a, const ImageRgb& b) { return psnr_from_mse(mse(a, b)); }

double alpha_mae(const RgbaMask& a, const RgbaMask& b, const LabelMap* region) {
    require_same_size(a, b, "alpha_mae");
    if (region != nullptr) {
        require_same_size(a, *region, "alpha_mae region");
    }
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.pixel_count(); ++i) {
        if (region != nullptr && (*region)[i] == 0) {
            continue;
        }
        sum += std::abs(a[i].a - b[i].a);
        ++n;
    }
    return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

double mask_iou(const RgbaMask& a, const RgbaMask& b, double threshold, const LabelMap* region) {
    require_same_size(a, b, "mask_iou");
    if (region != nullptr) {
        require_same_size(a, *region, "mask_iou region");
    }
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t i = 0; i < a.pixel_count(); ++i) {
        if (region != nullptr && (*region)[i] == 0) {
            continue;
        }
        const bool x = a[i].a > threshold;
        const bool y = b[i].a > threshold;
        inter += (x && y) ? 1 : 0;
        uni += (x || y) ? 1 : 0;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<EvalFace> load_eval_faces(std::span<const FaceEntry> entries) {
    std::vector<EvalFace> faces;
    for (const auto& e : entries) {
        EvalFace f;
        f.name = e.image.filename().string();
        f.image = read_png_rgb(e.image);
        f.landmarks = read_landmarks(e.landmarks);
        if (e.parsing) {
            f.parsing = read_png_labels(*e.parsing);
        }
        faces.push_back(std::move(f));
    }
    return faces;
}

namespace {

LabelMap periocular_region(const CanonicalLayout& canon, double margin) {
    LabelMap region(canon.size(), 0);
    const LandmarkSet& lm = canon.reference();
    for (const char* group : {"eye_left", "eye_right"}) {
        std::vector<Point> pts;
        for (int i : lm.schema().group(group)) {
            pts.push_back(lm[static_cast<std::size_t>(i)]);
        }
        const PixelRect r = periocular_rect(pts, margin, canon.size());
        for (int y = r.y0; y <= r.y1; ++y) {
            for (int x = r.x0; x <= r.x1; ++x) {
                region.at(x, y) = 1;
            }
        }
    }
    return region;
}

PairEval evaluate_pair(std::size_t index, std::span<const EvalFace> faces, const StyleLibrary& lib,
                       const CanonicalLayout& canon, const EvalOptions& options, const LabelMap& region) {
    PairEval pe;
    pe.index = index;
    pe.seed = mix_seed(options.seed, index);
    Rng rng(pe.seed);
    pe.source_face = rng.below(faces.size());
    pe.target_face = (pe.source_face + 1 + rng.below(faces.size() - 1)) % faces.size();
    const EvalFace& src = faces[pe.source_face];
    const EvalFace& dst = faces[pe.target_face];
    try {
        const MakeupStyle style = sample_style(lib, pe.seed, options.regions);
        const RgbaMask style_mask = render_style_mask(style, lib, canon);
        const GeneratedPair p1 = generate_pair(src.image, src.landmarks, style_mask, canon, options.warp);
        const GeneratedPair p2 = generate_pair(dst.image, dst.landmarks, style_mask, canon, options.warp);

        RgbaMask recovered;
        FrameInput target{dst.image, dst.landmarks, std::nullopt, 0.0};
        ApplyOptions apply;
        apply.warp = options.warp;
        if (options.mode == TransferMode::oracle) {
            recovered = style_mask;
            apply.gate = false;
        } else {
            if (!src.parsing) {
                throw Error(ErrorCode::missing_region, "source face has no parsing map");
            }
            recovered = extract_eye_mask(p1.after, src.landmarks, *src.parsing, options.labels, options.extract, canon)
                            .mask;
            target.parsing = dst.parsing;
            apply.face_labels = options.labels.set_of(options.labels.face);
        }
        const ApplyResult applied = apply_to_frame(recovered, target, canon, apply);
        if (!applied.applied) {
            throw Error(ErrorCode::degenerate_geometry, applied.warning);
        }
        pe.mse = mse(applied.image, p2.after);
        pe.psnr = psnr_from_mse(pe.mse);
        pe.alpha_mae = alpha_mae(recovered, style_mask, &region);
        pe.mask_iou = mask_iou(recovered, style_mask, 0.1, &region);
    } catch (const Error& e) {
        pe.skipped = true;
        pe.reason = e.what();
        spdlog::warn("eval pair {} skipped: {}", index, e.what());
    }
    return pe;
}

}  // namespace

EvalReport synthetic_transfer_eval(std::span<const EvalFace> faces, const StyleLibrary& lib,
                                   const CanonicalLayout& canon, const EvalOptions& options) {
    if (faces.size() < 2) {
        throw Error(ErrorCode::invalid_argument, "transfer evaluation needs at least two faces");
    }
    const StyleLibrary scaled = lib.frame() == canon.size() ? lib : lib.rescaled_to(canon.size());
    const LabelMap region = periocular_region(canon, options.extract.roi_margin);

    EvalReport report;
    report.requested = options.pairs;
    report.pairs.resize(options.pairs);
    std::atomic<std::size_t> next{0};
    const auto work = [&] {
        for (std::size_t i = next++; i < options.pairs; i = next++) {
            report.pairs[i] = evaluate_pair(i, faces, scaled, canon, options, region);
        }
    };
    const int workers = std::max(1, options.workers);
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back(work);
        }
    }

    double psnr_sum = 0.0;
    std::size_t finite = 0;
    double mse_sum = 0.0;
    for (const auto& p : report.pairs) {
        if (p.skipped) {
            ++report.skipped;
            continue;
        }
        ++report.n_pairs;
        mse_sum += p.mse;
        report.alpha_mae += p.alpha_mae;
        report.mask_iou += p.mask_iou;
        if (p.psnr.infinite) {
            ++report.infinite_pairs;
        } else {
            psnr_sum += p.psnr.db;
            ++finite;
        }
    }
    if (report.n_pairs > 0) {
        const double n = static_cast<double>(report.n_pairs);
        report.alpha_mae /= n;
        report.mask_iou /= n;
        const Psnr pooled = psnr_from_mse(mse_sum / n);
        report.pooled_psnr_db = pooled.db;
        if (finite == 0) {
            report.psnr_infinite = true;
            report.psnr_db = std::numeric_limits<double>::infinity();
        } else {
            report.psnr_db = psnr_sum / static_cast<double>(finite);
        }
    }
    return report;
}

namespace {

nlohmann::json db_json(double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json("inf");
}

}  // namespace

std::string eval_report_json(const EvalReport& r) {
    return nlohmann::json{{"psnr_db", db_json(r.psnr_db)},
                          {"psnr_infinite", r.psnr_infinite},
                          {"pooled_psnr_db", db_json(r.pooled_psnr_db)},
                          {"alpha_mae", r.alpha_mae},
                          {"mask_iou", r.mask_iou},
                          {"iou_threshold", 0.1},
                          {"n_pairs", r.n_pairs},
                          {"requested_pairs", r.requested},
                          {"skipped", r.skipped},
                          {"infinite_pairs", r.infinite_pairs}}
        .dump(2);
}

std::string eval_pairs_csv(const EvalReport& r) {
    std::ostringstream out;
    out << "index,seed,source_face,target_face,skipped,psnr_db,mse,alpha_mae,mask_iou,reason\n";
    out.precision(10);
    for (const auto& p : r.pairs) {
        std::string reason = p.reason;
        for (auto& ch : reason) {
            if (ch == ',' || ch == '\n') {
                ch = ';';
            }
        }
        out << p.index << ',' << p.seed << ',' << p.source_face << ',' << p.target_face << ',' << (p.skipped ? 1 : 0)
            << ',' << (p.psnr.infinite ? std::string("inf") : std::to_string(p.psnr.db)) << ',' << p.mse << ','
            << p.alpha_mae << ',' << p.mask_iou << ',' << reason << '\n';
    }
    return out.str();
}

}  // namespace maskforge
