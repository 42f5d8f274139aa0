#include "maskforge/mask_extract.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "maskforge/random.hpp"

namespace maskforge {
namespace {

double dist2(const Lab& p, const Lab& q) {
    const double dl = p.l - q.l;
    const double da = p.a - q.a;
    const double db = p.b - q.b;
    return dl * dl + da * da + db * db;
}

std::size_t nearest(const Lab& p, const std::vector<Lab>& centroids, double* best_d2 = nullptr) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double d = dist2(p, centroids[c]);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    if (best_d2 != nullptr) {
        *best_d2 = best_d;
    }
    return best;
}

std::size_t sample_d2(std::span<const double> d2, double total, Rng& rng) {
    const double target = rng.uniform() * total;
    double run = 0.0;
    for (std::size_t i = 0; i < d2.size(); ++i) {
        run += d2[i];
        if (run > target) {
            return i;
        }
    }
    return d2.size() - 1;
}

// Greedy k-means++: each new centre is the best of a few D^2 draws.
std::vector<Lab> seed_plus_plus(std::span<const Lab> points, std::size_t k, Rng& rng) {
    const std::size_t trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(k)));
    std::vector<Lab> centroids;
    centroids.reserve(k);
    centroids.push_back(points[rng.below(points.size())]);
    std::vector<double> d2(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        d2[i] = dist2(points[i], centroids[0]);
    }
    std::vector<double> trial_d2(points.size());
    std::vector<double> best_d2(points.size());
    while (centroids.size() < k) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        if (!(total > 0.0)) {
            centroids.push_back(points[rng.below(points.size())]);
            continue;
        }
        std::size_t best = 0;
        double best_potential = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < trials; ++t) {
            const std::size_t cand = sample_d2(d2, total, rng);
            double potential = 0.0;
            for (std::size_t i = 0; i < points.size(); ++i) {
                trial_d2[i] = std::min(d2[i], dist2(points[i], points[cand]));
                potential += trial_d2[i];
            }
            if (potential < best_potential) {
                best_potential = potential;
                best = cand;
                best_d2.swap(trial_d2);
            }
        }
        centroids.push_back(points[best]);
        d2 = best_d2;
    }
    return centroids;
}

}  // namespace

void ClusterParams::validate() const {
    if (k < 2) {
        throw Error(ErrorCode::invalid_argument, "cluster params: k must be >= 2");
    }
    if (s < 1 || s > k) {
        throw Error(ErrorCode::invalid_argument, "cluster params: s must satisfy 1 <= s <= k");
    }
    if (max_iters < 1 || !(tol >= 0.0)) {
        throw Error(ErrorCode::invalid_argument, "cluster params: max_iters >= 1 and tol >= 0 required");
    }
}

std::size_t ClusterModel::total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

ClusterModel kmeans_lab(std::span<const Lab> points, const ClusterParams& params) {
    params.validate();
    const auto k = static_cast<std::size_t>(params.k);
    if (points.size() < k) {
        throw Error(ErrorCode::invalid_argument, "kmeans_lab: ROI has " + std::to_string(points.size()) +
                                                     " pixels, fewer than k=" + std::to_string(k));
    }
    Rng rng(params.seed);
    ClusterModel model;
    model.centroids = seed_plus_plus(points, k, rng);
    std::vector<std::size_t> assignment(points.size(), 0);
    std::vector<double> d2(points.size(), 0.0);

    for (int iter = 0; iter < params.max_iters; ++iter) {
        for (std::size_t i = 0; i < points.size(); ++i) {
            assignment[i] = nearest(points[i], model.centroids, &d2[i]);
        }
        std::vector<Lab> sums(k);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            auto& s = sums[assignment[i]];
            s.l += points[i].l;
            s.a += points[i].a;
            s.b += points[i].b;
            ++counts[assignment[i]];
        }
        double shift = 0.0;
        std::vector<bool> taken(points.size(), false);
        for (std::size_t c = 0; c < k; ++c) {
            Lab next;
            if (counts[c] > 0) {
                const double n = static_cast<double>(counts[c]);
                next = {sums[c].l / n, sums[c].a / n, sums[c].b / n};
            } else {
                // Re-seed with the point farthest from its current centroid.
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < points.size(); ++i) {
                    if (!taken[i] && d2[i] > far_d) {
                        far_d = d2[i];
                        far = i;
                    }
                }
                taken[far] = true;
                d2[far] = 0.0;
                next = points[far];
            }
            shift = std::max(shift, std::sqrt(dist2(next, model.centroids[c])));
            model.centroids[c] = next;
        }
        model.iterations = iter + 1;
        if (shift <= params.tol) {
            break;
        }
    }

    model.counts.assign(k, 0);
    model.sse = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        double d = 0.0;
        ++model.counts[nearest(points[i], model.centroids, &d)];
        model.sse += d;
    }
    return model;
}

ClusterModel kmeans_lab(const ImageLab& img, const LabelMap& roi, const ClusterParams& params) {
    require_same_size(img, roi, "kmeans_lab");
    std::vector<Lab> points;
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        if (roi[i] != 0) {
            points.push_back(img[i]);
        }
    }
    return kmeans_lab(points, params);
}

SkinTone estimate_skin_tone(const ClusterModel& model, int s) {
    if (s < 1 || static_cast<std::size_t>(s) > model.centroids.size()) {
        throw Error(ErrorCode::invalid_argument, "estimate_skin_tone: s out of range");
    }
    std::vector<std::size_t> order(model.centroids.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (model.counts[a] != model.counts[b]) {
            return model.counts[a] > model.counts[b];
        }
        return model.centroids[a].l < model.centroids[b].l;
    });
    double weight = 0.0;
    Lab sum;
    for (int i = 0; i < s; ++i) {
        const auto c = order[static_cast<std::size_t>(i)];
        const double w = static_cast<double>(model.counts[c]);
        sum.l += w * model.centroids[c].l;
        sum.a += w * model.centroids[c].a;
        sum.b += w * model.centroids[c].b;
        weight += w;
    }
    if (weight <= 0.0) {
        sum = {};
        for (int i = 0; i < s; ++i) {
            const auto& c = model.centroids[order[static_cast<std::size_t>(i)]];
            sum.l += c.l;
            sum.a += c.a;
            sum.b += c.b;
        }
        weight = s;
    }
    return {{sum.l / weight, sum.a / weight, sum.b / weight}};
}

AlphaMap compute_alpha_map(const ImageLab& img, const SkinTone& tone, LabComponents components) {
    AlphaMap alpha(img.size());
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        const double a = 1.0 - lab_cosine_similarity(img[i], tone.lab, components);
        alpha[i] = std::clamp(a, 0.0, 1.0);
    }
    return alpha;
}

PixelRect periocular_rect(std::span<const Point> eye_points, double margin, Size frame) {
    double x0 = eye_points.front().x;
    double x1 = x0;
    double y0 = eye_points.front().y;
    double y1 = y0;
    for (const auto& p : eye_points) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    const double cx = 0.5 * (x0 + x1);
    const double cy = 0.5 * (y0 + y1);
    const double w = x1 - x0;
    const double h = std::max(y1 - y0, 0.5 * w);
    const double hw = 0.5 * w * margin;
    const double hh = 0.5 * h * margin;
    PixelRect r;
    r.x0 = std::max(0, static_cast<int>(std::floor(cx - hw)));
    r.y0 = std::max(0, static_cast<int>(std::floor(cy - hh)));
    r.x1 = std::min(frame.width - 1, static_cast<int>(std::ceil(cx + hw)));
    r.y1 = std::min(frame.height - 1, static_cast<int>(std::ceil(cy + hh)));
    return r;
}

EyeExtraction extract_eye_mask(const ImageRgb& photo, const LandmarkSet& landmarks, const LabelMap& parsing,
                               const LabelConfig& labels, const ExtractOptions& options,
                               const CanonicalLayout& canon) {
    options.clusters.validate();
    require_same_size(photo, parsing, "extract_eye_mask (photo vs parsing)");
    const LabelSet eye = labels.set_of(labels.eye);
    const LabelSet brow = labels.set_of(labels.brow);
    const LabelSet region = labels.set_of(labels.eye_region);
    if (!contains_any(parsing, eye)) {
        throw Error(ErrorCode::missing_region, "parsing lacks eye region");
    }

    EyeExtraction out;
    out.alignment = fit_canonical_affine(landmarks, canon);
    const Size frame = canon.size();
    const ImageRgb aligned = apply_affine(photo, out.alignment, frame);
    const LabelMap aligned_labels = apply_affine(parsing, out.alignment, frame);
    const LandmarkSet lm = landmarks.mapped(out.alignment);
    const AffineTransform back = out.alignment.inverse();

    const auto& schema = lm.schema();
    std::array<PixelRect, 2> rects;
    const char* groups[2] = {"eye_left", "eye_right"};
    for (std::size_t e = 0; e < 2; ++e) {
        std::vector<Point> pts;
        for (int i : schema.group(groups[e])) {
            pts.push_back(lm[static_cast<std::size_t>(i)]);
        }
        rects[e] = periocular_rect(pts, options.roi_margin, frame);
    }

    ImageLab lab(frame);
    LabelMap valid(frame, 0);
    const double max_x = photo.width() - 1;
    const double max_y = photo.height() - 1;
    for (const auto& r : rects) {
        for (int y = r.y0; y <= r.y1; ++y) {
            for (int x = r.x0; x <= r.x1; ++x) {
                const Point src = back(Point{static_cast<double>(x), static_cast<double>(y)});
                if (src.x < -0.5 || src.y < -0.5 || src.x > max_x + 0.5 || src.y > max_y + 0.5) {
                    continue;
                }
                valid.at(x, y) = 1;
                lab.at(x, y) = srgb_to_lab(aligned.at(x, y));
            }
        }
    }

    auto roi_points = [&](const PixelRect& r) {
        std::vector<Lab> pts;
        for (int y = r.y0; y <= r.y1; ++y) {
            for (int x = r.x0; x <= r.x1; ++x) {
                const auto label = aligned_labels.at(x, y);
                if (valid.at(x, y) != 0 && !eye[label] && !brow[label]) {
                    pts.push_back(lab.at(x, y));
                }
            }
        }
        return pts;
    };

    if (options.per_eye) {
        for (std::size_t e = 0; e < 2; ++e) {
            out.models[e] = kmeans_lab(roi_points(rects[e]), options.clusters);
            out.tones[e] = estimate_skin_tone(out.models[e], options.clusters.s);
        }
    } else {
        auto joint = roi_points(rects[0]);
        const auto right = roi_points(rects[1]);
        joint.insert(joint.end(), right.begin(), right.end());
        out.models[0] = kmeans_lab(joint, options.clusters);
        out.models[1] = out.models[0];
        out.tones[0] = out.tones[1] = estimate_skin_tone(out.models[0], options.clusters.s);
    }

    out.mask = RgbaMask(frame);
    for (std::size_t e = 0; e < 2; ++e) {
        const auto& r = rects[e];
        for (int y = r.y0; y <= r.y1; ++y) {
            for (int x = r.x0; x <= r.x1; ++x) {
                if (valid.at(x, y) == 0 || !region[aligned_labels.at(x, y)]) {
                    continue;
                }
                const double a = std::clamp(
                    1.0 - lab_cosine_similarity(lab.at(x, y), out.tones[e].lab, options.components), 0.0, 1.0);
                if (a <= 0.0) {
                    continue;
                }
                const Rgb& c = aligned.at(x, y);
                auto& px = out.mask.at(x, y);
                // Overlapping rectangles keep the stronger estimate.
                if (a > px.a) {
                    px = {c.r, c.g, c.b, a};
                }
            }
        }
    }
    return out;
}

}  // namespace maskforge
