#include <benchmark/benchmark.h>

#include "maskforge/color.hpp"
#include "maskforge/geometry.hpp"
#include "maskforge/mask_extract.hpp"
#include "maskforge/random.hpp"
#include "maskforge/synth.hpp"
#include "maskforge/synthetic_face.hpp"
#include "maskforge/video.hpp"

using namespace maskforge;

namespace {

StyleLibrary& library(const CanonicalLayout& canon) {
    static StyleLibrary lib = make_default_library(canon);
    return lib;
}

void BM_ApplyToFrame(benchmark::State& state) {
    const int side = static_cast<int>(state.range(0));
    const CanonicalLayout canon = standard_layout(512);
    const StyleLibrary& lib = library(canon);
    const RgbaMask mask = render_style_mask(sample_style(lib, 1), lib, canon);
    const SyntheticFace f = make_synthetic_face(canon, 2, {.size = {side, side}});
    const FrameInput frame{f.image, f.landmarks, f.parsing, 0.0};
    for (auto _ : state) {
        benchmark::DoNotOptimize(apply_to_frame(mask, frame, canon));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ApplyToFrame)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_TpsFit(benchmark::State& state) {
    Rng rng(3);
    std::vector<Point> src;
    std::vector<Point> dst;
    for (int i = 0; i < state.range(0); ++i) {
        src.push_back({rng.uniform(0, 512), rng.uniform(0, 512)});
        dst.push_back({src.back().x + rng.uniform(-8, 8), src.back().y + rng.uniform(-8, 8)});
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(tps_fit(src, dst));
    }
}
BENCHMARK(BM_TpsFit)->Arg(17)->Arg(68)->Unit(benchmark::kMicrosecond);

void BM_KMeans(benchmark::State& state) {
    Rng rng(4);
    std::vector<Lab> points(static_cast<std::size_t>(state.range(0)));
    for (Lab& p : points) {
        p = {rng.uniform(20, 90), rng.uniform(-20, 40), rng.uniform(-20, 40)};
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(kmeans_lab(points, ClusterParams{}));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_KMeans)->Arg(4096)->Arg(16384)->Unit(benchmark::kMillisecond);

void BM_RenderStyle(benchmark::State& state) {
    const CanonicalLayout canon = standard_layout(static_cast<int>(state.range(0)));
    const StyleLibrary lib = make_default_library(canon);
    std::uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(render_style_mask(sample_style(lib, seed++), lib, canon));
    }
}
BENCHMARK(BM_RenderStyle)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_ExtractEyeMask(benchmark::State& state) {
    const CanonicalLayout canon = standard_layout(256);
    const StyleLibrary scaled = make_default_library(canon);
    const SyntheticFace f = make_synthetic_face(canon, 5, {.size = {256, 256}});
    const RgbaMask gt = render_style_mask(sample_style(scaled, 6, RegionSet::eyes()), scaled, canon);
    const ImageRgb after = generate_pair(f.image, f.landmarks, gt, canon).after;
    const LabelConfig labels = celebamask_hq_labels();
    for (auto _ : state) {
        benchmark::DoNotOptimize(extract_eye_mask(after, f.landmarks, f.parsing, labels, {}, canon));
    }
}
BENCHMARK(BM_ExtractEyeMask)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
