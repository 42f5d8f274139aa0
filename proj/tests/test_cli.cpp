#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "maskforge/image.hpp"
#include "maskforge/png_io.hpp"
#include "support/test_support.hpp"

using namespace maskforge;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = 0;
    std::string out;
    std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "maskforge");
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::map<std::string, std::uint64_t> tree_hashes(const fs::path& dir, const std::string& skip = "") {
    std::map<std::string, std::uint64_t> h;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().filename() != skip) {
            const auto bytes = read_file(e.path());
            h[fs::relative(e.path(), dir).string()] = fnv1a(std::as_bytes(std::span(bytes)));
        }
    }
    return h;
}

// Shared synthetic inputs, produced through the CLI itself.
class CliFixture : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        root = new fs::path(fixtures::scratch_dir("cli"));
        const Outcome r = run_cli({"faces", "--count", "4", "--size", "128", "--seed", "3", "--out", faces().string()});
        ASSERT_EQ(r.code, 0) << r.err;
        const Outcome s = run_cli({"synth", "--seed", "5", "--canon-size", "128", "--out", mask().string()});
        ASSERT_EQ(s.code, 0) << s.err;
    }
    static void TearDownTestSuite() { delete root; }

    static fs::path faces() { return *root / "faces"; }
    static fs::path mask() { return *root / "mask.png"; }
    static fs::path face(int i, const std::string& suffix) {
        char stem[32];
        std::snprintf(stem, sizeof stem, "face_%04d", i);
        return faces() / (stem + suffix);
    }

    static fs::path* root;
};

fs::path* CliFixture::root = nullptr;

}  // namespace

TEST(CliUsage, HelpAndVersion) {
    const Outcome h = run_cli({"--help"});
    EXPECT_EQ(h.code, 0);
    for (const char* sub : {"extract", "synth", "pair", "apply", "video", "eval", "losses-check"}) {
        EXPECT_NE(h.out.find(sub), std::string::npos) << sub;
    }
    EXPECT_EQ(run_cli({"--version"}).code, 0);
}

TEST(CliUsage, ParseErrorsExitOne) {
    EXPECT_EQ(run_cli({}).code, cli::kUsage);
    EXPECT_EQ(run_cli({"transmogrify"}).code, cli::kUsage);
    const Outcome unknown = run_cli({"synth", "--out", "/tmp/x.png", "--sparkle"});
    EXPECT_EQ(unknown.code, cli::kUsage);
    EXPECT_NE(unknown.err.find("--sparkle"), std::string::npos);
    EXPECT_NE(unknown.err.find("Usage"), std::string::npos);
    EXPECT_EQ(run_cli({"synth"}).code, cli::kUsage);
    EXPECT_EQ(run_cli({"apply", "--mask", "/nonexistent.png", "--image", "a", "--landmarks", "b", "--out", "c"}).code,
              cli::kUsage);
    EXPECT_EQ(run_cli({"video", "--mask", "m", "--frames", "f", "--out", "o", "--beta", "1.0"}).code, cli::kUsage);
}

TEST_F(CliFixture, SynthIsDeterministic) {
    const fs::path again = *root / "again.png";
    ASSERT_EQ(run_cli({"synth", "--seed", "5", "--canon-size", "128", "--out", again.string()}).code, 0);
    EXPECT_EQ(read_file(again), read_file(mask()));
    const Outcome j = run_cli({"synth", "--seed", "6", "--regions", "lipstick", "--canon-size", "128", "--json",
                               "--out", (*root / "lips.png").string()});
    ASSERT_EQ(j.code, 0);
    const auto style = nlohmann::json::parse(j.out);
    EXPECT_EQ(style["regions"].size(), 1u);
    EXPECT_EQ(read_png_rgba(*root / "lips.png").size(), (Size{128, 128}));
}

TEST_F(CliFixture, ExtractWritesMaskAndStats) {
    const fs::path out = *root / "extract" / "mask.png";
    const fs::path stats = *root / "extract" / "stats.json";
    const std::vector<std::string> args{"extract",      "--photo",    face(0, ".png").string(),
                                        "--landmarks",  face(0, ".json").string(),
                                        "--parsing",    face(0, "_parsing.png").string(),
                                        "--canon-size", "128",        "--out",
                                        out.string(),   "--stats",    stats.string()};
    const Outcome r = run_cli(args);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_png_rgba(out).size(), (Size{128, 128}));
    const auto j = nlohmann::json::parse(std::ifstream(stats));
    EXPECT_TRUE(j.contains("skin_tone_lab"));
    const auto first = read_file(out);
    ASSERT_EQ(run_cli(args).code, 0);
    EXPECT_EQ(read_file(out), first);
    auto bad = args;
    bad.push_back("--k");
    bad.push_back("1");
    EXPECT_EQ(run_cli(bad).code, cli::kUsage);
}

TEST_F(CliFixture, DataErrorsExitTwo) {
    const fs::path junk = *root / "junk.png";
    std::ofstream(junk) << "not a png";
    const Outcome r = run_cli({"extract", "--photo", junk.string(), "--landmarks", face(0, ".json").string(),
                               "--parsing", face(0, "_parsing.png").string(), "--out",
                               (*root / "x.png").string()});
    EXPECT_EQ(r.code, cli::kDataError);
    EXPECT_NE(r.err.find("decode"), std::string::npos);
    // Parsing without eye labels.
    write_png(*root / "blank_parsing.png", LabelMap(128, 128, 1));
    const Outcome m = run_cli({"extract", "--photo", face(0, ".png").string(), "--landmarks",
                               face(0, ".json").string(), "--parsing", (*root / "blank_parsing.png").string(),
                               "--out", (*root / "x.png").string()});
    EXPECT_EQ(m.code, cli::kDataError);
    EXPECT_NE(m.err.find("missing_region"), std::string::npos);
}

TEST_F(CliFixture, PairIsReproducibleAcrossWorkers) {
    const auto run_pair = [&](const std::string& name, const std::string& workers) {
        const fs::path out = *root / name;
        const Outcome r = run_cli({"pair", "--faces", (faces() / "faces.jsonl").string(), "--out", out.string(),
                                   "--seed", "9", "--workers", workers, "--canon-size", "128"});
        EXPECT_EQ(r.code, 0) << r.err;
        return tree_hashes(out);
    };
    const auto a = run_pair("pair_a", "1");
    EXPECT_EQ(a.size(), 4u * 3u * 2u + 2u);
    EXPECT_EQ(a, run_pair("pair_b", "1"));
    EXPECT_EQ(a, run_pair("pair_c", "8"));
}

TEST_F(CliFixture, ApplyAndAlphaScale) {
    const auto apply = [&](const std::string& out, std::vector<std::string> extra) {
        std::vector<std::string> args{"apply",     "--mask",      mask().string(), "--image",
                                      face(1, ".png").string(),  "--landmarks",   face(1, ".json").string(),
                                      "--parsing", face(1, "_parsing.png").string(), "--out", (*root / out).string()};
        args.insert(args.end(), extra.begin(), extra.end());
        return run_cli(args);
    };
    ASSERT_EQ(apply("applied.png", {}).code, 0);
    ASSERT_EQ(apply("applied2.png", {}).code, 0);
    EXPECT_EQ(read_file(*root / "applied.png"), read_file(*root / "applied2.png"));
    EXPECT_NE(read_png_rgb(*root / "applied.png"), read_png_rgb(face(1, ".png")));
    ASSERT_EQ(apply("zero.png", {"--alpha-scale", "0"}).code, 0);
    EXPECT_EQ(read_png_rgb(*root / "zero.png"), read_png_rgb(face(1, ".png")));
    EXPECT_EQ(apply("bad.png", {"--alpha-scale", "2.5"}).code, cli::kUsage);
}

TEST_F(CliFixture, VideoOutputsMatchAcrossWorkers) {
    const auto run_video = [&](const std::string& name, const std::string& workers) {
        const fs::path out = *root / name;
        const Outcome r = run_cli({"video", "--mask", mask().string(), "--frames", faces().string(), "--out",
                                   out.string(), "--workers", workers});
        EXPECT_EQ(r.code, 0) << r.err;
        return out;
    };
    const fs::path a = run_video("video_a", "1");
    const fs::path b = run_video("video_b", "8");
    const auto ha = tree_hashes(a, "timing.json");
    EXPECT_EQ(ha.size(), 4u);
    EXPECT_EQ(ha, tree_hashes(b, "timing.json"));
    const auto timing = nlohmann::json::parse(std::ifstream(a / "timing.json"));
    EXPECT_EQ(timing["frames"], 4);
    EXPECT_GT(timing["fps"].get<double>(), 0.0);
}

TEST(Cli, EvalIsDeterministicAcrossWorkers) {
    const auto eval = [](const std::string& workers) {
        const Outcome r = run_cli({"eval", "--synthetic", "3", "--face-size", "128", "--canon-size", "128",
                                   "--pairs", "3", "--seed", "2", "--workers", workers});
        EXPECT_EQ(r.code, 0) << r.err;
        return r.out;
    };
    const std::string a = eval("1");
    const auto j = nlohmann::json::parse(a);
    EXPECT_EQ(j["n_pairs"], 3);
    EXPECT_EQ(a, eval("1"));
    EXPECT_EQ(a, eval("8"));
    const Outcome oracle = run_cli({"eval", "--synthetic", "3", "--face-size", "128", "--canon-size", "128",
                                    "--pairs", "2", "--mode", "oracle"});
    ASSERT_EQ(oracle.code, 0);
    EXPECT_TRUE(nlohmann::json::parse(oracle.out)["psnr_infinite"].get<bool>());
    EXPECT_EQ(run_cli({"eval", "--mode", "neural"}).code, cli::kUsage);
}

TEST(Cli, LossesCheckPassesAndFailsWithExitThree) {
    const fs::path out = fixtures::scratch_dir("cli_losses") / "vectors.json";
    const Outcome r = run_cli({"losses-check", "--seeds", "3", "--out", out.string()});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("recon_alpha_weighted max_rel_error="), std::string::npos);
    EXPECT_TRUE(nlohmann::json::parse(std::ifstream(out))["passed"].get<bool>());
    // A coarse step cannot meet a tight tolerance on the non-quadratic losses.
    EXPECT_EQ(run_cli({"losses-check", "--seeds", "2", "--step", "0.3", "--tolerance", "1e-12"}).code,
              cli::kInternal);
}
