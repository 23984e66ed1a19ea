#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>
#include <unistd.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& tag) {
    auto p = fs::temp_directory_path() / ("ppgbench_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " \"" PPGBENCH_CLI "\" " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
    std::ofstream(p, std::ios::binary) << s;
}

} // namespace

TEST(Cli, ExitCodes) {
    EXPECT_EQ(run("frobnicate"), 1);
    EXPECT_EQ(run("split --bundle /nonexistent/bundle --out /tmp --scenario calibfree"), 1);
    const auto dir = scratch("codes");
    spit(dir / "bad.json", "{\"n_subjects\": 4, \"no_such_key\": 1}");
    EXPECT_EQ(run("synth --config " + (dir / "bad.json").string() + " --out " + (dir / "b").string()), 1);
    spit(dir / "broken.json", "{ not json");
    EXPECT_EQ(run("synth --config " + (dir / "broken.json").string() + " --out " + (dir / "b").string()), 1);
    fs::remove_all(dir);
}

TEST(Cli, SynthThenSplit) {
    const auto dir = scratch("split");
    const auto b = dir / "bundle";
    ASSERT_EQ(run("synth --out " + b.string() + " --n-subjects 12 --segments-per-subject 3 --segment-length 64 --seed 4"), 0);
    for (auto f : {"manifest.json", "records.csv", "waveforms.f32le", "run_manifest.json"}) EXPECT_TRUE(fs::exists(b / f)) << f;
    ASSERT_EQ(run("split --bundle " + b.string() + " --scenario calibfree --out " + (dir / "s").string()), 0);
    EXPECT_TRUE(fs::exists(dir / "s" / "split.csv"));
    const auto manifest = json::parse(slurp(dir / "s" / "run_manifest.json"));
    EXPECT_EQ(manifest["command"], "split");
    EXPECT_TRUE(manifest.contains("config_hash"));
    fs::remove_all(dir);
}

TEST(Cli, SeedPrecedence) {
    const auto dir = scratch("seed");
    const std::string common = " --n-subjects 4 --segments-per-subject 2 --segment-length 32";
    auto waves = [&](const std::string& name) { return slurp(dir / name / "waveforms.f32le"); };

    ASSERT_EQ(run("synth --out " + (dir / "flag7").string() + common + " --seed 7"), 0);
    ASSERT_EQ(run("synth --out " + (dir / "env7").string() + common, "PPGBENCH_SEED=7"), 0);
    ASSERT_EQ(run("synth --out " + (dir / "flag_over_env").string() + common + " --seed 7", "PPGBENCH_SEED=9"), 0);
    ASSERT_EQ(run("synth --out " + (dir / "none").string() + common, "env -u PPGBENCH_SEED"), 0);
    ASSERT_EQ(run("synth --out " + (dir / "flag0").string() + common + " --seed 0"), 0);
    spit(dir / "cfg.json", "{\"seed\": 7}");
    ASSERT_EQ(run("synth --config " + (dir / "cfg.json").string() + " --out " + (dir / "cfg7").string() + common,
                  "PPGBENCH_SEED=9"),
              0);
    ASSERT_EQ(run("synth --config " + (dir / "cfg.json").string() + " --out " + (dir / "flag3").string() + common +
                  " --seed 3"),
              0);
    ASSERT_EQ(run("synth --out " + (dir / "plain3").string() + common + " --seed 3"), 0);

    EXPECT_EQ(waves("flag7"), waves("env7"));
    EXPECT_EQ(waves("flag7"), waves("flag_over_env"));
    EXPECT_EQ(waves("flag7"), waves("cfg7"));  // config beats environment
    EXPECT_EQ(waves("flag3"), waves("plain3"));  // flag beats config
    EXPECT_EQ(waves("none"), waves("flag0"));
    EXPECT_NE(waves("flag7"), waves("flag0"));
    EXPECT_EQ(run("synth --out " + (dir / "bad").string() + common, "PPGBENCH_SEED=abc"), 1);
    fs::remove_all(dir);
}

TEST(Cli, IdenticalHistogramsGiveUnitWeights) {
    const auto dir = scratch("weights");
    spit(dir / "h.json", R"({"low": 100.0, "high": 106.0, "bin_width": 2.0, "values": [0.2, 0.5, 0.3]})");
    ASSERT_EQ(run("weights --train-hist " + (dir / "h.json").string() + " --test-hist " + (dir / "h.json").string() +
                  " --out " + (dir / "w").string()),
              0);
    const auto w = json::parse(slurp(dir / "w" / "weights.json"));
    ASSERT_EQ(w["values"].size(), 3u);
    for (const auto& x : w["values"]) EXPECT_EQ(x.get<double>(), 1.0);
    fs::remove_all(dir);
}

TEST(Cli, GridIsReproducible) {
    const auto dir = scratch("grid");
    const json cfg = {
        {"name", "cli"},
        {"bundles",
         {{"a", {{"synth", {{"n_subjects", 8}, {"segments_per_subject", 3}, {"segment_length", 32}, {"seed", 1}}}}},
          {"b", {{"synth", {{"n_subjects", 6}, {"segments_per_subject", 2}, {"segment_length", 32}, {"seed", 2}, {"sbp_mean", 135.0}}}}}}},
        {"training_sets", json::array({{{"name", "a"}, {"bundle", "a"}, {"split", {{"scenario", "calibfree"}}}}})},
        {"test_sets", json::array({{{"name", "a"}, {"bundle", "a"}, {"split_from", "a"}}, {{"name", "b"}, {"bundle", "b"}}})},
        {"model", {{"architecture", "lenet1d"}, {"width_multiplier", 0.125}}},
        {"train", {{"epochs", 2}, {"micro_batch_size", 8}, {"effective_batch_size", 8}, {"learning_rate", 0.001}}},
    };
    spit(dir / "exp.json", cfg.dump(2));
    ASSERT_EQ(run("grid --config " + (dir / "exp.json").string() + " --out " + (dir / "r1").string()), 0);
    ASSERT_EQ(run("grid --config " + (dir / "exp.json").string() + " --out " + (dir / "r2").string() + " --jobs 2"), 0);
    const auto g1 = slurp(dir / "r1" / "grid.csv");
    EXPECT_FALSE(g1.empty());
    EXPECT_EQ(g1, slurp(dir / "r2" / "grid.csv"));
    for (auto f : {"grid.md", "mase_plotdata.csv", "emd_scatter.csv", "run_manifest.json"}) EXPECT_TRUE(fs::exists(dir / "r1" / f)) << f;
    fs::remove_all(dir);
}
