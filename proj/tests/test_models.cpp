#include "ppgbench/errors.hpp"
#include "ppgbench/models.hpp"

#include <gtest/gtest.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

using namespace ppgbench;
using namespace ppgbench::models;
using nn::Tensor;

namespace {

Tensor random_batch(std::size_t n, std::size_t l, std::uint64_t seed) {
    Tensor t(n, 1, l);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, 1.0);
    for (auto& v : t.values()) v = d(rng);
    return t;
}

// Plain weighted sum of squares over the two outputs.
LossFn sse(Predictions targets, std::vector<double> w) {
    return [targets, w](const Predictions& p, Predictions& g) {
        g.assign(p.size(), {});
        double loss = 0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double es = p[i].sbp - targets[i].sbp, ed = p[i].dbp - targets[i].dbp;
            loss += w[i] * (es * es + ed * ed);
            g[i] = {2 * w[i] * es, 2 * w[i] * ed};
        }
        return loss;
    };
}

Predictions random_targets(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, 1.0);
    Predictions t(n);
    for (auto& p : t) p = {d(rng), d(rng)};
    return t;
}

struct Variant {
    Architecture arch;
    double width;
    std::size_t length;
};

// Small enough for a finite-difference check (< 5k parameters).
const std::vector<Variant> kTiny = {
    {Architecture::LeNet1D, 0.125, 32},     {Architecture::XResNet1d50, 1.0 / 128, 64},
    {Architecture::XResNet1d101, 1.0 / 128, 64}, {Architecture::Inception1D, 1.0 / 16, 32},
    {Architecture::S4, 1.0 / 16, 32},
};

std::size_t lenet_count(double w) {
    // conv k5 (1->c1, c1->c2) with bias, linear c2->h, linear h->2
    const std::size_t c1 = std::max<long>(1, std::lround(32 * w)), c2 = std::max<long>(1, std::lround(64 * w)),
                      h = std::max<long>(1, std::lround(128 * w));
    return (c1 * 5 + c1) + (c2 * c1 * 5 + c2) + (c2 * h + h) + (h * 2 + 2);
}

} // namespace

TEST(Build, SameSeedSameParameters) {
    for (auto arch : all_architectures()) {
        ModelSpec s{arch, 0.125, 1, 42};
        auto a = build_model(s), b = build_model(s);
        EXPECT_EQ(a.parameters(), b.parameters()) << to_string(arch);
        s.seed = 43;
        EXPECT_NE(a.parameters(), build_model(s).parameters()) << to_string(arch);
    }
}

TEST(Build, LeNetQuarterWidthCount) {
    auto m = build_model({Architecture::LeNet1D, 0.25, 1, 0});
    EXPECT_EQ(m.parameter_count(), lenet_count(0.25));
    EXPECT_LT(m.parameter_count(), 10000u);
    EXPECT_EQ(build_model({Architecture::LeNet1D, 1.0, 1, 0}).parameter_count(), lenet_count(1.0));
}

TEST(Build, DeeperResNetHasMoreParameters) {
    for (double w : {0.125, 1.0})
        EXPECT_GT(build_model({Architecture::XResNet1d101, w, 1, 0}).parameter_count(),
                  build_model({Architecture::XResNet1d50, w, 1, 0}).parameter_count());
}

TEST(Build, InvalidSpec) {
    EXPECT_THROW(build_model({Architecture::LeNet1D, 0.0, 1, 0}), ValidationError);
    EXPECT_THROW(build_model({Architecture::LeNet1D, 1.0, 0, 0}), ValidationError);
    EXPECT_THROW(parse_architecture("resnet"), ValidationError);
    for (auto a : all_architectures()) EXPECT_EQ(parse_architecture(to_string(a)), a);
}

TEST(Forward, ShapeAtNativeLengths) {
    for (const auto& v : kTiny) {
        auto m = build_model({v.arch, v.width, 1, 5});
        for (std::size_t l : {262u, 625u, 1250u}) {
            auto p = forward(m, random_batch(3, l, l));
            ASSERT_EQ(p.size(), 3u) << to_string(v.arch) << " L=" << l;
            for (const auto& x : p) EXPECT_TRUE(std::isfinite(x.sbp) && std::isfinite(x.dbp));
        }
    }
}

TEST(Forward, ShapeLawAtMinimumLength) {
    for (const auto& v : kTiny) {
        auto m = build_model({v.arch, v.width, 1, 5});
        const auto lmin = m.minimum_input_length();
        for (std::size_t l : {lmin, lmin + 1, lmin + 7}) EXPECT_EQ(forward(m, random_batch(2, l, 1)).size(), 2u);
    }
}

TEST(Forward, TooShortNamesMinimum) {
    auto m = build_model({Architecture::XResNet1d50, 0.125, 1, 0});
    try {
        forward(m, random_batch(2, 63, 0));
        FAIL() << "expected rejection";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("64"), std::string::npos) << e.what();
    }
    EXPECT_THROW(forward(build_model({Architecture::LeNet1D, 0.25, 1, 0}), random_batch(1, 7, 0)), ValidationError);
    EXPECT_THROW(forward(m, Tensor(2, 3, 128)), ValidationError);  // wrong channel count
}

TEST(Forward, ZeroInputDeterministic) {
    for (auto arch : all_architectures()) {
        auto m = build_model({arch, 0.125, 1, 9});
        Tensor z(4, 1, 128);
        EXPECT_EQ(forward(m, z), forward(m, z)) << to_string(arch);
    }
}

TEST(Forward, OutputScaling) {
    auto m = build_model({Architecture::LeNet1D, 0.25, 1, 0});
    auto x = random_batch(2, 64, 3);
    const auto raw = forward(m, x);
    m.set_output_scaling({120, 70}, {15, 10});
    const auto scaled_out = forward(m, x);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_NEAR(scaled_out[i].sbp, raw[i].sbp * 15 + 120, 1e-9);
        EXPECT_NEAR(scaled_out[i].dbp, raw[i].dbp * 10 + 70, 1e-9);
    }
}

TEST(Gradients, ZeroWeightsGiveZeroGradients) {
    for (const auto& v : kTiny) {
        auto m = build_model({v.arch, v.width, 1, 1});
        auto g = gradients(m, random_batch(4, v.length, 2), sse(random_targets(4, 3), std::vector<double>(4, 0.0)));
        EXPECT_EQ(g.loss, 0.0);
        for (const auto& arr : g.grads)
            for (double x : arr) ASSERT_EQ(x, 0.0) << to_string(v.arch);
    }
}

TEST(Gradients, DoublingLossDoublesGradients) {
    for (const auto& v : kTiny) {
        auto m = build_model({v.arch, v.width, 1, 1});
        auto x = random_batch(4, v.length, 2);
        auto t = random_targets(4, 3);
        auto g1 = gradients(m, x, sse(t, {1, 0.5, 2, 1}));
        auto g2 = gradients(m, x, sse(t, {2, 1, 4, 2}));
        EXPECT_EQ(g2.loss, 2 * g1.loss);
        for (std::size_t i = 0; i < g1.grads.size(); ++i)
            for (std::size_t j = 0; j < g1.grads[i].size(); ++j)
                ASSERT_EQ(g2.grads[i][j], 2 * g1.grads[i][j]) << to_string(v.arch);
    }
}

TEST(Gradients, NonFiniteLossCarriesBatchIndex) {
    auto m = build_model({Architecture::LeNet1D, 0.25, 1, 0});
    LossFn bad = [](const Predictions& p, Predictions& g) {
        g.assign(p.size(), {});
        return std::nan("");
    };
    try {
        gradients(m, random_batch(2, 32, 0), bad, 17);
        FAIL();
    } catch (const NonFiniteLoss& e) {
        EXPECT_EQ(e.batch_index(), 17u);
    }
}

// Central differences on 20 random parameter entries per architecture, with
// all parameters jittered so that zero-initialised gammas and biases are live.
TEST(Gradients, FiniteDifferenceCheck) {
    for (const auto& v : kTiny) {
        auto m = build_model({v.arch, v.width, 1, 7});
        ASSERT_LT(m.parameter_count(), 5000u) << to_string(v.arch);
        std::mt19937_64 rng(99);
        std::normal_distribution<double> jitter(0.0, 0.1);
        for (auto& p : m.parameters())
            for (auto& x : p.values) x += jitter(rng);
        const auto x = random_batch(4, v.length, 11);
        const auto loss = sse(random_targets(4, 12), {1.0, 0.7, 1.3, 0.9});
        const auto analytic = gradients(m, x, loss);

        std::vector<std::pair<std::size_t, std::size_t>> all;
        for (std::size_t i = 0; i < m.parameters().size(); ++i)
            for (std::size_t j = 0; j < m.parameters()[i].values.size(); ++j) all.emplace_back(i, j);
        std::shuffle(all.begin(), all.end(), rng);
        double worst = 0;
        const double h = 1e-6;  // small enough not to straddle ReLU kinks; the model runs in double
        for (std::size_t k = 0; k < 20; ++k) {
            auto [i, j] = all[k];
            auto& val = m.parameters()[i].values[j];
            const double orig = val;
            val = orig + h;
            const double lp = gradients(m, x, loss).loss;
            val = orig - h;
            const double lm = gradients(m, x, loss).loss;
            val = orig;
            const double num = (lp - lm) / (2 * h), ana = analytic.grads[i][j];
            const double rel = std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-6});
            worst = std::max(worst, rel);
            EXPECT_LT(rel, 1e-3) << to_string(v.arch) << " " << m.parameters()[i].name << "[" << j
                                 << "] analytic=" << ana << " numeric=" << num;
        }
        RecordProperty(to_string(v.arch) + "_max_rel_err", std::to_string(worst));
    }
}

TEST(BatchStats, CommitMovesRunningBuffers) {
    auto m = build_model({Architecture::XResNet1d50, 1.0 / 32, 1, 0});
    auto before = m.buffers();
    auto g = gradients(m, random_batch(4, 64, 1), sse(random_targets(4, 2), {1, 1, 1, 1}));
    EXPECT_EQ(m.buffers(), before);  // gradients leave the model untouched
    commit_batch_statistics(m, g);
    EXPECT_NE(m.buffers(), before);
}

TEST(Checkpoint, RoundTrip) {
    auto dir = std::filesystem::temp_directory_path() / ("ppgbench_ckpt_" + std::to_string(::getpid()));
    for (auto arch : all_architectures()) {
        auto m = build_model({arch, 0.125, 1, 3});
        m.set_output_scaling({118.25, 64.5}, {17.0, 11.5});
        std::filesystem::remove_all(dir);
        save_checkpoint(m, dir);
        auto back = load_checkpoint(dir);
        EXPECT_EQ(back.spec(), m.spec());
        ASSERT_EQ(back.parameters().size(), m.parameters().size());
        // float32 storage
        for (std::size_t i = 0; i < m.parameters().size(); ++i)
            for (std::size_t j = 0; j < m.parameters()[i].values.size(); ++j)
                ASSERT_EQ(back.parameters()[i].values[j],
                          static_cast<double>(static_cast<float>(m.parameters()[i].values[j])));
        EXPECT_EQ(back.output_offset(), m.output_offset());
        // a reloaded checkpoint is a fixed point
        auto dir2 = dir.string() + "_2";
        save_checkpoint(back, dir2);
        EXPECT_EQ(load_checkpoint(dir2).parameters(), back.parameters());
        std::filesystem::remove_all(dir2);
    }
    std::filesystem::remove_all(dir);
}

TEST(Checkpoint, MissingBlobIsLoadError) {
    auto dir = std::filesystem::temp_directory_path() / ("ppgbench_ckpt_bad_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    auto m = build_model({Architecture::LeNet1D, 0.25, 1, 3});
    save_checkpoint(m, dir);
    std::filesystem::remove(dir / (m.parameters()[0].name + ".f32le"));
    EXPECT_THROW(load_checkpoint(dir), LoadError);
    std::filesystem::remove_all(dir);
}
