#include "oracles.hpp"

#include "ppgbench/adaptation.hpp"
#include "ppgbench/errors.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace ppgbench;
using namespace ppgbench::adaptation;

namespace {

LabelHistogram hist(std::vector<double> mass, double low = 100.0, double width = 2.0) {
    LabelHistogram h;
    h.binning = {low, low + width * static_cast<double>(mass.size()), width};
    h.mass = std::move(mass);
    return h;
}

std::vector<double> random_mass(std::size_t n, std::mt19937_64& rng, double p_zero = 0.2) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> m(n);
    double s = 0;
    for (auto& x : m) s += x = u(rng) < p_zero ? 0.0 : u(rng);
    if (s == 0) m[0] = s = 1.0;
    for (auto& x : m) x /= s;
    return m;
}

data::SegmentRecord rec(double sbp, double dbp) {
    data::SegmentRecord r;
    r.sbp = sbp;
    r.dbp = dbp;
    return r;
}

} // namespace

TEST(Histogram, AllAtOneCentre) {
    const auto b = HistogramBinning::sbp_default();
    std::vector<double> v(50, b.center(30));
    auto h = build_histogram(v, b);
    for (std::size_t i = 0; i < h.mass.size(); ++i) EXPECT_EQ(h.mass[i], i == 30 ? 1.0 : 0.0);
}

TEST(Histogram, HalfOpenBins) {
    HistogramBinning b{100.0, 120.0, 2.0};
    std::vector<double> v{100.0, 102.0};
    auto h = build_histogram(v, b);
    EXPECT_EQ(h.mass[0], 0.5);
    EXPECT_EQ(h.mass[1], 0.5);
    EXPECT_EQ(b.bin_of(101.999), 0u);
    EXPECT_EQ(b.bin_of(120.0), 9u);  // closed last bin
}

TEST(Histogram, OutOfRangeClips) {
    HistogramBinning b{100.0, 120.0, 2.0};
    std::vector<double> v{20.0, 500.0};
    auto h = build_histogram(v, b);
    EXPECT_EQ(h.mass.front(), 0.5);
    EXPECT_EQ(h.mass.back(), 0.5);
}

TEST(Histogram, NormalMean) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> d(115.62, 18.92);
    std::vector<double> v(10000);
    for (auto& x : v) x = d(rng);
    const double sample_mean = std::accumulate(v.begin(), v.end(), 0.0) / 10000.0;
    auto h = build_histogram(v, HistogramBinning::sbp_default());
    EXPECT_NEAR(h.mean(), 115.62, 1.0);
    EXPECT_NEAR(h.mean(), sample_mean, 1.0);  // binning costs at most half a bin
}

TEST(Histogram, EmptyAndBadBinning) {
    std::vector<double> none;
    EXPECT_THROW(build_histogram(none, HistogramBinning::sbp_default()), ValidationError);
    EXPECT_THROW((HistogramBinning{100, 90, 2}).validate(), ValidationError);
    EXPECT_THROW((HistogramBinning{100, 110, 0}).validate(), ValidationError);
}

TEST(Weights, Examples) {
    auto w = compute_weights(hist({0.5, 0.5}), hist({0.25, 0.75}), 1.0);
    EXPECT_EQ(w.weight, (std::vector<double>{1.0, 1.5}));
    auto same = compute_weights(hist({0.2, 0.3, 0.5}), hist({0.2, 0.3, 0.5}), 1.0);
    EXPECT_EQ(same.weight, (std::vector<double>{1.0, 1.0, 1.0}));
    auto empty_train = compute_weights(hist({0.0, 1.0}), hist({0.3, 0.7}), 1.0);
    EXPECT_EQ(empty_train.weight[0], 1.0);
    auto low_tau = compute_weights(hist({0.0, 0.5, 0.5}), hist({0.3, 0.1, 0.6}), 0.25);
    EXPECT_EQ(low_tau.weight, (std::vector<double>{0.25, 0.25, 1.2}));
}

TEST(Weights, MismatchedBinningRejected) {
    EXPECT_THROW(compute_weights(hist({0.5, 0.5}), hist({0.5, 0.5}, 90.0), 1.0), ValidationError);
    EXPECT_THROW(compute_weights(hist({0.5, 0.5}), hist({0.5, 0.5}), -1.0), ValidationError);
}

TEST(AssignWeights, LookupAndClipping) {
    HistogramBinning b{100.0, 104.0, 2.0};
    WeightTable sbp{b, {2.0, 1.5}, 1.0};
    WeightTable dbp{b, {1.0, 3.0}, 1.0};
    std::vector<data::SegmentRecord> recs{rec(103.0, 101.0), rec(50.0, 400.0)};
    auto w = assign_weights(recs, sbp, dbp);
    EXPECT_EQ(w[0], (SampleWeight{1.5, 1.0}));
    EXPECT_EQ(w[1], (SampleWeight{2.0, 3.0}));  // below low -> first bin, above high -> last
}

TEST(AssignWeights, IdenticalDistributionsGiveOnes) {
    std::vector<data::SegmentRecord> recs;
    std::vector<double> s, d;
    for (int i = 0; i < 40; ++i) {
        recs.push_back(rec(100 + i, 60 + i / 2.0));
        s.push_back(100 + i);
        d.push_back(60 + i / 2.0);
    }
    auto hs = build_histogram(s, HistogramBinning::sbp_default());
    auto hd = build_histogram(d, HistogramBinning::dbp_default());
    for (const auto& w : assign_weights(recs, compute_weights(hs, hs), compute_weights(hd, hd)))
        EXPECT_EQ(w, (SampleWeight{1.0, 1.0}));
}

TEST(Emd, Examples) {
    auto a = hist({0.1, 0.4, 0.5});
    EXPECT_EQ(emd(a, a), 0.0);
    HistogramBinning b{40.0, 220.0, 2.0};
    std::vector<double> at100{100.0}, at110{110.0};
    EXPECT_DOUBLE_EQ(emd(build_histogram(at100, b), build_histogram(at110, b)), 10.0);
    EXPECT_THROW(emd(hist({0.5, 0.5}), hist({0.5, 0.5}, 102.0)), ValidationError);
}

TEST(Emd, MatchesTransportLpOnSixBins) {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 25; ++t) {
        auto a = random_mass(6, rng), b = random_mass(6, rng);
        EXPECT_NEAR(emd(hist(a), hist(b)), oracle::transport_emd(a, b, 2.0), 1e-9);
    }
}

TEST(Emd, MonotoneInShift) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> d(0, 10);
    std::vector<double> base(3000);
    for (auto& x : base) x = 120 + d(rng);
    auto shifted = [&](double s) {
        auto v = base;
        for (auto& x : v) x += s;
        return build_histogram(v, HistogramBinning::sbp_default());
    };
    const auto h0 = shifted(0);
    EXPECT_LT(emd(h0, shifted(5)), emd(h0, shifted(20)));
    EXPECT_NEAR(emd(h0, shifted(20)), 20.0, 0.5);
}

TEST(Json, RoundTrip) {
    auto h = hist({0.125, 0.375, 0.5});
    auto back = histogram_from_json(to_json(h));
    EXPECT_EQ(back.binning, h.binning);
    EXPECT_EQ(back.mass, h.mass);
    auto w = compute_weights(hist({0.3, 0.3, 0.4}), h, 0.5);
    auto wb = weights_from_json(to_json(w));
    EXPECT_EQ(wb.weight, w.weight);
    EXPECT_EQ(wb.tau, 0.5);
    EXPECT_THROW(histogram_from_json("{\"low\": 1}"), ValidationError);
}
