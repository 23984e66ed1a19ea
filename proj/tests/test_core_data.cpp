#include "ppgbench/core_data.hpp"
#include "ppgbench/errors.hpp"

#include <gtest/gtest.h>
#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>

namespace fs = std::filesystem;
using namespace ppgbench;
using namespace ppgbench::data;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("ppgbench_core_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void dump(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out << bytes;
}

SynthConfig small_config() {
    SynthConfig c;
    c.n_subjects = 6;
    c.segments_per_subject = 4;
    c.segment_length = 128;
    c.seed = 11;
    return c;
}

std::string f32_blob(const std::vector<float>& v) {
    std::string s;
    for (float x : v) append_f32le(s, x);
    return s;
}

bool has_kind(const ValidationReport& r, const std::string& kind) {
    for (const auto& v : r.violations)
        if (v.kind == kind) return true;
    return false;
}

} // namespace

TEST(Synth, SameConfigGivesByteIdenticalBundles) {
    auto dir = scratch("det");
    const auto c = small_config();
    write_bundle(generate_synthetic(c), dir / "a");
    write_bundle(generate_synthetic(c), dir / "b");
    for (const char* f : {"manifest.json", "records.csv", "waveforms.f32le"})
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    fs::remove_all(dir);
}

TEST(Synth, DifferentSeedsDiffer) {
    auto c = small_config();
    auto a = generate_synthetic(c);
    c.seed = 12;
    EXPECT_NE(a, generate_synthetic(c));
}

TEST(Synth, GeneratedBundleIsValid) {
    auto b = generate_synthetic(small_config());
    EXPECT_TRUE(validate_bundle(b).ok()) << validate_bundle(b).summary();
    EXPECT_EQ(b.records.size(), 24u);
    EXPECT_EQ(b.waveform_length(), 128u);
}

TEST(Synth, LabelMomentsMatchTargets) {
    SynthConfig c;
    c.n_subjects = 5000;
    c.segments_per_subject = 1;
    c.segment_length = 16;
    c.sbp_mean = 115.62;
    c.sbp_sd = 18.92;
    c.dbp_mean = 63.03;
    c.dbp_sd = 12.05;
    c.seed = 3;
    auto b = generate_synthetic(c);
    ASSERT_EQ(b.records.size(), 5000u);
    auto moments = [&](bool sbp) {
        double s = 0, ss = 0;
        for (const auto& r : b.records) s += sbp ? r.sbp : r.dbp;
        const double m = s / 5000.0;
        for (const auto& r : b.records) ss += std::pow((sbp ? r.sbp : r.dbp) - m, 2);
        return std::pair{m, std::sqrt(ss / 4999.0)};
    };
    auto [ms, ss] = moments(true);
    auto [md, sd] = moments(false);
    EXPECT_NEAR(ms, 115.62, 0.02 * 115.62);
    EXPECT_NEAR(ss, 18.92, 0.02 * 18.92);
    EXPECT_NEAR(md, 63.03, 0.02 * 63.03);
    EXPECT_NEAR(sd, 12.05, 0.02 * 12.05);
}

TEST(Synth, InvalidConfigRejected) {
    auto c = small_config();
    c.n_subjects = 0;
    EXPECT_THROW(generate_synthetic(c), ValidationError);
    c = small_config();
    c.morphology_coupling = 1.5;
    EXPECT_THROW(generate_synthetic(c), ValidationError);
    c = small_config();
    c.sbp_sd = -1;
    EXPECT_THROW(generate_synthetic(c), ValidationError);
}

TEST(BundleIo, RoundTrip) {
    auto dir = scratch("rt");
    auto b = generate_synthetic(small_config());
    b.provenance["origin"] = "unit test";
    write_bundle(b, dir);
    EXPECT_EQ(load_bundle(dir), b);
    fs::remove_all(dir);
}

TEST(BundleIo, TruncatedBlob) {
    auto dir = scratch("trunc");
    write_bundle(generate_synthetic(small_config()), dir);
    auto blob = slurp(dir / "waveforms.f32le");
    blob.pop_back();
    dump(dir / "waveforms.f32le", blob);
    try {
        load_bundle(dir);
        FAIL() << "expected LoadError";
    } catch (const LoadError& e) {
        EXPECT_NE(std::string(e.what()).find("blob size mismatch"), std::string::npos) << e.what();
    }
    fs::remove_all(dir);
}

TEST(BundleIo, DuplicateIdNamed) {
    auto dir = scratch("dup");
    auto b = generate_synthetic(small_config());
    write_bundle(b, dir);
    // rewrite the second data row with the first row's id
    auto csv = slurp(dir / "records.csv");
    const auto first_id = b.records[0].segment_id, second_id = b.records[1].segment_id;
    const auto pos = csv.find("\n" + second_id + ",");
    ASSERT_NE(pos, std::string::npos);
    csv.replace(pos + 1, second_id.size(), first_id);
    dump(dir / "records.csv", csv);
    try {
        load_bundle(dir);
        FAIL() << "expected LoadError";
    } catch (const LoadError& e) {
        EXPECT_EQ(e.record(), first_id);
        EXPECT_NE(std::string(e.what()).find(first_id), std::string::npos);
    }
    fs::remove_all(dir);
}

TEST(BundleIo, CorruptManifest) {
    auto dir = scratch("corrupt");
    write_bundle(generate_synthetic(small_config()), dir);
    dump(dir / "manifest.json", "{ not json");
    EXPECT_THROW(load_bundle(dir), LoadError);
    fs::remove_all(dir);
}

TEST(Ingest, TwoRows) {
    auto dir = scratch("ingest");
    std::vector<float> samples(2 * 625);
    for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = static_cast<float>(std::sin(0.01 * i));
    dump(dir / "w.f32le", f32_blob(samples));
    dump(dir / "m.csv",
         "segment_id,subject_id,source,sbp,dbp,offset,length\n"
         "a,s1,ext,120,80,0,625\n"
         "b,s2,ext,130,85,625,625\n");
    auto b = ingest_csv(dir / "m.csv", dir / "w.f32le");
    ASSERT_EQ(b.records.size(), 2u);
    EXPECT_EQ(b.waveform_length(), 625u);
    EXPECT_EQ(b.records[1].waveform[0], samples[625]);
    EXPECT_DOUBLE_EQ(b.records[1].sbp, 130.0);
    fs::remove_all(dir);
}

TEST(Ingest, SbpBelowDbpRejected) {
    auto dir = scratch("order");
    dump(dir / "w.f32le", f32_blob(std::vector<float>(20, 0.5f)));
    dump(dir / "m.csv",
         "segment_id,subject_id,source,sbp,dbp,offset,length\n"
         "a,s1,ext,80,90,0,10\n"
         "b,s2,ext,120,80,10,10\n");
    try {
        ingest_csv(dir / "m.csv", dir / "w.f32le");
        FAIL() << "expected rejection";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("sbp must exceed dbp"), std::string::npos) << e.what();
    }
    fs::remove_all(dir);
}

TEST(Ingest, OverlapRejected) {
    auto dir = scratch("overlap");
    dump(dir / "w.f32le", f32_blob(std::vector<float>(20, 0.5f)));
    dump(dir / "m.csv",
         "segment_id,subject_id,source,sbp,dbp,offset,length\n"
         "a,s1,ext,120,80,0,10\n"
         "b,s2,ext,120,80,9,10\n");
    EXPECT_THROW(ingest_csv(dir / "m.csv", dir / "w.f32le"), LoadError);
    fs::remove_all(dir);
}

TEST(Validate, NaNSample) {
    auto b = generate_synthetic(small_config());
    b.records[3].waveform[7] = std::numeric_limits<float>::quiet_NaN();
    auto r = validate_bundle(b);
    ASSERT_EQ(r.violations.size(), 1u);
    EXPECT_EQ(r.violations[0].kind, "non-finite waveform");
    EXPECT_EQ(r.violations[0].record, b.records[3].segment_id);
    EXPECT_THROW(require_valid(b), ValidationError);
}

TEST(Validate, MixedLengths) {
    auto b = generate_synthetic(small_config());
    b.records[2].waveform.resize(100);
    EXPECT_TRUE(has_kind(validate_bundle(b), "length heterogeneity"));
}

TEST(Validate, LabelOrderingAndDuplicates) {
    auto b = generate_synthetic(small_config());
    b.records[0].dbp = b.records[0].sbp + 1;
    b.records[1].segment_id = b.records[2].segment_id;
    auto r = validate_bundle(b);
    EXPECT_TRUE(has_kind(r, "label ordering"));
    EXPECT_TRUE(has_kind(r, "duplicate segment id"));
}

TEST(FormatExact, RoundTrips) {
    for (double v : {0.1, 1.0 / 3.0, 115.62, -3.5e-17, 1e300})
        EXPECT_EQ(std::stod(format_exact(v)), v);
}
