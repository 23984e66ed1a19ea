#include "ppgbench/errors.hpp"
#include "ppgbench/splits.hpp"

#include <gtest/gtest.h>
#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <random>
#include <set>

using namespace ppgbench;
using namespace ppgbench::splits;
using data::DatasetBundle;

namespace {

DatasetBundle grid_bundle(std::size_t subjects, std::size_t per_subject, std::uint64_t seed = 1,
                          double sbp_sd = 18.92) {
    data::SynthConfig c;
    c.sbp_sd = sbp_sd;
    c.n_subjects = subjects;
    c.segments_per_subject = per_subject;
    c.segment_length = 8;
    c.seed = seed;
    return data::generate_synthetic(c);
}

bool has(const std::vector<SplitViolation>& v, const std::string& inv) {
    return std::any_of(v.begin(), v.end(), [&](const auto& x) { return x.invariant == inv; });
}

} // namespace

TEST(MakeSplit, CalibFreeThirdOfSixSubjects) {
    auto b = grid_bundle(6, 10);
    SplitSpec s;
    s.scenario = Scenario::CalibFree;
    s.test_fraction = 0.33;
    s.val_fraction = 0.1;
    s.seed = 4;
    auto a = make_split(b, s);
    EXPECT_TRUE(verify_split(b, a).empty());
    std::set<std::string> test_subjects, train_subjects;
    for (const auto& r : b.records) {
        if (a.role_of.at(r.segment_id) == Role::Test) test_subjects.insert(r.subject_id);
        if (a.role_of.at(r.segment_id) == Role::Train) train_subjects.insert(r.subject_id);
    }
    EXPECT_EQ(test_subjects.size(), 2u);
    EXPECT_EQ(a.indices(b, Role::Test).size(), 20u);
    for (const auto& s : test_subjects) EXPECT_FALSE(train_subjects.count(s));
}

TEST(MakeSplit, CalibEightPlusTwo) {
    auto b = grid_bundle(6, 10);
    SplitSpec s;
    s.scenario = Scenario::Calib;
    s.test_fraction = 0.2;
    s.val_fraction = 0.0001;  // rounds to zero segments per subject
    s.calib_fraction = 0.0;
    auto a = make_split(b, s);
    std::map<std::string, std::map<Role, int>> counts;
    for (const auto& r : b.records) ++counts[r.subject_id][a.role_of.at(r.segment_id)];
    ASSERT_EQ(counts.size(), 6u);
    for (auto& [subject, c] : counts) {
        EXPECT_EQ(c[Role::Train], 8) << subject;
        EXPECT_EQ(c[Role::Test], 2) << subject;
    }
    EXPECT_TRUE(verify_split(b, a).empty());
}

TEST(MakeSplit, CalibSingleSegmentSubjectWarns) {
    auto b = grid_bundle(5, 4);
    b.records.resize(b.records.size() - 3);  // last subject keeps one segment
    SplitSpec s;
    s.scenario = Scenario::Calib;
    s.test_fraction = 0.25;
    auto a = make_split(b, s);
    EXPECT_EQ(a.role_of.at(b.records.back().segment_id), Role::Train);
    ASSERT_EQ(a.warnings.size(), 1u);
    EXPECT_NE(a.warnings[0].find(b.records.back().subject_id), std::string::npos);
}

TEST(MakeSplit, AamiInfeasibleQuota) {
    // 40 subjects x 10 segments; one segment above 160 in each of 20 subjects
    // (5% overall), everything else inside the band. A 4-subject test set can
    // hold at most 4 of the 40 segments in the high tail.
    auto b = grid_bundle(40, 10, 9);
    std::map<std::string, int> seen;
    for (auto& r : b.records) {
        const int k = seen[r.subject_id]++;
        const bool tail = k == 0 && seen.size() <= 20;
        r.sbp = tail ? 175.0 : 130.0;
        r.dbp = 80.0;
    }
    TailQuota q{100.0, 160.0, 0.2};
    std::vector<double> sbp;
    for (const auto& r : b.records) sbp.push_back(r.sbp);
    ASSERT_DOUBLE_EQ(tail_fractions(sbp, q).second, 0.05);

    SplitSpec s;
    s.scenario = Scenario::AAMI;
    s.aami_tail_quota = q;
    try {
        make_split(b, s);
        FAIL() << "expected infeasible quota";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("infeasible AAMI tail quota"), std::string::npos) << e.what();
    }
}

TEST(MakeSplit, AamiQuotaMetWhenFeasible) {
    auto b = grid_bundle(40, 5, 13, 35.0);
    SplitSpec s;
    s.scenario = Scenario::AAMI;
    s.aami_tail_quota.min_tail_fraction = 0.1;
    s.test_fraction = 0.2;
    auto a = make_split(b, s);
    EXPECT_TRUE(verify_split(b, a, s.aami_tail_quota).empty());
}

TEST(VerifySplit, MovedSubjectIsOverlap) {
    auto b = grid_bundle(10, 4);
    SplitSpec s;
    s.test_fraction = 0.2;
    auto a = make_split(b, s);
    // move one test segment into train
    for (const auto& r : b.records)
        if (a.role_of.at(r.segment_id) == Role::Test) {
            a.role_of[r.segment_id] = Role::Train;
            break;
        }
    auto v = verify_split(b, a);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].invariant, "subject overlap");
}

TEST(VerifySplit, DeletedSegmentIsCoverage) {
    auto b = grid_bundle(10, 4);
    auto a = make_split(b, SplitSpec{});
    a.role_of.erase(b.records[5].segment_id);
    EXPECT_TRUE(has(verify_split(b, a), "coverage"));
}

TEST(MakeSplit, RecordOrderDoesNotMatter) {
    for (auto scen : {Scenario::CalibFree, Scenario::AAMI, Scenario::Calib}) {
        auto b = grid_bundle(30, 5, 21, 35.0);  // wide enough for both tails
        SplitSpec s;
        s.scenario = scen;
        s.seed = 77;
        s.aami_tail_quota.min_tail_fraction = 0.05;
        auto a = make_split(b, s);
        auto shuffled = b;
        std::mt19937_64 rng(5);
        std::shuffle(shuffled.records.begin(), shuffled.records.end(), rng);
        auto a2 = make_split(shuffled, s);
        EXPECT_EQ(a.role_of, a2.role_of) << to_string(scen);
    }
}

TEST(MakeSplit, TooFewSubjects) {
    auto b = grid_bundle(3, 4);
    EXPECT_THROW(make_split(b, SplitSpec{}), ValidationError);
}

TEST(SplitSpec, Validation) {
    SplitSpec s;
    s.test_fraction = 0.0;
    EXPECT_THROW(s.validate(), ValidationError);
    s = {};
    s.test_fraction = 0.6;
    s.val_fraction = 0.5;
    EXPECT_THROW(s.validate(), ValidationError);
}

TEST(SplitIo, RoundTrip) {
    auto dir = std::filesystem::temp_directory_path() / ("ppgbench_split_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    auto b = grid_bundle(12, 3);
    SplitSpec s;
    s.scenario = Scenario::AAMI;
    s.aami_tail_quota.min_tail_fraction = 0.0;
    s.seed = 3;
    auto a = make_split(b, s);
    write_split(a, s, dir / "split.csv");
    auto back = read_split(dir / "split.csv");
    EXPECT_EQ(back.role_of, a.role_of);
    EXPECT_EQ(back.scenario, Scenario::AAMI);
    auto spec = read_split_spec(sidecar_path(dir / "split.csv"));
    EXPECT_EQ(spec.seed, 3u);
    EXPECT_EQ(spec.scenario, Scenario::AAMI);
    std::filesystem::remove_all(dir);
}

TEST(Parse, ScenarioAndRole) {
    EXPECT_EQ(parse_scenario("CALIBFREE"), Scenario::CalibFree);
    EXPECT_EQ(parse_role("test"), Role::Test);
    EXPECT_THROW(parse_scenario("loso"), ValidationError);
}
