#pragma once

#include "ppgbench/core_data.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace ppgbench::splits {

enum class Scenario { Calib, CalibFree, AAMI };
enum class Role { Train, Validation, Calibration, Test };

std::string to_string(Scenario s);
std::string to_string(Role r);
Scenario parse_scenario(const std::string& s);  // case-insensitive
Role parse_role(const std::string& s);

/// AAMI-style tail quota on the test set's SBP distribution.
struct TailQuota {
    double low_sbp_threshold = 100.0;
    double high_sbp_threshold = 160.0;
    double min_tail_fraction = 0.10;
};

struct SplitSpec {
    Scenario scenario = Scenario::CalibFree;
    double test_fraction = 0.10;
    double val_fraction = 0.10;
    double calib_fraction = 0.0125;
    TailQuota aami_tail_quota;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SplitAssignment {
    std::map<std::string, Role> role_of;
    Scenario scenario = Scenario::CalibFree;
    std::string source_bundle;
    std::vector<std::string> warnings;

    std::vector<std::size_t> indices(const data::DatasetBundle& bundle, Role role) const;
};

/// Calib partitions each subject's segments; CalibFree and AAMI partition
/// subjects. Decisions depend only on sorted subject/segment ids, labels and
/// the seed, never on record order.
SplitAssignment make_split(const data::DatasetBundle& bundle, const SplitSpec& spec);

struct SplitViolation {
    std::string invariant;  // "coverage", "subject overlap", "subject sharing", "tail quota", "unknown id"
    std::vector<std::string> ids;
};

/// Empty iff every assignment invariant holds for `bundle`.
std::vector<SplitViolation> verify_split(const data::DatasetBundle& bundle,
                                         const SplitAssignment& assignment,
                                         const TailQuota& quota = {});

/// Tail fractions (below low threshold, above high threshold) among `sbp`.
std::pair<double, double> tail_fractions(const std::vector<double>& sbp, const TailQuota& quota);

// `segment_id,role` CSV plus a JSON sidecar holding the spec.
void write_split(const SplitAssignment& assignment, const SplitSpec& spec,
                 const std::filesystem::path& csv_path);
SplitAssignment read_split(const std::filesystem::path& csv_path);
SplitSpec read_split_spec(const std::filesystem::path& json_path);
std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

} // namespace ppgbench::splits
