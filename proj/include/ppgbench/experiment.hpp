#pragma once

// Declarative experiment configs (JSON) and their execution.

#include "ppgbench/bench.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ppgbench::experiment {

using nlohmann::json;

// Each reader starts from the struct defaults, takes the keys present and
// uses `default_seed` when "seed" is absent. Unknown keys are rejected.
data::SynthConfig synth_from_json(const json& j, std::uint64_t default_seed = 0);
splits::SplitSpec split_from_json(const json& j, std::uint64_t default_seed = 0);
models::ModelSpec model_from_json(const json& j, std::uint64_t default_seed = 0);
training::TrainConfig train_from_json(const json& j, std::uint64_t default_seed = 0);
adaptation::HistogramBinning binning_from_json(const json& j, const adaptation::HistogramBinning& defaults);

json to_json(const data::SynthConfig& c);
json to_json(const models::ModelSpec& s);
json to_json(const training::TrainConfig& c);

/// FNV-1a (64 bit) of the compact dump; object keys are sorted, so the hash
/// does not depend on key order in the source file.
std::uint64_t config_hash(const json& config);
std::string hex64(std::uint64_t v);

json read_json_file(const std::filesystem::path& path);

struct ExperimentOutcome {
    bench::GridRun grid;
    std::optional<bench::GridRun> unweighted;  // weighted runs with compare_unweighted
    std::optional<bench::DiffGrid> diff;
    json manifest;
};

/// Runs the grid described by `config` and writes grid.csv, grid.md,
/// mase_plotdata.csv, emd_scatter.csv, run_manifest.json (and diff.csv /
/// diff.md when a weighted run is compared with its unweighted twin) into
/// `out_dir`. Relative bundle paths resolve against `base_dir`.
ExperimentOutcome run_experiment(const json& config, const std::filesystem::path& out_dir,
                                 const std::filesystem::path& base_dir, std::uint64_t default_seed = 0,
                                 std::optional<std::size_t> jobs = std::nullopt,
                                 const std::vector<std::string>& command_line = {});

inline constexpr const char* kVersion = "0.1.0";

} // namespace ppgbench::experiment
