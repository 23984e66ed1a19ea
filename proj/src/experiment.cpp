#include "ppgbench/experiment.hpp"

#include "ppgbench/errors.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <cstdio>
#include <map>
#include <set>

namespace ppgbench::experiment {

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& what) {
    if (!j.is_object()) throw ValidationError(what + " must be a JSON object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!ok.count(it.key())) throw ValidationError("unknown key '" + it.key() + "' in " + what);
}

template <class T>
void take(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

template <class F>
auto guarded(const std::string& what, F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw ValidationError("malformed " + what + ": " + e.what());
    }
}

} // namespace

data::SynthConfig synth_from_json(const json& j, std::uint64_t default_seed) {
    check_keys(j,
               {"n_subjects", "segments_per_subject", "segment_length", "sample_rate", "sbp_mean", "sbp_sd",
                "dbp_mean", "dbp_sd", "heart_rate_range", "morphology_coupling", "noise_sd", "seed", "name",
                "source", "subject_prefix"},
               "synth config");
    return guarded("synth config", [&] {
        data::SynthConfig c;
        c.seed = default_seed;
        take(j, "n_subjects", c.n_subjects);
        take(j, "segments_per_subject", c.segments_per_subject);
        take(j, "segment_length", c.segment_length);
        take(j, "sample_rate", c.sample_rate);
        take(j, "sbp_mean", c.sbp_mean);
        take(j, "sbp_sd", c.sbp_sd);
        take(j, "dbp_mean", c.dbp_mean);
        take(j, "dbp_sd", c.dbp_sd);
        if (j.contains("heart_rate_range")) {
            const auto hr = j.at("heart_rate_range").get<std::vector<double>>();
            if (hr.size() != 2) throw ValidationError("heart_rate_range must be [low, high]");
            c.heart_rate_range = {hr[0], hr[1]};
        }
        take(j, "morphology_coupling", c.morphology_coupling);
        take(j, "noise_sd", c.noise_sd);
        take(j, "seed", c.seed);
        take(j, "name", c.name);
        take(j, "source", c.source);
        take(j, "subject_prefix", c.subject_prefix);
        c.validate();
        return c;
    });
}

json to_json(const data::SynthConfig& c) {
    return {{"n_subjects", c.n_subjects},
            {"segments_per_subject", c.segments_per_subject},
            {"segment_length", c.segment_length},
            {"sample_rate", c.sample_rate},
            {"sbp_mean", c.sbp_mean},
            {"sbp_sd", c.sbp_sd},
            {"dbp_mean", c.dbp_mean},
            {"dbp_sd", c.dbp_sd},
            {"heart_rate_range", {c.heart_rate_range.first, c.heart_rate_range.second}},
            {"morphology_coupling", c.morphology_coupling},
            {"noise_sd", c.noise_sd},
            {"seed", c.seed},
            {"name", c.name},
            {"source", c.source},
            {"subject_prefix", c.subject_prefix}};
}

splits::SplitSpec split_from_json(const json& j, std::uint64_t default_seed) {
    check_keys(j, {"scenario", "test_fraction", "val_fraction", "calib_fraction", "aami_tail_quota", "seed"},
               "split spec");
    return guarded("split spec", [&] {
        splits::SplitSpec s;
        s.seed = default_seed;
        if (j.contains("scenario")) s.scenario = splits::parse_scenario(j.at("scenario").get<std::string>());
        take(j, "test_fraction", s.test_fraction);
        take(j, "val_fraction", s.val_fraction);
        take(j, "calib_fraction", s.calib_fraction);
        take(j, "seed", s.seed);
        if (j.contains("aami_tail_quota")) {
            const auto& q = j.at("aami_tail_quota");
            check_keys(q, {"low_sbp_threshold", "high_sbp_threshold", "min_tail_fraction"}, "aami_tail_quota");
            take(q, "low_sbp_threshold", s.aami_tail_quota.low_sbp_threshold);
            take(q, "high_sbp_threshold", s.aami_tail_quota.high_sbp_threshold);
            take(q, "min_tail_fraction", s.aami_tail_quota.min_tail_fraction);
        }
        s.validate();
        return s;
    });
}

models::ModelSpec model_from_json(const json& j, std::uint64_t default_seed) {
    check_keys(j, {"architecture", "width_multiplier", "input_channels", "seed"}, "model spec");
    return guarded("model spec", [&] {
        models::ModelSpec s;
        s.seed = default_seed;
        if (j.contains("architecture")) s.architecture = models::parse_architecture(j.at("architecture").get<std::string>());
        take(j, "width_multiplier", s.width_multiplier);
        take(j, "input_channels", s.input_channels);
        take(j, "seed", s.seed);
        s.validate();
        return s;
    });
}

json to_json(const models::ModelSpec& s) {
    return {{"architecture", models::to_string(s.architecture)},
            {"width_multiplier", s.width_multiplier},
            {"input_channels", s.input_channels},
            {"seed", s.seed}};
}

training::TrainConfig train_from_json(const json& j, std::uint64_t default_seed) {
    check_keys(j, {"effective_batch_size", "micro_batch_size", "epochs", "learning_rate", "weight_decay", "seed"},
               "train config");
    return guarded("train config", [&] {
        training::TrainConfig c;
        c.seed = default_seed;
        take(j, "effective_batch_size", c.effective_batch_size);
        take(j, "micro_batch_size", c.micro_batch_size);
        take(j, "epochs", c.epochs);
        if (j.contains("learning_rate")) {
            const auto& lr = j.at("learning_rate");
            if (lr.is_string()) {
                if (lr.get<std::string>() != "auto") throw ValidationError("learning_rate must be a number or \"auto\"");
                c.learning_rate.reset();
            } else {
                c.learning_rate = lr.get<double>();
            }
        }
        take(j, "weight_decay", c.weight_decay);
        take(j, "seed", c.seed);
        c.validate();
        return c;
    });
}

json to_json(const training::TrainConfig& c) {
    json j = {{"effective_batch_size", c.effective_batch_size},
              {"micro_batch_size", c.micro_batch_size},
              {"epochs", c.epochs},
              {"weight_decay", c.weight_decay},
              {"seed", c.seed}};
    if (c.learning_rate) j["learning_rate"] = *c.learning_rate;
    else j["learning_rate"] = "auto";
    return j;
}

adaptation::HistogramBinning binning_from_json(const json& j, const adaptation::HistogramBinning& defaults) {
    check_keys(j, {"low", "high", "bin_width"}, "binning");
    return guarded("binning", [&] {
        auto b = defaults;
        take(j, "low", b.low);
        take(j, "high", b.high);
        take(j, "bin_width", b.bin_width);
        b.validate();
        return b;
    });
}

std::uint64_t config_hash(const json& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : config.dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

json read_json_file(const std::filesystem::path& path) {
    try {
        return json::parse(detail::read_file(path));
    } catch (const json::exception& e) {
        throw ValidationError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

// --- running -------------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

} // namespace

ExperimentOutcome run_experiment(const json& cfg, const std::filesystem::path& out_dir,
                                 const std::filesystem::path& base_dir, std::uint64_t default_seed,
                                 std::optional<std::size_t> jobs, const std::vector<std::string>& command_line) {
    const auto t_start = Clock::now();
    check_keys(cfg, {"name", "bundles", "training_sets", "test_sets", "model", "train", "weighting", "top_k", "jobs"},
               "experiment config");
    json manifest;
    manifest["started_utc"] = utc_now();
    manifest["command_line"] = command_line;
    manifest["config_hash"] = hex64(config_hash(cfg));
    manifest["versions"] = {{"ppgbench", kVersion}, {"bundle_format", 1}, {"checkpoint_format", 1}};
    json seeds;

    // bundles
    std::map<std::string, data::DatasetBundle> bundles;
    const auto t_data = Clock::now();
    if (!cfg.contains("bundles") || !cfg["bundles"].is_object() || cfg["bundles"].empty())
        throw ValidationError("experiment config needs a non-empty 'bundles' object");
    for (auto it = cfg["bundles"].begin(); it != cfg["bundles"].end(); ++it) {
        const auto& b = it.value();
        check_keys(b, {"synth", "path"}, "bundle '" + it.key() + "'");
        if (b.contains("synth")) {
            auto sc = synth_from_json(b["synth"], default_seed);
            if (!b["synth"].contains("name")) sc.name = it.key();
            seeds["synth"][it.key()] = sc.seed;
            bundles[it.key()] = data::generate_synthetic(sc);
        } else if (b.contains("path")) {
            std::filesystem::path p = b["path"].get<std::string>();
            if (p.is_relative()) p = base_dir / p;
            bundles[it.key()] = data::load_bundle(p);
        } else {
            throw ValidationError("bundle '" + it.key() + "' needs 'synth' or 'path'");
        }
        data::require_valid(bundles[it.key()]);
    }
    auto bundle_ref = [&](const json& j, const std::string& what) -> const data::DatasetBundle& {
        const auto name = guarded(what, [&] { return j.at("bundle").get<std::string>(); });
        auto f = bundles.find(name);
        if (f == bundles.end()) throw ValidationError(what + " refers to unknown bundle '" + name + "'");
        return f->second;
    };

    bench::GridRequest req;
    if (!cfg.contains("training_sets") || cfg["training_sets"].empty())
        throw ValidationError("experiment config needs 'training_sets'");
    for (const auto& t : cfg["training_sets"]) {
        check_keys(t, {"name", "bundle", "split"}, "training set");
        bench::TrainingSet ts;
        ts.name = guarded("training set", [&] { return t.at("name").get<std::string>(); });
        ts.bundle = &bundle_ref(t, "training set '" + ts.name + "'");
        const auto spec = split_from_json(t.value("split", json::object()), default_seed);
        seeds["splits"][ts.name] = spec.seed;
        ts.split = splits::make_split(*ts.bundle, spec);
        req.rows.push_back(std::move(ts));
    }
    if (!cfg.contains("test_sets") || cfg["test_sets"].empty()) throw ValidationError("experiment config needs 'test_sets'");
    for (const auto& t : cfg["test_sets"]) {
        check_keys(t, {"name", "bundle", "role", "split_from", "split"}, "test set");
        bench::TestSet col;
        col.name = guarded("test set", [&] { return t.at("name").get<std::string>(); });
        const std::string role = t.value("role", t.contains("split_from") || t.contains("split") ? "test" : "all");
        if (t.contains("split_from")) {
            const auto from = t["split_from"].get<std::string>();
            auto row = std::find_if(req.rows.begin(), req.rows.end(), [&](const auto& r) { return r.name == from; });
            if (row == req.rows.end()) throw ValidationError("test set '" + col.name + "' refers to unknown training set");
            col.bundle = row->bundle;
            col.indices = row->split.indices(*col.bundle, splits::parse_role(role));
        } else {
            col.bundle = &bundle_ref(t, "test set '" + col.name + "'");
            if (t.contains("split")) {
                const auto spec = split_from_json(t["split"], default_seed);
                col.indices = splits::make_split(*col.bundle, spec).indices(*col.bundle, splits::parse_role(role));
            } else if (role == "all") {
                for (std::size_t i = 0; i < col.bundle->records.size(); ++i) col.indices.push_back(i);
            } else {
                throw ValidationError("test set '" + col.name + "' uses role '" + role + "' without a split");
            }
        }
        req.cols.push_back(std::move(col));
    }
    req.model = model_from_json(cfg.value("model", json::object()), default_seed);
    req.train = train_from_json(cfg.value("train", json::object()), default_seed);
    seeds["model"] = req.model.seed;
    seeds["train"] = req.train.seed;
    req.k = cfg.value("top_k", std::size_t{3});
    req.jobs = jobs ? *jobs : cfg.value("jobs", std::size_t{1});
    bool compare = false;
    if (cfg.contains("weighting")) {
        const auto& w = cfg["weighting"];
        check_keys(w, {"enabled", "tau", "sbp_binning", "dbp_binning", "compare_unweighted"}, "weighting");
        req.weighted = w.value("enabled", false);
        req.tau = w.value("tau", 1.0);
        if (w.contains("sbp_binning")) req.sbp_binning = binning_from_json(w["sbp_binning"], req.sbp_binning);
        if (w.contains("dbp_binning")) req.dbp_binning = binning_from_json(w["dbp_binning"], req.dbp_binning);
        compare = req.weighted && w.value("compare_unweighted", true);
    }
    manifest["seeds"] = seeds;
    json timings;
    timings["data_s"] = seconds_since(t_data);

    ExperimentOutcome out;
    auto t_grid = Clock::now();
    out.grid = bench::run_grid(req);
    timings["grid_s"] = seconds_since(t_grid);
    if (compare) {
        auto unweighted_req = req;
        unweighted_req.weighted = false;
        t_grid = Clock::now();
        out.unweighted = bench::run_grid(unweighted_req);
        timings["unweighted_grid_s"] = seconds_since(t_grid);
        out.diff = bench::diff_grids(out.grid.report, out.unweighted->report);
    }

    std::filesystem::create_directories(out_dir);
    std::vector<std::string> outputs{"grid.csv", "grid.md", "mase_plotdata.csv", "emd_scatter.csv"};
    bench::render_report(out.grid.report, bench::Format::Csv, out_dir / "grid.csv");
    bench::render_report(out.grid.report, bench::Format::Markdown, out_dir / "grid.md");
    bench::render_report(out.grid.report, bench::Format::MasePlot, out_dir / "mase_plotdata.csv");
    bench::render_report(out.grid.report, bench::Format::EmdScatter, out_dir / "emd_scatter.csv");
    if (out.diff) {
        bench::render_report(out.unweighted->report, bench::Format::Csv, out_dir / "grid_unweighted.csv");
        bench::render_report(*out.diff, bench::Format::Csv, out_dir / "diff.csv");
        bench::render_report(*out.diff, bench::Format::Markdown, out_dir / "diff.md");
        outputs.insert(outputs.end(), {"grid_unweighted.csv", "diff.csv", "diff.md"});
    }
    timings["total_s"] = seconds_since(t_start);
    manifest["timings"] = timings;
    manifest["outputs"] = outputs;
    manifest["weighted"] = req.weighted;
    detail::write_file(out_dir / "run_manifest.json", manifest.dump(2) + "\n");
    out.manifest = std::move(manifest);
    return out;
}

} // namespace ppgbench::experiment
