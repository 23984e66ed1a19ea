// ppgbench command-line entry point.
//
// Exit codes: 0 success, 1 usage or validation error, 2 runtime failure.

#include "ppgbench/adaptation.hpp"
#include "ppgbench/bench.hpp"
#include "ppgbench/core_data.hpp"
#include "ppgbench/errors.hpp"
#include "ppgbench/experiment.hpp"
#include "ppgbench/metrics.hpp"
#include "ppgbench/models.hpp"
#include "ppgbench/splits.hpp"
#include "ppgbench/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ppgbench;

namespace {

using Clock = std::chrono::steady_clock;

std::vector<std::string> g_argv;

std::optional<std::uint64_t> env_seed() {
    const char* s = std::getenv("PPGBENCH_SEED");
    if (!s || !*s) return std::nullopt;
    try {
        std::size_t pos = 0;
        const auto v = std::stoull(s, &pos);
        if (pos != std::string(s).size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ValidationError(std::string("PPGBENCH_SEED is not an unsigned integer: ") + s);
    }
}

// Flag beats environment beats zero; config files sit between flag and env
// because their readers take this value only when "seed" is absent.
std::uint64_t default_seed(const std::optional<std::uint64_t>& flag) {
    if (flag) return *flag;
    return env_seed().value_or(0);
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeFailure("cannot write " + path.string());
    out << text;
    if (!out) throw RuntimeFailure("write failed: " + path.string());
}

void write_manifest(const fs::path& out_dir, const std::string& command, const json& config, const json& seeds,
                    Clock::time_point t0, const std::vector<std::string>& outputs) {
    json m;
    m["command"] = command;
    m["command_line"] = g_argv;
    m["config_hash"] = experiment::hex64(experiment::config_hash(config));
    m["seeds"] = seeds;
    m["versions"] = {{"ppgbench", experiment::kVersion}, {"bundle_format", 1}, {"checkpoint_format", 1}};
    m["timings"] = {{"total_s", std::chrono::duration<double>(Clock::now() - t0).count()}};
    m["outputs"] = outputs;
    write_text(out_dir / "run_manifest.json", m.dump(2) + "\n");
}

json load_or_empty(const std::string& path) {
    return path.empty() ? json::object() : experiment::read_json_file(path);
}

splits::SplitAssignment load_split_for(const data::DatasetBundle& b, const std::string& split_path) {
    auto a = splits::read_split(split_path);
    if (const auto v = splits::verify_split(b, a); !v.empty() && v.front().invariant == "unknown id")
        throw ValidationError("split " + split_path + " refers to segments not in bundle " + b.name);
    return a;
}

std::vector<std::size_t> select(const data::DatasetBundle& b, const std::string& split_path, const std::string& role) {
    if (split_path.empty()) {
        std::vector<std::size_t> all(b.records.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        return all;
    }
    return load_split_for(b, split_path).indices(b, splits::parse_role(role));
}

// --- subcommands ---------------------------------------------------------------------

struct SynthArgs {
    std::string config, out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n_subjects, segments, length;
    std::optional<double> coupling, sbp_mean;
};

void cmd_synth(const SynthArgs& a) {
    const auto t0 = Clock::now();
    json cfg = load_or_empty(a.config);
    if (a.seed) cfg["seed"] = *a.seed;
    if (a.n_subjects) cfg["n_subjects"] = *a.n_subjects;
    if (a.segments) cfg["segments_per_subject"] = *a.segments;
    if (a.length) cfg["segment_length"] = *a.length;
    if (a.coupling) cfg["morphology_coupling"] = *a.coupling;
    if (a.sbp_mean) cfg["sbp_mean"] = *a.sbp_mean;
    const auto sc = experiment::synth_from_json(cfg, default_seed(a.seed));
    const auto bundle = data::generate_synthetic(sc);
    data::write_bundle(bundle, a.out);
    write_manifest(a.out, "synth", experiment::to_json(sc), {{"synth", sc.seed}}, t0,
                   {"manifest.json", "records.csv", "waveforms.f32le"});
    std::cout << "wrote " << bundle.records.size() << " segments to " << a.out << "\n";
}

struct SplitArgs {
    std::string bundle, config, out, scenario;
    std::optional<std::uint64_t> seed;
    std::optional<double> test_fraction, val_fraction, calib_fraction;
};

void cmd_split(const SplitArgs& a) {
    const auto t0 = Clock::now();
    json cfg = load_or_empty(a.config);
    if (!a.scenario.empty()) cfg["scenario"] = a.scenario;
    if (a.seed) cfg["seed"] = *a.seed;
    if (a.test_fraction) cfg["test_fraction"] = *a.test_fraction;
    if (a.val_fraction) cfg["val_fraction"] = *a.val_fraction;
    if (a.calib_fraction) cfg["calib_fraction"] = *a.calib_fraction;
    const auto spec = experiment::split_from_json(cfg, default_seed(a.seed));
    const auto bundle = data::load_bundle(a.bundle);
    const auto assignment = splits::make_split(bundle, spec);
    splits::write_split(assignment, spec, fs::path(a.out) / "split.csv");
    for (const auto& w : assignment.warnings) std::cerr << "warning: " << w << "\n";
    write_manifest(a.out, "split", cfg, {{"split", spec.seed}}, t0, {"split.csv", "split.json"});
    for (auto role : {splits::Role::Train, splits::Role::Validation, splits::Role::Calibration, splits::Role::Test})
        std::cout << splits::to_string(role) << ": " << assignment.indices(bundle, role).size() << "\n";
}

struct TrainArgs {
    std::string bundle, split, config, out, weights_sbp, weights_dbp, arch;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> epochs, micro, effective;
    std::optional<double> width;
    std::string lr;
};

void cmd_train(const TrainArgs& a) {
    const auto t0 = Clock::now();
    json cfg = load_or_empty(a.config);
    json model_cfg = cfg.value("model", json::object()), train_cfg = cfg.value("train", json::object());
    if (!a.arch.empty()) model_cfg["architecture"] = a.arch;
    if (a.width) model_cfg["width_multiplier"] = *a.width;
    if (a.seed) model_cfg["seed"] = train_cfg["seed"] = *a.seed;
    if (a.epochs) train_cfg["epochs"] = *a.epochs;
    if (a.micro) train_cfg["micro_batch_size"] = *a.micro;
    if (a.effective) train_cfg["effective_batch_size"] = *a.effective;
    if (!a.lr.empty()) {
        if (a.lr == "auto") train_cfg["learning_rate"] = "auto";
        else train_cfg["learning_rate"] = std::stod(a.lr);
    }
    const auto seed = default_seed(a.seed);
    const auto mspec = experiment::model_from_json(model_cfg, seed);
    auto tcfg = experiment::train_from_json(train_cfg, seed);
    const auto bundle = data::load_bundle(a.bundle);
    const auto assignment = load_split_for(bundle, a.split);
    std::optional<training::WeightTables> tables;
    if (!a.weights_sbp.empty() || !a.weights_dbp.empty()) {
        if (a.weights_sbp.empty() || a.weights_dbp.empty())
            throw ValidationError("--weights-sbp and --weights-dbp must be given together");
        tables = training::WeightTables{adaptation::read_weights(a.weights_sbp), adaptation::read_weights(a.weights_dbp)};
    }
    auto result = training::train(models::build_model(mspec), bundle, assignment, tcfg, tables);
    const fs::path out = a.out;
    models::save_checkpoint(result.model, out / "model");
    training::write_history_csv(result.history, out / "history.csv");
    json full = {{"model", experiment::to_json(mspec)}, {"train", experiment::to_json(tcfg)}, {"weighted", tables.has_value()}};
    write_manifest(out, "train", full, {{"model", mspec.seed}, {"train", tcfg.seed}}, t0, {"model/", "history.csv"});
    const auto& best = result.history.epochs[result.history.best_epoch];
    std::cout << "best epoch " << best.epoch << ": val MAE " << best.val_mae_sbp << " / " << best.val_mae_dbp
              << " mmHg (lr " << result.history.learning_rate << ")\n";
}

struct EvalArgs {
    std::string bundle, split, role = "test", checkpoint, out, train_bundle, train_split;
    std::optional<double> median_sbp, median_dbp;
};

void cmd_eval(const EvalArgs& a) {
    const auto t0 = Clock::now();
    const auto model = models::load_checkpoint(a.checkpoint);
    const auto bundle = data::load_bundle(a.bundle);
    const auto idx = select(bundle, a.split, a.role);
    if (idx.empty()) throw ValidationError("nothing to evaluate for role " + a.role);

    metrics::BpPair median;
    if (a.median_sbp && a.median_dbp) {
        median = {*a.median_sbp, *a.median_dbp};
    } else {
        const std::string tsplit = a.train_split.empty() ? a.split : a.train_split;
        if (tsplit.empty())
            throw ValidationError("MASE needs the training median: pass --train-split (and --train-bundle) or --median-sbp/--median-dbp");
        const auto tb = a.train_bundle.empty() ? bundle : data::load_bundle(a.train_bundle);
        median = metrics::median_baseline(training::labels(tb, select(tb, tsplit, "train")));
    }
    const auto refs = training::labels(bundle, idx);
    const auto pred = training::predict(model, bundle, idx);
    const auto result = metrics::evaluate(pred, refs, median);
    const fs::path out = a.out;
    write_text(out / "eval.json", metrics::to_json(result) + "\n");
    std::string csv = "segment_id,sbp,dbp,pred_sbp,pred_dbp\n";
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto& r = bundle.records[idx[i]];
        csv += r.segment_id + "," + data::format_exact(r.sbp) + "," + data::format_exact(r.dbp) + "," +
               data::format_exact(pred[i].sbp) + "," + data::format_exact(pred[i].dbp) + "\n";
    }
    write_text(out / "predictions.csv", csv);
    write_manifest(out, "eval", {{"checkpoint", a.checkpoint}, {"bundle", a.bundle}, {"split", a.split}, {"role", a.role}},
                   json::object(), t0, {"eval.json", "predictions.csv"});
    std::cout << "MAE " << result.mae.sbp << " / " << result.mae.dbp << " mmHg, MASE " << result.mase.sbp << " / "
              << result.mase.dbp << " (n=" << result.n << ")\n";
}

struct GridArgs {
    std::string config, out;
    std::optional<std::size_t> jobs;
    std::optional<std::uint64_t> seed;
};

void cmd_grid(const GridArgs& a) {
    const auto cfg = experiment::read_json_file(a.config);
    const auto base = fs::path(a.config).parent_path();
    const auto outcome = experiment::run_experiment(cfg, a.out, base, default_seed(a.seed), a.jobs, g_argv);
    std::cout << bench::grid_markdown(outcome.grid.report);
    if (outcome.diff)
        std::cout << "\nmean difference (weighted - unweighted): " << outcome.diff->mean.sbp << " / "
                  << outcome.diff->mean.dbp << " mmHg\n";
}

struct HistArgs {
    std::string train_hist, test_hist, train_bundle, train_split, train_role = "train", test_bundle, test_split,
        test_role = "test", out;
    double tau = 1.0;
};

// Histograms either come from JSON files or are built from bundle labels.
std::pair<adaptation::LabelHistogram, adaptation::LabelHistogram> histograms(const HistArgs& a, bool sbp,
                                                                             const std::string& hist_a,
                                                                             const std::string& hist_b) {
    if (!hist_a.empty() && !hist_b.empty())
        return {adaptation::read_histogram(hist_a), adaptation::read_histogram(hist_b)};
    if (a.train_bundle.empty() || a.test_bundle.empty())
        throw ValidationError("give two histogram files or --train-bundle and --test-bundle");
    const auto binning = sbp ? adaptation::HistogramBinning::sbp_default() : adaptation::HistogramBinning::dbp_default();
    auto build = [&](const std::string& bdir, const std::string& split, const std::string& role) {
        const auto b = data::load_bundle(bdir);
        const auto idx = select(b, split, role);
        if (idx.empty()) throw ValidationError("no records for role " + role + " in " + bdir);
        return adaptation::build_histogram(sbp ? adaptation::sbp_values(b, idx) : adaptation::dbp_values(b, idx), binning);
    };
    return {build(a.train_bundle, a.train_split, a.train_role), build(a.test_bundle, a.test_split, a.test_role)};
}

void cmd_weights(const HistArgs& a) {
    const auto t0 = Clock::now();
    const fs::path out = a.out;
    fs::create_directories(out);
    std::vector<std::string> outputs;
    if (!a.train_hist.empty() || !a.test_hist.empty()) {
        if (a.train_hist.empty() || a.test_hist.empty())
            throw ValidationError("--train-hist and --test-hist must be given together");
        const auto [htr, hte] = histograms(a, true, a.train_hist, a.test_hist);
        const auto w = adaptation::compute_weights(htr, hte, a.tau);
        adaptation::write_weights(w, out / "weights.json");
        outputs.push_back("weights.json");
    } else {
        for (bool sbp : {true, false}) {
            const std::string tag = sbp ? "sbp" : "dbp";
            const auto [htr, hte] = histograms(a, sbp, "", "");
            adaptation::write_histogram(htr, out / ("hist_train_" + tag + ".json"));
            adaptation::write_histogram(hte, out / ("hist_test_" + tag + ".json"));
            adaptation::write_weights(adaptation::compute_weights(htr, hte, a.tau), out / ("weights_" + tag + ".json"));
            outputs.insert(outputs.end(), {"hist_train_" + tag + ".json", "hist_test_" + tag + ".json",
                                           "weights_" + tag + ".json"});
        }
    }
    write_manifest(out, "weights", {{"tau", a.tau}}, json::object(), t0, outputs);
    std::cout << "wrote " << outputs.size() << " file(s) to " << out.string() << "\n";
}

void cmd_emd(const HistArgs& a) {
    const auto t0 = Clock::now();
    json result;
    if (!a.train_hist.empty() || !a.test_hist.empty()) {
        if (a.train_hist.empty() || a.test_hist.empty()) throw ValidationError("--a and --b must be given together");
        const auto [ha, hb] = histograms(a, true, a.train_hist, a.test_hist);
        result["emd"] = adaptation::emd(ha, hb);
        std::cout << "EMD " << result["emd"].get<double>() << " mmHg\n";
    } else {
        for (bool sbp : {true, false}) {
            const auto [ha, hb] = histograms(a, sbp, "", "");
            result[sbp ? "emd_sbp" : "emd_dbp"] = adaptation::emd(ha, hb);
        }
        std::cout << "EMD " << result["emd_sbp"].get<double>() << " / " << result["emd_dbp"].get<double>()
                  << " mmHg\n";
    }
    if (!a.out.empty()) {
        write_text(fs::path(a.out) / "emd.json", result.dump(2) + "\n");
        write_manifest(a.out, "emd", json::object(), json::object(), t0, {"emd.json"});
    }
}

struct ReportArgs {
    std::string grid, unweighted, out;
    std::optional<std::size_t> top_k;
};

void cmd_report(const ReportArgs& a) {
    const auto t0 = Clock::now();
    std::ifstream in(a.grid, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + a.grid);
    std::stringstream ss;
    ss << in.rdbuf();
    auto grid = bench::parse_grid_csv(ss.str());
    if (a.top_k) grid = bench::mark_top_k(std::move(grid), *a.top_k);
    else grid = bench::mark_top_k(std::move(grid), grid.k);
    const fs::path out = a.out;
    fs::create_directories(out);
    std::vector<std::string> outputs{"grid.csv", "grid.md", "mase_plotdata.csv", "emd_scatter.csv"};
    bench::render_report(grid, bench::Format::Csv, out / "grid.csv");
    bench::render_report(grid, bench::Format::Markdown, out / "grid.md");
    bench::render_report(grid, bench::Format::MasePlot, out / "mase_plotdata.csv");
    bench::render_report(grid, bench::Format::EmdScatter, out / "emd_scatter.csv");
    if (!a.unweighted.empty()) {
        std::ifstream u(a.unweighted, std::ios::binary);
        if (!u) throw ValidationError("cannot open " + a.unweighted);
        std::stringstream us;
        us << u.rdbuf();
        const auto diff = bench::diff_grids(grid, bench::parse_grid_csv(us.str()));
        bench::render_report(diff, bench::Format::Csv, out / "diff.csv");
        bench::render_report(diff, bench::Format::Markdown, out / "diff.md");
        outputs.insert(outputs.end(), {"diff.csv", "diff.md"});
    }
    write_manifest(out, "report", {{"grid", a.grid}, {"unweighted", a.unweighted}}, json::object(), t0, outputs);
    std::cout << bench::grid_markdown(grid);
}

} // namespace

int main(int argc, char** argv) {
    g_argv.assign(argv, argv + argc);
    CLI::App app{"ppgbench: PPG blood-pressure benchmarking harness"};
    app.require_subcommand(1);

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "generate a synthetic bundle");
    synth->add_option("--config", sa.config, "synth config JSON");
    synth->add_option("--out", sa.out, "output bundle directory")->required();
    synth->add_option("--seed", sa.seed);
    synth->add_option("--n-subjects", sa.n_subjects);
    synth->add_option("--segments-per-subject", sa.segments);
    synth->add_option("--segment-length", sa.length);
    synth->add_option("--coupling", sa.coupling, "morphology coupling in [0,1]");
    synth->add_option("--sbp-mean", sa.sbp_mean);

    SplitArgs pa;
    auto* split = app.add_subcommand("split", "assign train/validation/calibration/test roles");
    split->add_option("--bundle", pa.bundle)->required();
    split->add_option("--config", pa.config, "split spec JSON");
    split->add_option("--scenario", pa.scenario, "calib, calibfree or aami");
    split->add_option("--out", pa.out, "output directory (split.csv + split.json)")->required();
    split->add_option("--seed", pa.seed);
    split->add_option("--test-fraction", pa.test_fraction);
    split->add_option("--val-fraction", pa.val_fraction);
    split->add_option("--calib-fraction", pa.calib_fraction);

    TrainArgs ta;
    auto* trn = app.add_subcommand("train", "train one model");
    trn->add_option("--bundle", ta.bundle)->required();
    trn->add_option("--split", ta.split, "split CSV")->required();
    trn->add_option("--config", ta.config, "JSON with 'model' and 'train' objects");
    trn->add_option("--out", ta.out)->required();
    trn->add_option("--weights-sbp", ta.weights_sbp, "SBP weight table JSON");
    trn->add_option("--weights-dbp", ta.weights_dbp, "DBP weight table JSON");
    trn->add_option("--arch", ta.arch);
    trn->add_option("--width", ta.width);
    trn->add_option("--epochs", ta.epochs);
    trn->add_option("--micro-batch", ta.micro);
    trn->add_option("--effective-batch", ta.effective);
    trn->add_option("--lr", ta.lr, "learning rate or 'auto'");
    trn->add_option("--seed", ta.seed);

    EvalArgs ea;
    auto* ev = app.add_subcommand("eval", "score a checkpoint");
    ev->add_option("--bundle", ea.bundle)->required();
    ev->add_option("--checkpoint", ea.checkpoint)->required();
    ev->add_option("--split", ea.split);
    ev->add_option("--role", ea.role);
    ev->add_option("--train-bundle", ea.train_bundle);
    ev->add_option("--train-split", ea.train_split);
    ev->add_option("--median-sbp", ea.median_sbp);
    ev->add_option("--median-dbp", ea.median_dbp);
    ev->add_option("--out", ea.out)->required();

    GridArgs ga;
    auto* grid = app.add_subcommand("grid", "run a train x test grid from an experiment config");
    grid->add_option("--config", ga.config)->required();
    grid->add_option("--out", ga.out)->required();
    grid->add_option("--jobs", ga.jobs, "parallel trainings");
    grid->add_option("--seed", ga.seed, "seed for config entries without one");

    HistArgs wa;
    auto* weights = app.add_subcommand("weights", "importance weight tables");
    weights->add_option("--train-hist", wa.train_hist);
    weights->add_option("--test-hist", wa.test_hist);
    weights->add_option("--train-bundle", wa.train_bundle);
    weights->add_option("--train-split", wa.train_split);
    weights->add_option("--train-role", wa.train_role);
    weights->add_option("--test-bundle", wa.test_bundle);
    weights->add_option("--test-split", wa.test_split);
    weights->add_option("--test-role", wa.test_role);
    weights->add_option("--tau", wa.tau);
    weights->add_option("--out", wa.out)->required();

    HistArgs da;
    auto* emd = app.add_subcommand("emd", "earth mover's distance between label distributions");
    emd->add_option("--a", da.train_hist, "histogram JSON");
    emd->add_option("--b", da.test_hist, "histogram JSON");
    emd->add_option("--a-bundle", da.train_bundle);
    emd->add_option("--a-split", da.train_split);
    emd->add_option("--a-role", da.train_role);
    emd->add_option("--b-bundle", da.test_bundle);
    emd->add_option("--b-split", da.test_split);
    emd->add_option("--b-role", da.test_role);
    emd->add_option("--out", da.out);

    ReportArgs ra;
    auto* report = app.add_subcommand("report", "re-render a grid CSV");
    report->add_option("--grid", ra.grid)->required();
    report->add_option("--unweighted", ra.unweighted, "unweighted grid CSV for a diff table");
    report->add_option("--top-k", ra.top_k);
    report->add_option("--out", ra.out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*synth) cmd_synth(sa);
        else if (*split) cmd_split(pa);
        else if (*trn) cmd_train(ta);
        else if (*ev) cmd_eval(ea);
        else if (*grid) cmd_grid(ga);
        else if (*weights) cmd_weights(wa);
        else if (*emd) cmd_emd(da);
        else if (*report) cmd_report(ra);
        return 0;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: invalid argument: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return 2;
    }
}
