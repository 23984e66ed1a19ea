#pragma once

#include "ppgbench/adaptation.hpp"
#include "ppgbench/core_data.hpp"
#include "ppgbench/models.hpp"
#include "ppgbench/splits.hpp"
#include "ppgbench/training.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ppgbench::bench {

using models::BpPair;

struct CellMetrics {
    double mae_sbp = 0.0;
    double mae_dbp = 0.0;
    double mase_sbp = 0.0;
    double mase_dbp = 0.0;
    bool operator==(const CellMetrics&) const = default;
};

/// One (train set, test set) result. A failed cell keeps its cause instead of a value.
struct Cell {
    std::optional<CellMetrics> value;
    std::string failure;
    std::optional<BpPair> emd;  // train vs test label distance, when known
    bool top_sbp = false;
    bool top_dbp = false;

    bool failed() const { return !value.has_value(); }
    bool operator==(const Cell&) const = default;
};

struct RowCount {
    std::size_t sbp = 0;
    std::size_t dbp = 0;
    bool operator==(const RowCount&) const = default;
};

struct GridReport {
    std::vector<std::string> rows;  // training sets
    std::vector<std::string> cols;  // test sets
    std::vector<std::vector<Cell>> cells;
    std::vector<RowCount> counts;
    std::size_t k = 3;

    Cell& at(std::size_t r, std::size_t c) { return cells.at(r).at(c); }
    const Cell& at(std::size_t r, std::size_t c) const { return cells.at(r).at(c); }
    bool operator==(const GridReport&) const = default;
};

/// Grid from bare MAE matrices (MASE left at zero), e.g. published tables.
GridReport grid_from_mae(std::vector<std::string> rows, std::vector<std::string> cols,
                         const std::vector<std::vector<BpPair>>& mae);

/// Flags, per column and output, every cell whose MAE is no larger than the
/// k-th smallest (ties at the boundary are all flagged) and recounts rows.
GridReport mark_top_k(GridReport grid, std::size_t k = 3);

struct DiffGrid {
    std::vector<std::string> rows;
    std::vector<std::string> cols;
    std::vector<std::vector<std::optional<BpPair>>> delta;  // weighted - unweighted; empty if either failed
    BpPair mean;  // over all cells with a value; negative = improvement
    std::size_t cells_used = 0;
};

DiffGrid diff_grids(const GridReport& weighted, const GridReport& unweighted);

struct TestDistribution {
    std::string name;
    adaptation::LabelHistogram histogram;
    double mae = 0.0;
};

struct EmdMaeRow {
    std::string test_set;
    double emd = 0.0;
    double mae = 0.0;
};

struct EmdMaeTable {
    std::vector<EmdMaeRow> rows;
    double pearson = 0.0;  // NaN when either column is constant
};

EmdMaeTable emd_mae_table(const adaptation::LabelHistogram& train_hist, const std::vector<TestDistribution>& tests);

double pearson(const std::vector<double>& x, const std::vector<double>& y);

// --- grid execution -----------------------------------------------------------

struct TrainingSet {
    std::string name;
    const data::DatasetBundle* bundle = nullptr;
    splits::SplitAssignment split;
};

struct TestSet {
    std::string name;
    const data::DatasetBundle* bundle = nullptr;
    std::vector<std::size_t> indices;  // records scored for this column
};

struct GridRequest {
    std::vector<TrainingSet> rows;
    std::vector<TestSet> cols;
    models::ModelSpec model;
    training::TrainConfig train;
    bool weighted = false;
    double tau = 1.0;
    adaptation::HistogramBinning sbp_binning = adaptation::HistogramBinning::sbp_default();
    adaptation::HistogramBinning dbp_binning = adaptation::HistogramBinning::dbp_default();
    std::size_t k = 3;
    std::size_t jobs = 1;
};

struct GridRun {
    GridReport report;
    /// Unweighted: one history per row. Weighted: one per cell, row-major.
    std::vector<std::optional<training::TrainHistory>> histories;
};

/// Unweighted grids train one model per row and score it on every column.
/// Weighted grids train one model per cell, since the importance weights
/// depend on the column's label distribution. MASE uses the row's training
/// median. Failures become failed cells carrying the cause.
GridRun run_grid(const GridRequest& request);

// --- rendering ------------------------------------------------------------------

std::string grid_csv(const GridReport& grid);
GridReport parse_grid_csv(const std::string& text);
std::string grid_markdown(const GridReport& grid);
std::string diff_csv(const DiffGrid& diff);
std::string diff_markdown(const DiffGrid& diff);
std::string mase_plot_csv(const GridReport& grid);
std::string emd_scatter_csv(const GridReport& grid);
std::string emd_mae_csv(const EmdMaeTable& table);

enum class Format { Csv, Markdown, MasePlot, EmdScatter };

/// Writes one rendering of `grid` to `path`; throws RuntimeFailure when the
/// path is not writable.
void render_report(const GridReport& grid, Format format, const std::filesystem::path& path);
void render_report(const DiffGrid& diff, Format format, const std::filesystem::path& path);

} // namespace ppgbench::bench
