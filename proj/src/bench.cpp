#include "ppgbench/bench.hpp"

#include "ppgbench/errors.hpp"
#include "ppgbench/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace ppgbench::bench {

GridReport grid_from_mae(std::vector<std::string> rows, std::vector<std::string> cols,
                         const std::vector<std::vector<BpPair>>& mae) {
    if (mae.size() != rows.size()) throw ValidationError("grid_from_mae: row count mismatch");
    GridReport g;
    g.rows = std::move(rows);
    g.cols = std::move(cols);
    for (const auto& r : mae) {
        if (r.size() != g.cols.size()) throw ValidationError("grid_from_mae: column count mismatch");
        auto& out = g.cells.emplace_back();
        for (const auto& v : r) out.push_back(Cell{CellMetrics{v.sbp, v.dbp, 0.0, 0.0}, {}, {}, false, false});
    }
    g.counts.assign(g.rows.size(), {});
    return g;
}

GridReport mark_top_k(GridReport g, std::size_t k) {
    g.k = k;
    g.counts.assign(g.rows.size(), {});
    for (auto& row : g.cells)
        for (auto& c : row) c.top_sbp = c.top_dbp = false;
    if (k == 0) return g;
    for (std::size_t c = 0; c < g.cols.size(); ++c) {
        for (int out = 0; out < 2; ++out) {
            std::vector<double> v;
            for (std::size_t r = 0; r < g.rows.size(); ++r)
                if (const auto& cell = g.at(r, c); !cell.failed())
                    v.push_back(out == 0 ? cell.value->mae_sbp : cell.value->mae_dbp);
            if (v.empty()) continue;
            std::sort(v.begin(), v.end());
            const double threshold = v[std::min(k, v.size()) - 1];
            for (std::size_t r = 0; r < g.rows.size(); ++r) {
                auto& cell = g.at(r, c);
                if (cell.failed()) continue;
                const double x = out == 0 ? cell.value->mae_sbp : cell.value->mae_dbp;
                if (x <= threshold) {
                    if (out == 0) {
                        cell.top_sbp = true;
                        ++g.counts[r].sbp;
                    } else {
                        cell.top_dbp = true;
                        ++g.counts[r].dbp;
                    }
                }
            }
        }
    }
    return g;
}

DiffGrid diff_grids(const GridReport& weighted, const GridReport& unweighted) {
    if (weighted.rows != unweighted.rows || weighted.cols != unweighted.cols)
        throw ValidationError("diff_grids: row/column sets differ");
    DiffGrid d;
    d.rows = weighted.rows;
    d.cols = weighted.cols;
    double ss = 0.0, sd = 0.0;
    for (std::size_t r = 0; r < d.rows.size(); ++r) {
        auto& out = d.delta.emplace_back();
        for (std::size_t c = 0; c < d.cols.size(); ++c) {
            const auto& w = weighted.at(r, c);
            const auto& u = unweighted.at(r, c);
            if (w.failed() || u.failed()) {
                out.emplace_back();
                continue;
            }
            const BpPair delta{w.value->mae_sbp - u.value->mae_sbp, w.value->mae_dbp - u.value->mae_dbp};
            ss += delta.sbp;
            sd += delta.dbp;
            ++d.cells_used;
            out.emplace_back(delta);
        }
    }
    if (d.cells_used > 0) d.mean = {ss / static_cast<double>(d.cells_used), sd / static_cast<double>(d.cells_used)};
    return d;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw ValidationError("pearson needs two equal-length series (n >= 2)");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return sxy / std::sqrt(sxx * syy);
}

EmdMaeTable emd_mae_table(const adaptation::LabelHistogram& train_hist, const std::vector<TestDistribution>& tests) {
    EmdMaeTable t;
    std::vector<double> e, m;
    for (const auto& test : tests) {
        t.rows.push_back({test.name, adaptation::emd(train_hist, test.histogram), test.mae});
        e.push_back(t.rows.back().emd);
        m.push_back(test.mae);
    }
    t.pearson = e.size() >= 2 ? pearson(e, m) : std::numeric_limits<double>::quiet_NaN();
    return t;
}

// --- run_grid -----------------------------------------------------------------------

namespace {

struct RowData {
    std::vector<std::size_t> train_idx;
    BpPair median;
    adaptation::LabelHistogram h_sbp, h_dbp;
};

struct ColData {
    std::vector<BpPair> labels;
    adaptation::LabelHistogram h_sbp, h_dbp;
};

template <class F>
void parallel_for(std::size_t n, std::size_t jobs, F&& f) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) f(i);
        });
    for (auto& t : pool) t.join();
}

Cell score(const models::Model& model, const TestSet& col, const ColData& cd, BpPair median) {
    Cell cell;
    try {
        const auto pred = training::predict(model, *col.bundle, col.indices);
        const auto m = metrics::mae(pred, cd.labels);
        const auto s = metrics::mase(pred, cd.labels, median);
        cell.value = CellMetrics{m.sbp, m.dbp, s.sbp, s.dbp};
    } catch (const std::exception& e) {
        cell.failure = std::string("evaluation failed: ") + e.what();
    }
    return cell;
}

} // namespace

GridRun run_grid(const GridRequest& req) {
    req.model.validate();
    req.train.validate();
    const std::size_t R = req.rows.size(), C = req.cols.size();
    if (R == 0 || C == 0) throw ValidationError("grid needs at least one training set and one test set");

    std::vector<RowData> rows(R);
    for (std::size_t r = 0; r < R; ++r) {
        const auto& ts = req.rows[r];
        if (!ts.bundle) throw ValidationError("training set '" + ts.name + "' has no bundle");
        rows[r].train_idx = ts.split.indices(*ts.bundle, splits::Role::Train);
        if (rows[r].train_idx.empty()) throw ValidationError("training set '" + ts.name + "' has no train segments");
        rows[r].median = metrics::median_baseline(training::labels(*ts.bundle, rows[r].train_idx));
        rows[r].h_sbp = adaptation::build_histogram(adaptation::sbp_values(*ts.bundle, rows[r].train_idx), req.sbp_binning);
        rows[r].h_dbp = adaptation::build_histogram(adaptation::dbp_values(*ts.bundle, rows[r].train_idx), req.dbp_binning);
    }
    std::vector<ColData> cols(C);
    for (std::size_t c = 0; c < C; ++c) {
        const auto& t = req.cols[c];
        if (!t.bundle || t.indices.empty()) throw ValidationError("test set '" + t.name + "' is empty");
        cols[c].labels = training::labels(*t.bundle, t.indices);
        cols[c].h_sbp = adaptation::build_histogram(adaptation::sbp_values(*t.bundle, t.indices), req.sbp_binning);
        cols[c].h_dbp = adaptation::build_histogram(adaptation::dbp_values(*t.bundle, t.indices), req.dbp_binning);
    }

    GridRun run;
    auto& g = run.report;
    for (const auto& r : req.rows) g.rows.push_back(r.name);
    for (const auto& c : req.cols) g.cols.push_back(c.name);
    g.cells.assign(R, std::vector<Cell>(C));

    if (!req.weighted) {
        run.histories.resize(R);
        parallel_for(R, req.jobs, [&](std::size_t r) {
            const auto& ts = req.rows[r];
            try {
                auto result = training::train(models::build_model(req.model), *ts.bundle, ts.split, req.train);
                for (std::size_t c = 0; c < C; ++c) g.cells[r][c] = score(result.model, req.cols[c], cols[c], rows[r].median);
                run.histories[r] = std::move(result.history);
            } catch (const std::exception& e) {
                for (std::size_t c = 0; c < C; ++c) g.cells[r][c].failure = std::string("training failed: ") + e.what();
            }
        });
    } else {
        run.histories.resize(R * C);
        parallel_for(R * C, req.jobs, [&](std::size_t i) {
            const std::size_t r = i / C, c = i % C;
            const auto& ts = req.rows[r];
            try {
                training::WeightTables tables{adaptation::compute_weights(rows[r].h_sbp, cols[c].h_sbp, req.tau),
                                              adaptation::compute_weights(rows[r].h_dbp, cols[c].h_dbp, req.tau)};
                auto result =
                    training::train(models::build_model(req.model), *ts.bundle, ts.split, req.train, tables);
                g.cells[r][c] = score(result.model, req.cols[c], cols[c], rows[r].median);
                run.histories[i] = std::move(result.history);
            } catch (const std::exception& e) {
                g.cells[r][c].failure = std::string("training failed: ") + e.what();
            }
        });
    }
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c)
            g.cells[r][c].emd = BpPair{adaptation::emd(rows[r].h_sbp, cols[c].h_sbp),
                                       adaptation::emd(rows[r].h_dbp, cols[c].h_dbp)};
    g = mark_top_k(std::move(g), req.k);
    return run;
}

} // namespace ppgbench::bench
