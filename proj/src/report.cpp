#include "ppgbench/bench.hpp"

#include "ppgbench/errors.hpp"
#include "text_util.hpp"

#include <cmath>
#include <cstdio>
#include <map>

namespace ppgbench::bench {

namespace {

using data::format_exact;

std::string fixed2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string signed2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%+.2f", v);
    return buf;
}

const std::string& checked(const std::string& name) {
    if (!detail::csv_safe(name)) throw ValidationError("name not representable in CSV: " + name);
    return name;
}

std::string sanitize(std::string s) {
    for (auto& ch : s)
        if (ch == ',' || ch == '\n' || ch == '\r' || ch == '"') ch = ch == ',' ? ';' : ' ';
    return s;
}

std::string opt(const std::optional<BpPair>& p, bool sbp) {
    if (!p) return "";
    return format_exact(sbp ? p->sbp : p->dbp);
}

// Lowest MAE per column and output, used for underlining.
std::vector<BpPair> column_best(const GridReport& g) {
    std::vector<BpPair> best(g.cols.size(), {INFINITY, INFINITY});
    for (std::size_t r = 0; r < g.rows.size(); ++r)
        for (std::size_t c = 0; c < g.cols.size(); ++c)
            if (const auto& cell = g.at(r, c); !cell.failed()) {
                best[c].sbp = std::min(best[c].sbp, cell.value->mae_sbp);
                best[c].dbp = std::min(best[c].dbp, cell.value->mae_dbp);
            }
    return best;
}

std::string decorate(double v, bool bold, bool underline) {
    std::string s = fixed2(v);
    if (underline) s = "<u>" + s + "</u>";
    if (bold) s = "**" + s + "**";
    return s;
}

} // namespace

std::string grid_csv(const GridReport& g) {
    std::string out =
        "row,col,status,mae_sbp,mae_dbp,mase_sbp,mase_dbp,emd_sbp,emd_dbp,mae_sbp_2dp,mae_dbp_2dp,top_sbp,top_dbp,"
        "failure\n";
    for (std::size_t r = 0; r < g.rows.size(); ++r)
        for (std::size_t c = 0; c < g.cols.size(); ++c) {
            const auto& cell = g.at(r, c);
            out += checked(g.rows[r]) + "," + checked(g.cols[c]) + ",";
            if (cell.failed()) {
                out += "failed,,,,," + opt(cell.emd, true) + "," + opt(cell.emd, false) + ",,,0,0," +
                       sanitize(cell.failure) + "\n";
                continue;
            }
            const auto& v = *cell.value;
            out += "ok," + format_exact(v.mae_sbp) + "," + format_exact(v.mae_dbp) + "," + format_exact(v.mase_sbp) +
                   "," + format_exact(v.mase_dbp) + "," + opt(cell.emd, true) + "," + opt(cell.emd, false) + "," +
                   fixed2(v.mae_sbp) + "," + fixed2(v.mae_dbp) + "," + (cell.top_sbp ? "1" : "0") + "," +
                   (cell.top_dbp ? "1" : "0") + ",\n";
        }
    return out;
}

GridReport parse_grid_csv(const std::string& text) {
    auto lines = detail::split_lines(text);
    if (lines.empty()) throw ValidationError("empty grid csv");
    const auto header = detail::split_csv_line(lines[0]);
    if (header.size() != 14 || header[0] != "row") throw ValidationError("unexpected grid csv header");
    GridReport g;
    std::map<std::string, std::size_t> ri, ci;
    struct Parsed {
        std::size_t r, c;
        Cell cell;
    };
    std::vector<Parsed> parsed;
    auto num = [](const std::string& s) {
        auto v = detail::parse_double(s);
        if (!v) throw ValidationError("bad number in grid csv: '" + s + "'");
        return *v;
    };
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = detail::split_csv_line(lines[i]);
        if (f.size() != 14) throw ValidationError("grid csv line " + std::to_string(i + 1) + " has wrong arity");
        if (!ri.count(f[0])) {
            ri[f[0]] = g.rows.size();
            g.rows.push_back(f[0]);
        }
        if (!ci.count(f[1])) {
            ci[f[1]] = g.cols.size();
            g.cols.push_back(f[1]);
        }
        Cell cell;
        if (f[2] == "ok") cell.value = CellMetrics{num(f[3]), num(f[4]), num(f[5]), num(f[6])};
        else cell.failure = f[13];
        if (!f[7].empty()) cell.emd = BpPair{num(f[7]), num(f[8])};
        cell.top_sbp = f[11] == "1";
        cell.top_dbp = f[12] == "1";
        parsed.push_back({ri[f[0]], ci[f[1]], cell});
    }
    g.cells.assign(g.rows.size(), std::vector<Cell>(g.cols.size()));
    g.counts.assign(g.rows.size(), {});
    for (auto& p : parsed) {
        if (p.cell.top_sbp) ++g.counts[p.r].sbp;
        if (p.cell.top_dbp) ++g.counts[p.r].dbp;
        g.cells[p.r][p.c] = std::move(p.cell);
    }
    return g;
}

std::string grid_markdown(const GridReport& g) {
    const auto best = column_best(g);
    std::string out = "| train \\ test |";
    for (const auto& c : g.cols) out += " " + c + " |";
    out += " Count |\n|---|";
    for (std::size_t c = 0; c < g.cols.size(); ++c) out += "---|";
    out += "---|\n";
    std::vector<std::string> notes;
    for (std::size_t r = 0; r < g.rows.size(); ++r) {
        out += "| " + g.rows[r] + " |";
        for (std::size_t c = 0; c < g.cols.size(); ++c) {
            const auto& cell = g.at(r, c);
            if (cell.failed()) {
                notes.push_back(g.rows[r] + " / " + g.cols[c] + ": " + sanitize(cell.failure));
                out += " —[^" + std::to_string(notes.size()) + "] |";
                continue;
            }
            const auto& v = *cell.value;
            out += " " + decorate(v.mae_sbp, cell.top_sbp, v.mae_sbp == best[c].sbp) + " / " +
                   decorate(v.mae_dbp, cell.top_dbp, v.mae_dbp == best[c].dbp) + " |";
        }
        const auto& n = g.counts.at(r);
        out += " " + std::to_string(n.sbp) + " / " + std::to_string(n.dbp) + " |\n";
    }
    out += "\nCells are SBP / DBP MAE in mmHg. Bold: top " + std::to_string(g.k) +
           " per column (ties included); underlined: best per column.\n";
    if (!notes.empty()) {
        out += "\n";
        for (std::size_t i = 0; i < notes.size(); ++i) out += "[^" + std::to_string(i + 1) + "]: " + notes[i] + "\n";
    }
    return out;
}

std::string diff_csv(const DiffGrid& d) {
    std::string out = "row,col,delta_mae_sbp,delta_mae_dbp\n";
    for (std::size_t r = 0; r < d.rows.size(); ++r)
        for (std::size_t c = 0; c < d.cols.size(); ++c)
            out += checked(d.rows[r]) + "," + checked(d.cols[c]) + "," + opt(d.delta[r][c], true) + "," +
                   opt(d.delta[r][c], false) + "\n";
    out += "mean,all," + format_exact(d.mean.sbp) + "," + format_exact(d.mean.dbp) + "\n";
    return out;
}

std::string diff_markdown(const DiffGrid& d) {
    std::string out = "| train \\ test |";
    for (const auto& c : d.cols) out += " " + c + " |";
    out += "\n|---|";
    for (std::size_t c = 0; c < d.cols.size(); ++c) out += "---|";
    out += "\n";
    for (std::size_t r = 0; r < d.rows.size(); ++r) {
        out += "| " + d.rows[r] + " |";
        for (std::size_t c = 0; c < d.cols.size(); ++c) {
            const auto& v = d.delta[r][c];
            out += v ? " " + signed2(v->sbp) + " / " + signed2(v->dbp) + " |" : " — |";
        }
        out += "\n";
    }
    out += "\nWeighted minus unweighted MAE (mmHg); negative values are improvements. Mean: " + signed2(d.mean.sbp) +
           " / " + signed2(d.mean.dbp) + "\n";
    return out;
}

std::string mase_plot_csv(const GridReport& g) {
    std::string out = "row,col,mase_sbp,mase_dbp\n";
    for (std::size_t r = 0; r < g.rows.size(); ++r)
        for (std::size_t c = 0; c < g.cols.size(); ++c) {
            const auto& cell = g.at(r, c);
            if (cell.failed()) continue;
            out += checked(g.rows[r]) + "," + checked(g.cols[c]) + "," + format_exact(cell.value->mase_sbp) + "," +
                   format_exact(cell.value->mase_dbp) + "\n";
        }
    return out;
}

std::string emd_scatter_csv(const GridReport& g) {
    std::string out = "row,col,emd_sbp,mae_sbp,emd_dbp,mae_dbp\n";
    for (std::size_t r = 0; r < g.rows.size(); ++r)
        for (std::size_t c = 0; c < g.cols.size(); ++c) {
            const auto& cell = g.at(r, c);
            if (cell.failed() || !cell.emd) continue;
            out += checked(g.rows[r]) + "," + checked(g.cols[c]) + "," + format_exact(cell.emd->sbp) + "," +
                   format_exact(cell.value->mae_sbp) + "," + format_exact(cell.emd->dbp) + "," +
                   format_exact(cell.value->mae_dbp) + "\n";
        }
    return out;
}

std::string emd_mae_csv(const EmdMaeTable& t) {
    std::string out = "test_set,emd,mae\n";
    for (const auto& r : t.rows) out += checked(r.test_set) + "," + format_exact(r.emd) + "," + format_exact(r.mae) + "\n";
    out += "# pearson=" + (std::isnan(t.pearson) ? std::string("nan") : format_exact(t.pearson)) + "\n";
    return out;
}

void render_report(const GridReport& grid, Format format, const std::filesystem::path& path) {
    switch (format) {
    case Format::Csv: detail::write_file(path, grid_csv(grid)); break;
    case Format::Markdown: detail::write_file(path, grid_markdown(grid)); break;
    case Format::MasePlot: detail::write_file(path, mase_plot_csv(grid)); break;
    case Format::EmdScatter: detail::write_file(path, emd_scatter_csv(grid)); break;
    }
}

void render_report(const DiffGrid& diff, Format format, const std::filesystem::path& path) {
    switch (format) {
    case Format::Csv: detail::write_file(path, diff_csv(diff)); break;
    case Format::Markdown: detail::write_file(path, diff_markdown(diff)); break;
    default: throw ValidationError("diff grids render only as csv or markdown");
    }
}

} // namespace ppgbench::bench
