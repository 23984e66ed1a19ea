#include "ppgbench/core_data.hpp"

#include "ppgbench/errors.hpp"
#include "text_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <unordered_set>

namespace ppgbench::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;
constexpr const char* kCsvHeader = "segment_id,subject_id,source,sbp,dbp,offset,length";

struct CsvRow {
    std::string segment_id, subject_id, source;
    double sbp = 0.0, dbp = 0.0;
    long long offset = 0, length = 0;
};

std::vector<CsvRow> parse_records_csv(const std::string& text) {
    auto lines = detail::split_lines(text);
    if (lines.empty()) throw LoadError("records csv is empty");
    auto header = detail::split_csv_line(lines.front());
    const std::vector<std::string> expected = {"segment_id", "subject_id", "source", "sbp",
                                               "dbp",        "offset",     "length"};
    std::vector<int> col(expected.size(), -1);
    for (std::size_t i = 0; i < header.size(); ++i) {
        auto it = std::find(expected.begin(), expected.end(), header[i]);
        if (it != expected.end()) col[static_cast<std::size_t>(it - expected.begin())] = static_cast<int>(i);
    }
    for (std::size_t k = 0; k < expected.size(); ++k)
        if (col[k] < 0) throw LoadError("records csv is missing column '" + expected[k] + "'");

    std::vector<CsvRow> rows;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (lines[li].empty() || lines[li] == "\r") continue;
        auto cells = detail::split_csv_line(lines[li]);
        if (cells.size() != header.size())
            throw LoadError("malformed csv line " + std::to_string(li + 1));
        CsvRow row;
        row.segment_id = cells[static_cast<std::size_t>(col[0])];
        row.subject_id = cells[static_cast<std::size_t>(col[1])];
        row.source = cells[static_cast<std::size_t>(col[2])];
        auto sbp = detail::parse_double(cells[static_cast<std::size_t>(col[3])]);
        auto dbp = detail::parse_double(cells[static_cast<std::size_t>(col[4])]);
        if (!sbp || !dbp) throw LoadError("non-numeric label", row.segment_id);
        auto off = detail::parse_int(cells[static_cast<std::size_t>(col[5])]);
        auto len = detail::parse_int(cells[static_cast<std::size_t>(col[6])]);
        if (!off || !len || *off < 0 || *len <= 0)
            throw LoadError("invalid offset/length", row.segment_id);
        row.sbp = *sbp;
        row.dbp = *dbp;
        row.offset = *off;
        row.length = *len;
        rows.push_back(std::move(row));
    }
    return rows;
}

void check_unique(const std::vector<CsvRow>& rows) {
    std::unordered_set<std::string> seen;
    std::vector<std::string> dups;
    for (const auto& r : rows)
        if (!seen.insert(r.segment_id).second) dups.push_back(r.segment_id);
    if (!dups.empty()) {
        std::string list;
        for (const auto& d : dups) list += (list.empty() ? "" : ", ") + d;
        throw LoadError("duplicate segment_id: " + list, dups.front());
    }
}

std::vector<float> decode_blob(const std::string& blob) {
    std::vector<float> out(blob.size() / 4);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = read_f32le(blob.data() + 4 * i);
    return out;
}

void check_loaded(const DatasetBundle& bundle) {
    auto report = validate_bundle(bundle);
    if (!report.ok()) {
        const auto& v = report.violations.front();
        throw LoadError(v.kind + (v.detail.empty() ? "" : ": " + v.detail), v.record);
    }
}

} // namespace

void write_bundle(const DatasetBundle& bundle, const fs::path& dir) {
    require_valid(bundle);
    for (const auto& r : bundle.records)
        if (!detail::csv_safe(r.segment_id) || !detail::csv_safe(r.subject_id) || !detail::csv_safe(r.source))
            throw ValidationError("identifier contains a CSV delimiter: " + r.segment_id);
    fs::create_directories(dir);

    const std::size_t length = bundle.waveform_length();
    json manifest = {{"format_version", kFormatVersion},
                     {"name", bundle.name},
                     {"sample_rate", bundle.sample_rate},
                     {"n_records", bundle.records.size()},
                     {"waveform_length", length},
                     {"provenance", bundle.provenance}};
    detail::write_file(dir / "manifest.json", manifest.dump(2) + "\n");

    std::string csv = std::string(kCsvHeader) + "\n";
    std::string blob;
    blob.reserve(bundle.records.size() * length * 4);
    std::size_t offset = 0;
    for (const auto& r : bundle.records) {
        csv += r.segment_id + "," + r.subject_id + "," + r.source + "," + format_exact(r.sbp) + "," +
               format_exact(r.dbp) + "," + std::to_string(offset) + "," + std::to_string(r.waveform.size()) + "\n";
        for (float v : r.waveform) append_f32le(blob, v);
        offset += r.waveform.size();
    }
    detail::write_file(dir / "records.csv", csv);
    detail::write_file(dir / "waveforms.f32le", blob);
}

DatasetBundle load_bundle(const fs::path& dir) {
    json manifest;
    try {
        manifest = json::parse(detail::read_file(dir / "manifest.json"));
    } catch (const json::exception& e) {
        throw LoadError(std::string("corrupt manifest: ") + e.what());
    }

    DatasetBundle bundle;
    std::size_t n_records = 0, length = 0;
    try {
        if (manifest.at("format_version").get<int>() != kFormatVersion)
            throw LoadError("unsupported format_version");
        bundle.name = manifest.at("name").get<std::string>();
        bundle.sample_rate = manifest.at("sample_rate").get<double>();
        n_records = manifest.at("n_records").get<std::size_t>();
        length = manifest.at("waveform_length").get<std::size_t>();
        if (manifest.contains("provenance"))
            bundle.provenance = manifest["provenance"].get<std::map<std::string, std::string>>();
    } catch (const json::exception& e) {
        throw LoadError(std::string("corrupt manifest: ") + e.what());
    }

    auto rows = parse_records_csv(detail::read_file(dir / "records.csv"));
    if (rows.size() != n_records)
        throw LoadError("manifest n_records=" + std::to_string(n_records) + " but records.csv has " +
                        std::to_string(rows.size()) + " rows");
    check_unique(rows);

    const std::string blob = detail::read_file(dir / "waveforms.f32le");
    if (blob.size() != n_records * length * 4)
        throw LoadError("blob size mismatch: expected " + std::to_string(n_records * length * 4) +
                        " bytes, found " + std::to_string(blob.size()));

    const auto samples = decode_blob(blob);
    std::size_t expected_offset = 0;
    for (auto& row : rows) {
        if (static_cast<std::size_t>(row.length) != length)
            throw LoadError("length mismatch between manifest and records.csv", row.segment_id);
        if (static_cast<std::size_t>(row.offset) != expected_offset)
            throw LoadError("offset does not follow row order", row.segment_id);
        SegmentRecord rec;
        rec.segment_id = std::move(row.segment_id);
        rec.subject_id = std::move(row.subject_id);
        rec.source = std::move(row.source);
        rec.sbp = row.sbp;
        rec.dbp = row.dbp;
        rec.waveform.assign(samples.begin() + static_cast<std::ptrdiff_t>(expected_offset),
                            samples.begin() + static_cast<std::ptrdiff_t>(expected_offset + length));
        expected_offset += length;
        bundle.records.push_back(std::move(rec));
    }
    check_loaded(bundle);
    return bundle;
}

DatasetBundle ingest_csv(const fs::path& manifest_csv, const fs::path& waveform_blob,
                         const std::string& name, double sample_rate) {
    auto rows = parse_records_csv(detail::read_file(manifest_csv));
    check_unique(rows);
    const std::string blob = detail::read_file(waveform_blob);
    if (blob.size() % 4 != 0) throw LoadError("blob size mismatch: not a whole number of float32 samples");
    const auto samples = decode_blob(blob);
    const auto total = static_cast<long long>(samples.size());

    // Offsets must tile [0, total) exactly: sort by offset and walk.
    std::vector<std::size_t> order(rows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return rows[a].offset < rows[b].offset;
    });
    long long cursor = 0;
    for (auto idx : order) {
        const auto& r = rows[idx];
        if (r.offset + r.length > total) throw LoadError("offset/length out of range", r.segment_id);
        if (r.offset < cursor) throw LoadError("overlapping offsets", r.segment_id);
        if (r.offset > cursor) throw LoadError("gap in waveform blob before record", r.segment_id);
        cursor = r.offset + r.length;
    }
    if (cursor != total) throw LoadError("waveform blob has trailing samples not covered by any record");

    DatasetBundle bundle;
    bundle.name = name;
    bundle.sample_rate = sample_rate;
    bundle.provenance["ingested_from"] = manifest_csv.filename().string();
    for (auto& r : rows) {
        if (!(r.sbp > r.dbp)) throw LoadError("sbp must exceed dbp", r.segment_id);
        SegmentRecord rec;
        rec.segment_id = r.segment_id;
        rec.subject_id = r.subject_id;
        rec.source = r.source;
        rec.sbp = r.sbp;
        rec.dbp = r.dbp;
        rec.waveform.assign(samples.begin() + r.offset, samples.begin() + r.offset + r.length);
        bundle.records.push_back(std::move(rec));
    }
    check_loaded(bundle);
    return bundle;
}

} // namespace ppgbench::data
