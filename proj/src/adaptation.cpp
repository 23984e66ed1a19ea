#include "ppgbench/adaptation.hpp"

#include "ppgbench/errors.hpp"
#include "text_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace ppgbench::adaptation {

using nlohmann::json;

void HistogramBinning::validate() const {
    if (!std::isfinite(low) || !std::isfinite(high) || !(low < high))
        throw ValidationError("histogram binning needs finite low < high");
    if (!(bin_width > 0.0)) throw ValidationError("histogram bin_width must be positive");
    const double r = (high - low) / bin_width;
    if (std::abs(r - std::round(r)) > 1e-9 * std::max(1.0, r))
        throw ValidationError("histogram range must be a whole number of bins");
}

std::size_t HistogramBinning::bins() const {
    return static_cast<std::size_t>(std::llround((high - low) / bin_width));
}

std::size_t HistogramBinning::bin_of(double value) const {
    const std::size_t n = bins();
    if (!(value >= low)) return 0;  // also catches NaN
    if (value >= high) return n - 1;
    const auto b = static_cast<std::size_t>(std::floor((value - low) / bin_width));
    return std::min(b, n - 1);
}

double LabelHistogram::mean() const {
    double m = 0.0;
    for (std::size_t i = 0; i < mass.size(); ++i) m += mass[i] * binning.center(i);
    return m;
}

LabelHistogram build_histogram(std::span<const double> values, const HistogramBinning& binning) {
    binning.validate();
    if (values.empty()) throw ValidationError("cannot build a histogram from an empty value list");
    std::vector<std::size_t> counts(binning.bins(), 0);
    for (double v : values) ++counts[binning.bin_of(v)];
    LabelHistogram h{binning, std::vector<double>(counts.size())};
    const double total = static_cast<double>(values.size());
    for (std::size_t i = 0; i < counts.size(); ++i) h.mass[i] = static_cast<double>(counts[i]) / total;
    return h;
}

namespace {

void require_same_binning(const LabelHistogram& a, const LabelHistogram& b) {
    if (!(a.binning == b.binning) || a.mass.size() != b.mass.size())
        throw ValidationError("histogram binning mismatch");
}

} // namespace

WeightTable compute_weights(const LabelHistogram& h_train, const LabelHistogram& h_test, double tau) {
    require_same_binning(h_train, h_test);
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ValidationError("tau must be positive");
    WeightTable w{h_train.binning, std::vector<double>(h_train.mass.size()), tau};
    for (std::size_t i = 0; i < w.weight.size(); ++i)
        w.weight[i] = h_train.mass[i] > 0.0 ? std::max(tau, h_test.mass[i] / h_train.mass[i]) : tau;
    return w;
}

std::vector<SampleWeight> assign_weights(std::span<const data::SegmentRecord> records, const WeightTable& sbp_table,
                                         const WeightTable& dbp_table) {
    std::vector<SampleWeight> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back({sbp_table.lookup(r.sbp), dbp_table.lookup(r.dbp)});
    return out;
}

double emd(const LabelHistogram& a, const LabelHistogram& b) {
    require_same_binning(a, b);
    double ca = 0.0, cb = 0.0, total = 0.0;
    for (std::size_t i = 0; i < a.mass.size(); ++i) {
        ca += a.mass[i];
        cb += b.mass[i];
        total += std::abs(ca - cb);
    }
    return a.binning.bin_width * total;
}

namespace {

std::vector<double> column(const data::DatasetBundle& bundle, std::span<const std::size_t> indices, bool sbp) {
    std::vector<double> v;
    auto pick = [&](const data::SegmentRecord& r) { v.push_back(sbp ? r.sbp : r.dbp); };
    if (indices.empty())
        for (const auto& r : bundle.records) pick(r);
    else
        for (auto i : indices) pick(bundle.records.at(i));
    return v;
}

json binning_json(const HistogramBinning& b, const std::vector<double>& values) {
    return {{"low", b.low}, {"high", b.high}, {"bin_width", b.bin_width}, {"values", values}};
}

std::pair<HistogramBinning, std::vector<double>> parse_binned(const json& j) {
    HistogramBinning b{j.at("low").get<double>(), j.at("high").get<double>(), j.at("bin_width").get<double>()};
    b.validate();
    auto values = j.at("values").get<std::vector<double>>();
    if (values.size() != b.bins())
        throw ValidationError("expected " + std::to_string(b.bins()) + " values, got " + std::to_string(values.size()));
    return {b, std::move(values)};
}

} // namespace

std::vector<double> sbp_values(const data::DatasetBundle& bundle, std::span<const std::size_t> indices) {
    return column(bundle, indices, true);
}

std::vector<double> dbp_values(const data::DatasetBundle& bundle, std::span<const std::size_t> indices) {
    return column(bundle, indices, false);
}

std::string to_json(const LabelHistogram& h) { return binning_json(h.binning, h.mass).dump(2); }

std::string to_json(const WeightTable& w) {
    auto j = binning_json(w.binning, w.weight);
    j["tau"] = w.tau;
    return j.dump(2);
}

LabelHistogram histogram_from_json(const std::string& text) {
    try {
        auto [b, v] = parse_binned(json::parse(text));
        for (double m : v)
            if (!(m >= 0.0)) throw ValidationError("histogram mass must be non-negative");
        return {b, std::move(v)};
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed histogram json: ") + e.what());
    }
}

WeightTable weights_from_json(const std::string& text) {
    try {
        const auto j = json::parse(text);
        auto [b, v] = parse_binned(j);
        return {b, std::move(v), j.value("tau", 1.0)};
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed weight table json: ") + e.what());
    }
}

void write_histogram(const LabelHistogram& h, const std::filesystem::path& path) {
    detail::write_file(path, to_json(h) + "\n");
}

LabelHistogram read_histogram(const std::filesystem::path& path) {
    return histogram_from_json(detail::read_file(path));
}

void write_weights(const WeightTable& w, const std::filesystem::path& path) {
    detail::write_file(path, to_json(w) + "\n");
}

WeightTable read_weights(const std::filesystem::path& path) { return weights_from_json(detail::read_file(path)); }

} // namespace ppgbench::adaptation
