#include "ppgbench/metrics.hpp"

#include "ppgbench/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace ppgbench::metrics {

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void require_pairs(std::span<const BpPair> p, std::span<const BpPair> r) {
    if (p.size() != r.size())
        throw ValidationError("prediction/reference count mismatch: " + std::to_string(p.size()) + " vs " +
                              std::to_string(r.size()));
    if (p.empty()) throw ValidationError("no predictions to score");
}

} // namespace

BpPair median_baseline(std::span<const BpPair> labels) {
    if (labels.empty()) throw ValidationError("median baseline needs at least one label");
    std::vector<double> s, d;
    s.reserve(labels.size());
    d.reserve(labels.size());
    for (const auto& l : labels) {
        s.push_back(l.sbp);
        d.push_back(l.dbp);
    }
    return {median(std::move(s)), median(std::move(d))};
}

BpPair mae(std::span<const BpPair> predictions, std::span<const BpPair> references) {
    require_pairs(predictions, references);
    double s = 0.0, d = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        s += std::abs(predictions[i].sbp - references[i].sbp);
        d += std::abs(predictions[i].dbp - references[i].dbp);
    }
    const double n = static_cast<double>(predictions.size());
    return {s / n, d / n};
}

BpPair baseline_mae(std::span<const BpPair> references, BpPair median) {
    std::vector<BpPair> constant(references.size(), median);
    return mae(constant, references);
}

double mase_ratio(double mae, double baseline) {
    if (!(baseline > 0.0)) throw ValidationError("MASE undefined: baseline MAE is zero");
    return mae / baseline;
}

BpPair mase(std::span<const BpPair> predictions, std::span<const BpPair> references, BpPair median) {
    const auto m = mae(predictions, references);
    const auto b = baseline_mae(references, median);
    return {mase_ratio(m.sbp, b.sbp), mase_ratio(m.dbp, b.dbp)};
}

std::string ieee_grade(double mae_mmhg, const GradeBands& bands) {
    if (mae_mmhg > kGradeDThreshold) return "D";
    if (mae_mmhg <= bands.a) return "A";
    if (mae_mmhg <= bands.b) return "B";
    return "C";
}

ErrorHistogram error_histogram(std::span<const BpPair> predictions, std::span<const BpPair> references) {
    require_pairs(predictions, references);
    ErrorHistogram h;
    const auto bins = static_cast<std::size_t>(h.max_error / h.bin_width);
    h.sbp.assign(bins, 0);
    h.dbp.assign(bins, 0);
    auto bin = [&](double e) { return std::min(bins - 1, static_cast<std::size_t>(e / h.bin_width)); };
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        ++h.sbp[bin(std::abs(predictions[i].sbp - references[i].sbp))];
        ++h.dbp[bin(std::abs(predictions[i].dbp - references[i].dbp))];
    }
    return h;
}

EvalResult evaluate(std::span<const BpPair> predictions, std::span<const BpPair> references, BpPair train_median) {
    EvalResult r;
    r.mae = mae(predictions, references);
    r.mase = mase(predictions, references, train_median);
    r.n = predictions.size();
    r.baseline_median = train_median;
    r.errors = error_histogram(predictions, references);
    return r;
}

std::string to_json(const EvalResult& r) {
    nlohmann::json j = {
        {"n", r.n},
        {"mae_sbp", r.mae.sbp},
        {"mae_dbp", r.mae.dbp},
        {"mase_sbp", r.mase.sbp},
        {"mase_dbp", r.mase.dbp},
        {"baseline_median", {{"sbp", r.baseline_median.sbp}, {"dbp", r.baseline_median.dbp}}},
        {"grade_sbp", ieee_grade(r.mae.sbp)},
        {"grade_dbp", ieee_grade(r.mae.dbp)},
        {"error_histogram",
         {{"bin_width", r.errors.bin_width}, {"max_error", r.errors.max_error}, {"sbp", r.errors.sbp},
          {"dbp", r.errors.dbp}}},
    };
    return j.dump(2);
}

} // namespace ppgbench::metrics
