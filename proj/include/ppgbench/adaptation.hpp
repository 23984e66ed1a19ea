#pragma once

#include "ppgbench/core_data.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ppgbench::adaptation {

/// Equal-width bins over [low, high]. Bins are half-open [edge, edge + width)
/// except the last, which is closed; values outside the range clip into the
/// boundary bins.
struct HistogramBinning {
    double low = 40.0;
    double high = 220.0;
    double bin_width = 2.0;

    static HistogramBinning sbp_default() { return {40.0, 220.0, 2.0}; }
    static HistogramBinning dbp_default() { return {30.0, 150.0, 2.0}; }

    void validate() const;
    std::size_t bins() const;
    std::size_t bin_of(double value) const;
    double center(std::size_t bin) const { return low + (static_cast<double>(bin) + 0.5) * bin_width; }

    bool operator==(const HistogramBinning&) const = default;
};

struct LabelHistogram {
    HistogramBinning binning;
    std::vector<double> mass;  // sums to one

    double mean() const;  // mass-weighted bin centres
};

struct WeightTable {
    HistogramBinning binning;
    std::vector<double> weight;
    double tau = 1.0;

    double lookup(double value) const { return weight[binning.bin_of(value)]; }
};

/// Normalised histogram of `values`; throws ValidationError when empty.
LabelHistogram build_histogram(std::span<const double> values, const HistogramBinning& binning);

/// w_i = max(tau, h_test,i / h_train,i) where h_train,i > 0, otherwise tau.
WeightTable compute_weights(const LabelHistogram& h_train, const LabelHistogram& h_test, double tau = 1.0);

struct SampleWeight {
    double sbp = 1.0;
    double dbp = 1.0;
    bool operator==(const SampleWeight&) const = default;
};

std::vector<SampleWeight> assign_weights(std::span<const data::SegmentRecord> records, const WeightTable& sbp_table,
                                         const WeightTable& dbp_table);

/// Wasserstein-1 distance in mmHg: bin_width * sum_i |CDF_a(i) - CDF_b(i)|.
double emd(const LabelHistogram& a, const LabelHistogram& b);

// Convenience: label columns of a bundle (optionally restricted to indices).
std::vector<double> sbp_values(const data::DatasetBundle& bundle, std::span<const std::size_t> indices = {});
std::vector<double> dbp_values(const data::DatasetBundle& bundle, std::span<const std::size_t> indices = {});

// JSON {low, high, bin_width, values[]}; weight tables additionally carry tau.
std::string to_json(const LabelHistogram& h);
std::string to_json(const WeightTable& w);
LabelHistogram histogram_from_json(const std::string& text);
WeightTable weights_from_json(const std::string& text);
void write_histogram(const LabelHistogram& h, const std::filesystem::path& path);
LabelHistogram read_histogram(const std::filesystem::path& path);
void write_weights(const WeightTable& w, const std::filesystem::path& path);
WeightTable read_weights(const std::filesystem::path& path);

} // namespace ppgbench::adaptation
