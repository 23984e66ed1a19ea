#pragma once

#include "ppgbench/models.hpp"

#include <span>
#include <string>
#include <vector>

namespace ppgbench::metrics {

using models::BpPair;

/// Component-wise median; even counts average the two middle values.
BpPair median_baseline(std::span<const BpPair> labels);

/// Per-output mean absolute error.
BpPair mae(std::span<const BpPair> predictions, std::span<const BpPair> references);

/// MAE of predicting `median` for every reference.
BpPair baseline_mae(std::span<const BpPair> references, BpPair median);

/// mae / baseline_mae; throws ValidationError when the baseline MAE is zero.
double mase_ratio(double mae, double baseline_mae);
BpPair mase(std::span<const BpPair> predictions, std::span<const BpPair> references, BpPair median);

/// Sub-band edges below the grade-D threshold. Only the D threshold (MAE
/// above 7 mmHg) is anchored; the A/B/C edges are configuration.
struct GradeBands {
    double a = 5.0;
    double b = 6.0;
};

inline constexpr double kGradeDThreshold = 7.0;

std::string ieee_grade(double mae_mmhg, const GradeBands& bands = {});

/// Absolute-error histogram, 1 mmHg bins over [0, 60); larger errors land
/// in the last bin.
struct ErrorHistogram {
    double bin_width = 1.0;
    double max_error = 60.0;
    std::vector<std::size_t> sbp;
    std::vector<std::size_t> dbp;
};

ErrorHistogram error_histogram(std::span<const BpPair> predictions, std::span<const BpPair> references);

struct EvalResult {
    BpPair mae;
    BpPair mase;
    std::size_t n = 0;
    BpPair baseline_median;
    ErrorHistogram errors;
};

/// MAE, MASE against `train_median` and the error histograms in one pass.
EvalResult evaluate(std::span<const BpPair> predictions, std::span<const BpPair> references, BpPair train_median);

std::string to_json(const EvalResult& r);

} // namespace ppgbench::metrics
