#pragma once

#include "ppgbench/adaptation.hpp"
#include "ppgbench/core_data.hpp"
#include "ppgbench/models.hpp"
#include "ppgbench/splits.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ppgbench::training {

using models::BpPair;
using models::Predictions;

struct TrainConfig {
    std::size_t effective_batch_size = 512;
    std::size_t micro_batch_size = 64;
    std::size_t epochs = 50;
    std::optional<double> learning_rate = 0.001;  // nullopt = find it ("auto")
    double weight_decay = 0.01;
    std::uint64_t seed = 0;
    /// When set, every epoch's parameters are saved under `<dir>/epoch_NNN`.
    std::optional<std::filesystem::path> checkpoint_dir;

    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_mae_sbp = 0.0;
    double val_mae_dbp = 0.0;
    std::string checkpoint;

    double selection() const { return 0.5 * (val_mae_sbp + val_mae_dbp); }
    bool operator==(const EpochRecord&) const = default;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;  // index into `epochs`
    double learning_rate = 0.0;

    bool operator==(const TrainHistory&) const = default;
};

void write_history_csv(const TrainHistory& h, const std::filesystem::path& path);
std::string history_csv(const TrainHistory& h);

/// (1/n) sum_i [w_sbp,i (s_hat - s)^2 + w_dbp,i (d_hat - d)^2]. An empty
/// weight span means unit weights. When `grad` is given it receives dLoss/dPrediction.
double weighted_loss(std::span<const BpPair> predictions, std::span<const BpPair> targets,
                     std::span<const adaptation::SampleWeight> weights, Predictions* grad = nullptr);

/// Loss callback summing (not averaging) the weighted squared errors, so
/// micro-batch gradients can be accumulated and scaled once per effective batch.
models::LossFn make_weighted_sse(std::vector<BpPair> targets, std::vector<adaptation::SampleWeight> weights);

/// Decoupled-weight-decay Adam.
class AdamW {
public:
    AdamW(const models::Model& model, double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
          double eps = 1e-8);
    /// Applies one update with gradients multiplied by `grad_scale`.
    void step(models::Model& model, const nn::GradientSet& grads, double grad_scale = 1.0);
    void set_lr(double lr) { lr_ = lr; }
    std::size_t steps() const { return t_; }

private:
    double lr_, wd_, b1_, b2_, eps_;
    std::size_t t_ = 0;
    nn::GradientSet m_, v_;
};

struct WeightTables {
    adaptation::WeightTable sbp;
    adaptation::WeightTable dbp;
};

struct TrainResult {
    models::Model model;  // parameters of the best epoch
    TrainHistory history;
};

/// Stacks the waveforms of `indices` into a [n, 1, L] batch.
nn::Tensor make_batch(const data::DatasetBundle& bundle, std::span<const std::size_t> indices);
std::vector<BpPair> labels(const data::DatasetBundle& bundle, std::span<const std::size_t> indices);
Predictions predict(const models::Model& model, const data::DatasetBundle& bundle,
                    std::span<const std::size_t> indices, std::size_t batch_size = 256);

/// Seeded Fisher-Yates shuffle of `v`.
void shuffle(std::vector<std::size_t>& v, std::uint64_t seed);

TrainResult train(models::Model model, const data::DatasetBundle& bundle, const splits::SplitAssignment& assignment,
                  const TrainConfig& config, const std::optional<WeightTables>& weight_tables = std::nullopt);

// --- learning-rate finder -------------------------------------------------------

struct LrFindConfig {
    double start_lr = 1e-7;
    double end_lr = 1.0;
    std::size_t steps = 100;
    double smoothing = 0.98;
    double divergence_factor = 4.0;
    double fallback_lr = 1e-3;
};

struct LrFindResult {
    double learning_rate = 0.0;
    bool diverged = false;
    std::vector<double> lrs;
    std::vector<double> smoothed_losses;
};

/// Generic sweep: `step(lr)` returns the loss observed before applying one
/// update at `lr`. Returns a tenth of the learning rate at which the smoothed
/// loss first exceeds `divergence_factor` times its running minimum (or is
/// non-finite), else the fallback.
LrFindResult lr_find_sweep(const std::function<double(double lr)>& step, const LrFindConfig& config = {});

/// Sweeps a copy of `model` over micro-batches of `train_indices` (cycled
/// when fewer than `steps` are available) with AdamW.
LrFindResult lr_find(const models::Model& model, const data::DatasetBundle& bundle,
                     std::span<const std::size_t> train_indices, const TrainConfig& config,
                     std::span<const adaptation::SampleWeight> weights = {}, const LrFindConfig& lr_config = {});

} // namespace ppgbench::training
