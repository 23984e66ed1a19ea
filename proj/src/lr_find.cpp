#include "ppgbench/training.hpp"

#include "ppgbench/errors.hpp"

#include <cmath>
#include <limits>

namespace ppgbench::training {

LrFindResult lr_find_sweep(const std::function<double(double)>& step, const LrFindConfig& cfg) {
    LrFindResult r;
    r.learning_rate = cfg.fallback_lr;
    const std::size_t n = std::max<std::size_t>(cfg.steps, 2);
    const double ratio = std::log(cfg.end_lr / cfg.start_lr);
    double avg = 0.0, best = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double lr = cfg.start_lr * std::exp(ratio * static_cast<double>(i) / static_cast<double>(n - 1));
        double loss;
        try {
            loss = step(lr);
        } catch (const NonFiniteLoss&) {
            loss = std::numeric_limits<double>::infinity();
        }
        avg = cfg.smoothing * avg + (1.0 - cfg.smoothing) * loss;
        const double smoothed = avg / (1.0 - std::pow(cfg.smoothing, static_cast<double>(i + 1)));
        r.lrs.push_back(lr);
        r.smoothed_losses.push_back(smoothed);
        if (i > 0 && (!std::isfinite(smoothed) || smoothed > cfg.divergence_factor * best)) {
            r.diverged = true;
            r.learning_rate = lr / 10.0;
            return r;
        }
        if (i == 0 || smoothed < best) best = smoothed;
    }
    return r;
}

LrFindResult lr_find(const models::Model& model, const data::DatasetBundle& bundle,
                     std::span<const std::size_t> train_indices, const TrainConfig& config,
                     std::span<const adaptation::SampleWeight> weights, const LrFindConfig& lr_config) {
    if (train_indices.empty()) throw ValidationError("lr_find needs training data");
    models::Model probe = model;
    AdamW opt(probe, lr_config.start_lr, config.weight_decay);
    std::vector<std::size_t> order(train_indices.begin(), train_indices.end());
    shuffle(order, config.seed);
    const std::size_t mb = config.micro_batch_size;
    const std::size_t n_batches = (order.size() + mb - 1) / mb;
    std::size_t k = 0;
    auto step = [&](double lr) {
        const std::size_t b = k++ % n_batches;
        const std::span<const std::size_t> idx(order.data() + b * mb, std::min(mb, order.size() - b * mb));
        std::vector<adaptation::SampleWeight> w;
        if (!weights.empty())
            for (auto i : idx) w.push_back(weights[i]);
        auto r = models::gradients(probe, make_batch(bundle, idx), make_weighted_sse(labels(bundle, idx), w), b);
        models::commit_batch_statistics(probe, r);
        opt.set_lr(lr);
        const double inv = 1.0 / static_cast<double>(idx.size());
        opt.step(probe, r.grads, inv);
        return r.loss * inv;
    };
    return lr_find_sweep(step, lr_config);
}

} // namespace ppgbench::training
