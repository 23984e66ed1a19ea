#include "ppgbench/training.hpp"

#include "ppgbench/errors.hpp"
#include "ppgbench/metrics.hpp"
#include "text_util.hpp"

#include <cmath>
#include <cstdio>
#include <random>

namespace ppgbench::training {

void TrainConfig::validate() const {
    if (micro_batch_size == 0 || effective_batch_size == 0)
        throw ValidationError("batch sizes must be positive");
    if (effective_batch_size % micro_batch_size != 0)
        throw ValidationError("effective_batch_size must be a multiple of micro_batch_size");
    if (epochs == 0) throw ValidationError("epochs must be at least 1");
    if (learning_rate && !(*learning_rate > 0.0)) throw ValidationError("learning_rate must be positive or \"auto\"");
    if (!(weight_decay >= 0.0)) throw ValidationError("weight_decay must be non-negative");
}

std::string history_csv(const TrainHistory& h) {
    std::string out = "epoch,train_loss,val_mae_sbp,val_mae_dbp,is_best\n";
    for (std::size_t i = 0; i < h.epochs.size(); ++i) {
        const auto& e = h.epochs[i];
        out += std::to_string(e.epoch) + "," + data::format_exact(e.train_loss) + "," +
               data::format_exact(e.val_mae_sbp) + "," + data::format_exact(e.val_mae_dbp) + "," +
               (i == h.best_epoch ? "1" : "0") + "\n";
    }
    return out;
}

void write_history_csv(const TrainHistory& h, const std::filesystem::path& path) {
    detail::write_file(path, history_csv(h));
}

double weighted_loss(std::span<const BpPair> p, std::span<const BpPair> t,
                     std::span<const adaptation::SampleWeight> w, Predictions* grad) {
    if (p.size() != t.size() || (!w.empty() && w.size() != p.size()))
        throw ValidationError("weighted_loss: shape mismatch");
    if (p.empty()) throw ValidationError("weighted_loss: empty batch");
    const double n = static_cast<double>(p.size());
    if (grad) grad->assign(p.size(), {});
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double ws = w.empty() ? 1.0 : w[i].sbp, wd = w.empty() ? 1.0 : w[i].dbp;
        if (!(ws >= 0.0) || !(wd >= 0.0)) throw ValidationError("weighted_loss: negative weight");
        const double es = p[i].sbp - t[i].sbp, ed = p[i].dbp - t[i].dbp;
        total += ws * es * es + wd * ed * ed;
        if (grad) (*grad)[i] = {2.0 * ws * es / n, 2.0 * wd * ed / n};
    }
    if (!std::isfinite(total)) throw ValidationError("weighted_loss: non-finite input");
    return total / n;
}

models::LossFn make_weighted_sse(std::vector<BpPair> targets, std::vector<adaptation::SampleWeight> weights) {
    return [targets = std::move(targets), weights = std::move(weights)](const Predictions& p, Predictions& g) {
        g.assign(p.size(), {});
        double total = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double ws = weights.empty() ? 1.0 : weights[i].sbp, wd = weights.empty() ? 1.0 : weights[i].dbp;
            const double es = p[i].sbp - targets[i].sbp, ed = p[i].dbp - targets[i].dbp;
            total += ws * es * es + wd * ed * ed;
            g[i] = {2.0 * ws * es, 2.0 * wd * ed};
        }
        return total;
    };
}

AdamW::AdamW(const models::Model& model, double lr, double weight_decay, double beta1, double beta2, double eps)
    : lr_(lr), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps), m_(models::zero_gradients(model)),
      v_(models::zero_gradients(model)) {}

void AdamW::step(models::Model& model, const nn::GradientSet& grads, double grad_scale) {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    auto& params = model.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& p = params[k].values;
        auto& m = m_[k];
        auto& v = v_[k];
        const auto& g = grads[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g[i] * grad_scale;
            p[i] -= lr_ * wd_ * p[i];
            m[i] = b1_ * m[i] + (1.0 - b1_) * gi;
            v[i] = b2_ * v[i] + (1.0 - b2_) * gi * gi;
            p[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
        }
    }
}

nn::Tensor make_batch(const data::DatasetBundle& bundle, std::span<const std::size_t> indices) {
    const std::size_t L = indices.empty() ? 0 : bundle.records.at(indices[0]).waveform.size();
    nn::Tensor t(indices.size(), 1, L);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const auto& w = bundle.records.at(indices[i]).waveform;
        if (w.size() != L) throw ValidationError("mixed waveform lengths in one batch");
        double* dst = t.sample(i);
        for (std::size_t j = 0; j < L; ++j) dst[j] = static_cast<double>(w[j]);
    }
    return t;
}

std::vector<BpPair> labels(const data::DatasetBundle& bundle, std::span<const std::size_t> indices) {
    std::vector<BpPair> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back({bundle.records.at(i).sbp, bundle.records.at(i).dbp});
    return out;
}

Predictions predict(const models::Model& model, const data::DatasetBundle& bundle,
                    std::span<const std::size_t> indices, std::size_t batch_size) {
    Predictions out;
    out.reserve(indices.size());
    for (std::size_t s = 0; s < indices.size(); s += batch_size) {
        const auto chunk = indices.subspan(s, std::min(batch_size, indices.size() - s));
        const auto p = models::forward(model, make_batch(bundle, chunk));
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

void shuffle(std::vector<std::size_t>& v, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

namespace {

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
    return seed ^ (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(epoch) + 1));
}

void set_scaling_from(models::Model& model, const std::vector<BpPair>& y) {
    double ms = 0.0, md = 0.0;
    for (const auto& p : y) {
        ms += p.sbp;
        md += p.dbp;
    }
    const double n = static_cast<double>(y.size());
    ms /= n;
    md /= n;
    double vs = 0.0, vd = 0.0;
    for (const auto& p : y) {
        vs += (p.sbp - ms) * (p.sbp - ms);
        vd += (p.dbp - md) * (p.dbp - md);
    }
    const double ss = std::sqrt(vs / n), sd = std::sqrt(vd / n);
    model.set_output_scaling({ms, md}, {ss > 0.0 ? ss : 1.0, sd > 0.0 ? sd : 1.0});
}

std::vector<adaptation::SampleWeight> pick(std::span<const adaptation::SampleWeight> all,
                                           std::span<const std::size_t> idx) {
    std::vector<adaptation::SampleWeight> w;
    if (all.empty()) return w;
    w.reserve(idx.size());
    for (auto i : idx) w.push_back(all[i]);
    return w;
}

} // namespace

TrainResult train(models::Model model, const data::DatasetBundle& bundle, const splits::SplitAssignment& assignment,
                  const TrainConfig& config, const std::optional<WeightTables>& weight_tables) {
    config.validate();
    const auto train_idx = assignment.indices(bundle, splits::Role::Train);
    const auto val_idx = assignment.indices(bundle, splits::Role::Validation);
    if (train_idx.empty()) throw ValidationError("training role is empty");
    if (val_idx.empty()) throw ValidationError("validation role is empty");

    std::vector<adaptation::SampleWeight> weights;
    if (weight_tables) weights = adaptation::assign_weights(bundle.records, weight_tables->sbp, weight_tables->dbp);

    set_scaling_from(model, labels(bundle, train_idx));
    const auto val_labels = labels(bundle, val_idx);

    TrainHistory history;
    history.learning_rate =
        config.learning_rate ? *config.learning_rate : lr_find(model, bundle, train_idx, config, weights).learning_rate;
    AdamW opt(model, history.learning_rate, config.weight_decay);

    models::Model best = model;
    std::vector<std::size_t> order;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        order.assign(train_idx.begin(), train_idx.end());
        shuffle(order, epoch_seed(config.seed, epoch));
        double loss_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += config.effective_batch_size) {
            const std::size_t eff = std::min(config.effective_batch_size, order.size() - start);
            auto grads = models::zero_gradients(model);
            for (std::size_t s = 0; s < eff; s += config.micro_batch_size, ++batch_index) {
                const std::span<const std::size_t> micro(order.data() + start + s,
                                                         std::min(config.micro_batch_size, eff - s));
                auto loss = make_weighted_sse(labels(bundle, micro), pick(weights, micro));
                models::GradientResult r;
                try {
                    r = models::gradients(model, make_batch(bundle, micro), loss, batch_index);
                } catch (const NonFiniteLoss&) {
                    throw NonFiniteLoss(batch_index, "epoch " + std::to_string(epoch) + ", step " +
                                                         std::to_string(start / config.effective_batch_size));
                }
                models::commit_batch_statistics(model, r);
                loss_sum += r.loss;
                for (std::size_t k = 0; k < grads.size(); ++k)
                    for (std::size_t i = 0; i < grads[k].size(); ++i) grads[k][i] += r.grads[k][i];
            }
            opt.step(model, grads, 1.0 / static_cast<double>(eff));
        }

        const auto val_mae = metrics::mae(predict(model, bundle, val_idx), val_labels);
        EpochRecord rec{epoch, loss_sum / static_cast<double>(order.size()), val_mae.sbp, val_mae.dbp, {}};
        if (config.checkpoint_dir) {
            char name[32];
            std::snprintf(name, sizeof name, "epoch_%03zu", epoch);
            const auto dir = *config.checkpoint_dir / name;
            models::save_checkpoint(model, dir);
            rec.checkpoint = dir.string();
        }
        history.epochs.push_back(rec);
        if (history.epochs.size() == 1 || rec.selection() < history.epochs[history.best_epoch].selection()) {
            history.best_epoch = history.epochs.size() - 1;
            best = model;
        }
    }
    return {std::move(best), std::move(history)};
}

} // namespace ppgbench::training
