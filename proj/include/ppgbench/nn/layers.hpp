#pragma once

#include "ppgbench/nn/tensor.hpp"

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace ppgbench::nn {

/// A named flat array. Parameters are trained; buffers (batch-norm running
/// statistics, output scaling) are state that travels with a checkpoint.
struct NamedArray {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> values;

    bool operator==(const NamedArray&) const = default;
};

using GradientSet = std::vector<std::vector<double>>;

enum class Mode { Eval, Train };

struct LayerCache {
    virtual ~LayerCache() = default;
};

/// Per-forward storage of whatever each layer needs for its backward pass.
class Tape {
public:
    template <class T>
    T& put(const void* key) {
        auto p = std::make_unique<T>();
        T& ref = *p;
        caches_[key] = std::move(p);
        return ref;
    }
    template <class T>
    T& get(const void* key) const {
        return static_cast<T&>(*caches_.at(key));
    }

private:
    std::unordered_map<const void*, std::unique_ptr<LayerCache>> caches_;
};

/// Everything one forward/backward traversal reads. `tape` is null for
/// inference-only passes.
struct Pass {
    Mode mode = Mode::Eval;
    Tape* tape = nullptr;
    std::span<const NamedArray> params;
    std::span<const NamedArray> buffers;
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x, Pass& pass) const = 0;
    /// Accumulates parameter gradients into `grads` and returns dLoss/dx.
    virtual Tensor backward(const Tensor& dy, Pass& pass, GradientSet& grads) const = 0;
};

using LayerPtr = std::unique_ptr<Layer>;

/// Registers parameters and buffers while an architecture is assembled and
/// draws their seeded initial values.
class ParamRegistry {
public:
    explicit ParamRegistry(std::uint64_t seed) : rng_(seed) {}

    std::size_t normal(const std::string& name, std::vector<std::size_t> shape, double stddev);
    std::size_t uniform(const std::string& name, std::vector<std::size_t> shape, double low, double high);
    std::size_t constant(const std::string& name, std::vector<std::size_t> shape, double value);
    std::size_t buffer(const std::string& name, std::vector<std::size_t> shape, double value);

    std::mt19937_64& rng() { return rng_; }
    /// Direct access for initialisations the helpers above cannot express.
    std::vector<double>& values(std::size_t index) { return params_.at(index).values; }
    std::vector<NamedArray> take_params() { return std::move(params_); }
    std::vector<NamedArray> take_buffers() { return std::move(buffers_); }

private:
    std::size_t add(const std::string& name, std::vector<std::size_t> shape);

    std::mt19937_64 rng_;
    std::vector<NamedArray> params_;
    std::vector<NamedArray> buffers_;
};

// --- primitive layers --------------------------------------------------------

class Conv1d final : public Layer {
public:
    /// Kaiming-normal weights (fan_in = in * kernel), zero bias.
    Conv1d(ParamRegistry& reg, const std::string& name, std::size_t in, std::size_t out, std::size_t kernel,
           std::size_t stride = 1, std::size_t padding = 0, bool bias = false);
    Tensor forward(const Tensor& x, Pass& pass) const override;
    Tensor backward(const Tensor& dy, Pass& pass, GradientSet& grads) const override;

    std::size_t out_length(std::size_t in_length) const;

private:
    std::size_t in_, out_, k_, stride_, pad_;
    std::size_t w_;
    long b_ = -1;
};

class BatchNorm1d final : public Layer {
public:
    BatchNorm1d(ParamRegistry& reg, const std::string& name, std::size_t channels, double gamma_init = 1.0);
    Tensor forward(const Tensor& x, Pass& pass) const override;
    Tensor backward(const Tensor& dy, Pass& pass, GradientSet& grads) const override;

    /// Folds the batch statistics recorded on `tape` into the running buffers.
    void commit(const Tape& tape, std::span<NamedArray> buffers, double momentum) const;

    static constexpr double kEps = 1e-5;

private:
    std::size_t c_;
    std::size_t gamma_, beta_, mean_, var_;
};

class ReLU final : public Layer {
public:
    Tensor forward(const Tensor& x, Pass& pass) const override;
    Tensor backward(const Tensor& dy, Pass& pass, GradientSet& grads) const override;
};

/// Exact (erf) GELU.
class GELU final : public Layer {
public:
    Tensor forward(const Tensor& x, Pass& pass) const override;
    Tensor backward(const Tensor& dy, Pass& pass, GradientSet& grads) const override;
};

/// Max pooling; padded positions never win.
class MaxPool1d final : public Layer {
public:
    MaxPool1d(std::size_t kernel, std::size_t stride, std::size_t padding)
        : k_(kernel), stride_(stride), pad_(padding) {}
    Tensor forward(const Tensor& x, Pass& pass) const override;
    Tensor backward(const Tensor& dy, Pass& pass, GradientSet& grads) const override;

private:
    std::size_t k_, stride_, pad_;
};

/// Average pooling with ceil-mode output length; partial windows average
/// over the samples they cover.
class AvgPool1dCeil final : public Layer {
public:
    explicit AvgPool1dCeil(std::size_t kernel) : k_(kernel) {}
    Tensor forward(const Tensor& x, Pass& pass) const override;
    Tensor backward(const Tensor& dy, Pass& pass, GradientSet& grads) const override;

private:
    std::size_t k_;
};

/// [n, c, l] -> [n, c, 1] temporal mean.
class GlobalAvgPool final : public Layer {
public:
    Tensor forward(const Tensor& x, Pass& pass) const override;
    Tensor backward(const Tensor& dy, Pass& pass, GradientSet& grads) const override;
};

/// Dense layer on [n, in, 1] features.
class Linear final : public Layer {
public:
    Linear(ParamRegistry& reg, const std::string& name, std::size_t in, std::size_t out, double gain = 1.0);
    Tensor forward(const Tensor& x, Pass& pass) const override;
    Tensor backward(const Tensor& dy, Pass& pass, GradientSet& grads) const override;

private:
    std::size_t in_, out_, w_, b_;
};

class Sequential final : public Layer {
public:
    Sequential() = default;
    Sequential& add(LayerPtr layer) {
        layers_.push_back(std::move(layer));
        return *this;
    }
    template <class T, class... Args>
    T& emplace(Args&&... args) {
        auto p = std::make_unique<T>(std::forward<Args>(args)...);
        T& ref = *p;
        layers_.push_back(std::move(p));
        return ref;
    }
    bool empty() const { return layers_.empty(); }
    Tensor forward(const Tensor& x, Pass& pass) const override;
    Tensor backward(const Tensor& dy, Pass& pass, GradientSet& grads) const override;

private:
    std::vector<LayerPtr> layers_;
};

/// relu(body(x) + shortcut(x)); an empty shortcut is the identity.
class Residual final : public Layer {
public:
    Residual(std::unique_ptr<Sequential> body, std::unique_ptr<Sequential> shortcut)
        : body_(std::move(body)), shortcut_(std::move(shortcut)) {}
    Tensor forward(const Tensor& x, Pass& pass) const override;
    Tensor backward(const Tensor& dy, Pass& pass, GradientSet& grads) const override;

private:
    std::unique_ptr<Sequential> body_;
    std::unique_ptr<Sequential> shortcut_;
};

/// Parallel 1x1-bottleneck convolutions at several kernel sizes plus a
/// max-pool branch, concatenated, batch-normalised and rectified.
class InceptionBlock final : public Layer {
public:
    InceptionBlock(ParamRegistry& reg, const std::string& name, std::size_t in, std::size_t filters,
                   std::size_t bottleneck, const std::vector<std::size_t>& kernels,
                   std::vector<const BatchNorm1d*>& norms);
    Tensor forward(const Tensor& x, Pass& pass) const override;
    Tensor backward(const Tensor& dy, Pass& pass, GradientSet& grads) const override;

    std::size_t out_channels() const { return filters_ * (convs_.size() + 1); }

private:
    std::size_t filters_;
    std::unique_ptr<Conv1d> bottleneck_;
    std::vector<std::unique_ptr<Conv1d>> convs_;
    MaxPool1d pool_{3, 1, 1};
    std::unique_ptr<Conv1d> pool_conv_;
    std::unique_ptr<BatchNorm1d> bn_;
    ReLU relu_;
};

} // namespace ppgbench::nn
