#pragma once

#include "ppgbench/nn/layers.hpp"

namespace ppgbench::nn {

/// Diagonal state-space convolution (S4D). Each of the `channels` features
/// owns `state_size / 2` complex modes; the layer materialises a length-L
/// real kernel per channel and applies it causally, plus a skip term D*u.
///
/// Parameters per channel: log_dt, C (re/im), log(-Re A), Im A, D.
class S4DLayer final : public Layer {
public:
    S4DLayer(ParamRegistry& reg, const std::string& name, std::size_t channels, std::size_t state_size = 64);
    Tensor forward(const Tensor& x, Pass& pass) const override;
    Tensor backward(const Tensor& dy, Pass& pass, GradientSet& grads) const override;

    /// Kernel for one channel, exposed for tests.
    std::vector<double> kernel(const Pass& pass, std::size_t channel, std::size_t length) const;

private:
    std::size_t h_, m_;
    std::size_t log_dt_, c_re_, c_im_, log_a_re_, a_im_, d_;
};

/// x + conv1x1(gelu(s4d(x))), followed by batch norm.
class S4Block final : public Layer {
public:
    S4Block(ParamRegistry& reg, const std::string& name, std::size_t channels, std::size_t state_size,
            std::vector<const BatchNorm1d*>& norms);
    Tensor forward(const Tensor& x, Pass& pass) const override;
    Tensor backward(const Tensor& dy, Pass& pass, GradientSet& grads) const override;

private:
    std::unique_ptr<S4DLayer> s4_;
    GELU gelu_;
    std::unique_ptr<Conv1d> mix_;
    std::unique_ptr<BatchNorm1d> norm_;
};

} // namespace ppgbench::nn
