// Layer tables for the model zoo. Channel counts below are at width 1.0;
// every count is multiplied by the width multiplier and rounded (minimum 1).
// All convolutions use "same" padding (kernel / 2).
//
// lenet1d (downsampling x4, minimum length 8)
//   conv k5 1->32 +bias, relu, maxpool 2
//   conv k5 32->64 +bias, relu, maxpool 2
//   global avg pool, linear 64->128, relu, linear 128->2
//
// xresnet1d50 / xresnet1d101 (downsampling x32, minimum length 64)
//   stem: conv k5 s2 1->32, conv k5 32->32, conv k5 32->64 (each conv+bn+relu, no bias)
//         maxpool k3 s2 p1
//   stages of bottleneck blocks, [3,4,6,3] (50) or [3,4,23,3] (101),
//   widths 64/128/256/512, expansion 4, stride 2 on the first block of stages 2-4:
//     conv1x1 -> conv k5 (stride) -> conv1x1 (x4), each +bn, last bn gamma = 0
//     shortcut: avgpool 2 (ceil) if strided, conv1x1+bn if channels change
//     relu(body + shortcut)
//   global avg pool, linear 2048->2
//
// inception1d (no downsampling, minimum length 2)
//   6 inception blocks: bottleneck conv1x1 ->32, convs k39/k19/k9 ->32 each,
//   maxpool k3 s1 p1 -> conv1x1 ->32; concat (128), bn, relu
//   residual around each group of 3 blocks: relu(group + bn(conv1x1(x)))
//   global avg pool, linear 128->2
//
// s4 (no downsampling, minimum length 2)
//   conv1x1 1->128 +bias
//   4 blocks: bn(x + conv1x1(gelu(s4d(x)))), s4d state size 64
//   global avg pool, linear 128->2

#include "network.hpp"

#include "ppgbench/errors.hpp"
#include "ppgbench/nn/s4.hpp"

#include <cmath>

namespace ppgbench::models {

namespace {

using namespace ppgbench::nn;

std::unique_ptr<Sequential> lenet(ParamRegistry& reg, const ModelSpec& s, Network& net) {
    const std::size_t c1 = scaled(32, s.width_multiplier), c2 = scaled(64, s.width_multiplier),
                      h = scaled(128, s.width_multiplier);
    auto seq = std::make_unique<Sequential>();
    seq->emplace<Conv1d>(reg, "conv1", s.input_channels, c1, 5, 1, 2, true);
    seq->emplace<ReLU>();
    seq->emplace<MaxPool1d>(2, 2, 0);
    seq->emplace<Conv1d>(reg, "conv2", c1, c2, 5, 1, 2, true);
    seq->emplace<ReLU>();
    seq->emplace<MaxPool1d>(2, 2, 0);
    seq->emplace<GlobalAvgPool>();
    seq->emplace<Linear>(reg, "fc1", c2, h, std::sqrt(2.0));
    seq->emplace<ReLU>();
    seq->emplace<Linear>(reg, "head", h, 2);
    net.minimum_length = 4 * 2;
    return seq;
}

void conv_bn(Sequential& seq, ParamRegistry& reg, Network& net, const std::string& name, std::size_t in,
             std::size_t out, std::size_t k, std::size_t stride, bool relu, double gamma = 1.0) {
    seq.emplace<Conv1d>(reg, name + ".conv", in, out, k, stride, k / 2);
    net.norms.push_back(&seq.emplace<BatchNorm1d>(reg, name + ".bn", out, gamma));
    if (relu) seq.emplace<ReLU>();
}

std::unique_ptr<Sequential> xresnet(ParamRegistry& reg, const ModelSpec& s, Network& net,
                                    const std::vector<std::size_t>& depths) {
    const double w = s.width_multiplier;
    constexpr std::size_t kExpansion = 4, kKernel = 5;
    auto seq = std::make_unique<Sequential>();
    const std::size_t stem[3] = {scaled(32, w), scaled(32, w), scaled(64, w)};
    conv_bn(*seq, reg, net, "stem0", s.input_channels, stem[0], kKernel, 2, true);
    conv_bn(*seq, reg, net, "stem1", stem[0], stem[1], kKernel, 1, true);
    conv_bn(*seq, reg, net, "stem2", stem[1], stem[2], kKernel, 1, true);
    seq->emplace<MaxPool1d>(3, 2, 1);

    std::size_t in = stem[2];
    const std::size_t bases[4] = {64, 128, 256, 512};
    for (std::size_t st = 0; st < depths.size(); ++st) {
        const std::size_t hidden = scaled(bases[st], w), out = hidden * kExpansion;
        for (std::size_t b = 0; b < depths[st]; ++b) {
            const std::string name = "stage" + std::to_string(st + 1) + ".block" + std::to_string(b);
            const std::size_t stride = (b == 0 && st > 0) ? 2 : 1;
            auto body = std::make_unique<Sequential>();
            conv_bn(*body, reg, net, name + ".c1", in, hidden, 1, 1, true);
            conv_bn(*body, reg, net, name + ".c2", hidden, hidden, kKernel, stride, true);
            conv_bn(*body, reg, net, name + ".c3", hidden, out, 1, 1, false, 0.0);
            auto shortcut = std::make_unique<Sequential>();
            if (stride != 1) shortcut->emplace<AvgPool1dCeil>(stride);
            if (in != out) conv_bn(*shortcut, reg, net, name + ".id", in, out, 1, 1, false);
            seq->add(std::make_unique<Residual>(std::move(body), std::move(shortcut)));
            in = out;
        }
    }
    seq->emplace<GlobalAvgPool>();
    seq->emplace<Linear>(reg, "head", in, 2);
    net.minimum_length = 32 * 2;
    return seq;
}

std::unique_ptr<Sequential> inception(ParamRegistry& reg, const ModelSpec& s, Network& net) {
    const double w = s.width_multiplier;
    const std::size_t filters = scaled(32, w), bottleneck = scaled(32, w);
    const std::vector<std::size_t> kernels{39, 19, 9};
    const std::size_t out = filters * (kernels.size() + 1);
    auto seq = std::make_unique<Sequential>();
    std::size_t in = s.input_channels;
    for (std::size_t g = 0; g < 2; ++g) {
        auto body = std::make_unique<Sequential>();
        std::size_t block_in = in;
        for (std::size_t d = 0; d < 3; ++d) {
            const std::string name = "block" + std::to_string(g * 3 + d);
            body->emplace<InceptionBlock>(reg, name, block_in, filters, bottleneck, kernels, net.norms);
            block_in = out;
        }
        auto shortcut = std::make_unique<Sequential>();
        conv_bn(*shortcut, reg, net, "shortcut" + std::to_string(g), in, out, 1, 1, false);
        seq->add(std::make_unique<Residual>(std::move(body), std::move(shortcut)));
        in = out;
    }
    seq->emplace<GlobalAvgPool>();
    seq->emplace<Linear>(reg, "head", out, 2);
    net.minimum_length = 2;
    return seq;
}

std::unique_ptr<Sequential> s4(ParamRegistry& reg, const ModelSpec& s, Network& net) {
    const std::size_t h = scaled(128, s.width_multiplier);
    constexpr std::size_t kStateSize = 64;
    auto seq = std::make_unique<Sequential>();
    seq->emplace<Conv1d>(reg, "encoder", s.input_channels, h, 1, 1, 0, true);
    for (std::size_t b = 0; b < 4; ++b)
        seq->emplace<S4Block>(reg, "block" + std::to_string(b), h, kStateSize, net.norms);
    seq->emplace<GlobalAvgPool>();
    seq->emplace<Linear>(reg, "head", h, 2);
    net.minimum_length = 2;
    return seq;
}

} // namespace

BuiltNetwork build_network(const ModelSpec& spec) {
    spec.validate();
    nn::ParamRegistry reg(spec.seed);
    auto net = std::make_shared<Network>();
    switch (spec.architecture) {
    case Architecture::LeNet1D: net->body = lenet(reg, spec, *net); break;
    case Architecture::XResNet1d50: net->body = xresnet(reg, spec, *net, {3, 4, 6, 3}); break;
    case Architecture::XResNet1d101: net->body = xresnet(reg, spec, *net, {3, 4, 23, 3}); break;
    case Architecture::Inception1D: net->body = inception(reg, spec, *net); break;
    case Architecture::S4: net->body = s4(reg, spec, *net); break;
    }
    net->offset_buffer = reg.buffer("output.offset", {2}, 0.0);
    net->scale_buffer = reg.buffer("output.scale", {2}, 1.0);
    return {net, reg.take_params(), reg.take_buffers()};
}

} // namespace ppgbench::models
