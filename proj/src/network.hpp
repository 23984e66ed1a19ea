#pragma once

#include "ppgbench/models.hpp"
#include "ppgbench/nn/layers.hpp"

namespace ppgbench::models {

struct Network {
    nn::LayerPtr body;  // [n, in, L] -> [n, 2, 1] raw outputs
    std::vector<const nn::BatchNorm1d*> norms;
    std::size_t minimum_length = 2;
    std::size_t offset_buffer = 0;
    std::size_t scale_buffer = 0;
};

struct BuiltNetwork {
    std::shared_ptr<Network> network;
    std::vector<nn::NamedArray> params;
    std::vector<nn::NamedArray> buffers;
};

BuiltNetwork build_network(const ModelSpec& spec);

} // namespace ppgbench::models
