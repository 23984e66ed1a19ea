#pragma once

#include "ppgbench/nn/layers.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace ppgbench::models {

enum class Architecture { LeNet1D, XResNet1d50, XResNet1d101, Inception1D, S4 };

std::string to_string(Architecture a);
/// Accepts the lower-case tags (`lenet1d`, `xresnet1d50`, ...); throws ValidationError otherwise.
Architecture parse_architecture(const std::string& tag);
const std::vector<Architecture>& all_architectures();

struct ModelSpec {
    Architecture architecture = Architecture::LeNet1D;
    double width_multiplier = 1.0;
    std::size_t input_channels = 1;
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const ModelSpec&) const = default;
};

/// Channel count after width scaling; never below one.
std::size_t scaled(std::size_t base, double width);

struct BpPair {
    double sbp = 0.0;
    double dbp = 0.0;
    bool operator==(const BpPair&) const = default;
};

using Predictions = std::vector<BpPair>;

struct Network;  // layer graph, immutable once built

/// A built architecture plus its parameter and buffer state. Copies share the
/// (immutable) layer graph and own their arrays, so a copy is a snapshot.
///
/// Outputs are `raw * output.scale + output.offset` in mmHg; the trainer sets
/// the two buffers from the training labels so the network works on a unit scale.
class Model {
public:
    const ModelSpec& spec() const { return spec_; }
    std::vector<nn::NamedArray>& parameters() { return params_; }
    const std::vector<nn::NamedArray>& parameters() const { return params_; }
    std::vector<nn::NamedArray>& buffers() { return buffers_; }
    const std::vector<nn::NamedArray>& buffers() const { return buffers_; }

    std::size_t minimum_input_length() const;
    std::size_t parameter_count() const;

    void set_output_scaling(BpPair offset, BpPair scale);
    BpPair output_offset() const;
    BpPair output_scale() const;

    /// Throws ValidationError on a wrong channel count or a too-short input.
    void check_input(const nn::Tensor& batch) const;

    const Network& network() const { return *net_; }

private:
    friend Model build_model(const ModelSpec& spec);

    ModelSpec spec_;
    std::shared_ptr<const Network> net_;
    std::vector<nn::NamedArray> params_;
    std::vector<nn::NamedArray> buffers_;
};

Model build_model(const ModelSpec& spec);

/// Inference-mode predictions for `batch` [n, channels, length].
Predictions forward(const Model& model, const nn::Tensor& batch);

/// Loss over mmHg predictions; fills dLoss/dPrediction and returns the loss.
using LossFn = std::function<double(const Predictions& predictions, Predictions& grad)>;

struct GradientResult {
    double loss = 0.0;
    Predictions predictions;
    nn::GradientSet grads;  // parallel to model.parameters()
    std::shared_ptr<nn::Tape> tape;
};

/// Training-mode forward and backward pass. Batch-norm layers use batch
/// statistics; running statistics are not touched (see commit_batch_statistics).
/// Throws NonFiniteLoss carrying `batch_index` when the loss is not finite.
GradientResult gradients(const Model& model, const nn::Tensor& batch, const LossFn& loss,
                         std::size_t batch_index = 0, nn::Mode mode = nn::Mode::Train);

/// Folds the batch statistics recorded by `gradients` into the running buffers.
void commit_batch_statistics(Model& model, const GradientResult& result, double momentum = 0.1);

nn::GradientSet zero_gradients(const Model& model);

// Checkpoint directory: spec.json, index.json and one float32 blob per array.
void save_checkpoint(const Model& model, const std::filesystem::path& dir);
Model load_checkpoint(const std::filesystem::path& dir);

} // namespace ppgbench::models
