#include "network.hpp"

#include "ppgbench/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace ppgbench::models {

namespace {

const std::vector<std::pair<Architecture, std::string>>& tags() {
    static const std::vector<std::pair<Architecture, std::string>> t{
        {Architecture::LeNet1D, "lenet1d"},
        {Architecture::XResNet1d50, "xresnet1d50"},
        {Architecture::XResNet1d101, "xresnet1d101"},
        {Architecture::Inception1D, "inception1d"},
        {Architecture::S4, "s4"},
    };
    return t;
}

} // namespace

std::string to_string(Architecture a) {
    for (const auto& [arch, tag] : tags())
        if (arch == a) return tag;
    return "unknown";
}

Architecture parse_architecture(const std::string& tag) {
    std::string lower = tag;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    for (const auto& [arch, t] : tags())
        if (t == lower) return arch;
    throw ValidationError("unknown architecture '" + tag +
                          "' (expected lenet1d, xresnet1d50, xresnet1d101, inception1d or s4)");
}

const std::vector<Architecture>& all_architectures() {
    static const std::vector<Architecture> all{Architecture::LeNet1D, Architecture::XResNet1d50,
                                               Architecture::XResNet1d101, Architecture::Inception1D,
                                               Architecture::S4};
    return all;
}

void ModelSpec::validate() const {
    if (!(width_multiplier > 0.0) || !std::isfinite(width_multiplier))
        throw ValidationError("width_multiplier must be a positive finite number");
    if (input_channels == 0) throw ValidationError("input_channels must be at least 1");
}

std::size_t scaled(std::size_t base, double width) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(base) * width)));
}

std::size_t Model::minimum_input_length() const { return net_->minimum_length; }

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.values.size();
    return n;
}

void Model::set_output_scaling(BpPair offset, BpPair scale) {
    buffers_[net_->offset_buffer].values = {offset.sbp, offset.dbp};
    buffers_[net_->scale_buffer].values = {scale.sbp, scale.dbp};
}

BpPair Model::output_offset() const {
    const auto& v = buffers_[net_->offset_buffer].values;
    return {v[0], v[1]};
}

BpPair Model::output_scale() const {
    const auto& v = buffers_[net_->scale_buffer].values;
    return {v[0], v[1]};
}

void Model::check_input(const nn::Tensor& batch) const {
    if (batch.c() != spec_.input_channels)
        throw ValidationError("expected " + std::to_string(spec_.input_channels) + " input channel(s), got batch " +
                              batch.shape_string());
    if (batch.l() < minimum_input_length())
        throw ValidationError("input length " + std::to_string(batch.l()) + " is below the minimum input length " +
                              std::to_string(minimum_input_length()) + " of " + to_string(spec_.architecture));
    if (batch.n() == 0) throw ValidationError("empty batch");
}

Model build_model(const ModelSpec& spec) {
    auto built = build_network(spec);
    Model m;
    m.spec_ = spec;
    m.net_ = std::move(built.network);
    m.params_ = std::move(built.params);
    m.buffers_ = std::move(built.buffers);
    return m;
}

namespace {

Predictions to_mmhg(const Model& model, const nn::Tensor& raw) {
    const auto off = model.output_offset();
    const auto sc = model.output_scale();
    Predictions out(raw.n());
    for (std::size_t i = 0; i < raw.n(); ++i)
        out[i] = {raw(i, 0, 0) * sc.sbp + off.sbp, raw(i, 1, 0) * sc.dbp + off.dbp};
    return out;
}

} // namespace

Predictions forward(const Model& model, const nn::Tensor& batch) {
    model.check_input(batch);
    nn::Pass pass{nn::Mode::Eval, nullptr, model.parameters(), model.buffers()};
    return to_mmhg(model, model.network().body->forward(batch, pass));
}

nn::GradientSet zero_gradients(const Model& model) {
    nn::GradientSet g;
    g.reserve(model.parameters().size());
    for (const auto& p : model.parameters()) g.emplace_back(p.values.size(), 0.0);
    return g;
}

GradientResult gradients(const Model& model, const nn::Tensor& batch, const LossFn& loss, std::size_t batch_index,
                         nn::Mode mode) {
    model.check_input(batch);
    GradientResult r;
    r.tape = std::make_shared<nn::Tape>();
    nn::Pass pass{mode, r.tape.get(), model.parameters(), model.buffers()};
    const auto& body = *model.network().body;
    const nn::Tensor raw = body.forward(batch, pass);
    r.predictions = to_mmhg(model, raw);
    Predictions dpred(r.predictions.size());
    r.loss = loss(r.predictions, dpred);
    if (!std::isfinite(r.loss)) throw NonFiniteLoss(batch_index);

    const auto sc = model.output_scale();
    nn::Tensor draw(raw.n(), 2, 1);
    for (std::size_t i = 0; i < raw.n(); ++i) {
        draw(i, 0, 0) = dpred[i].sbp * sc.sbp;
        draw(i, 1, 0) = dpred[i].dbp * sc.dbp;
    }
    r.grads = zero_gradients(model);
    body.backward(draw, pass, r.grads);
    return r;
}

void commit_batch_statistics(Model& model, const GradientResult& result, double momentum) {
    for (const auto* bn : model.network().norms) bn->commit(*result.tape, model.buffers(), momentum);
}

} // namespace ppgbench::models
