#include "ppgbench/nn/tensor.hpp"

#include <algorithm>
#include <stdexcept>

namespace ppgbench::nn {

std::string Tensor::shape_string() const {
    return "[" + std::to_string(n_) + "," + std::to_string(c_) + "," + std::to_string(l_) + "]";
}

Tensor& Tensor::operator+=(const Tensor& o) {
    if (!same_shape(o)) throw std::invalid_argument("tensor shape mismatch " + shape_string() + " vs " + o.shape_string());
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
}

Tensor concat_channels(std::span<const Tensor> parts) {
    if (parts.empty()) return {};
    const std::size_t n = parts[0].n(), l = parts[0].l();
    std::size_t c = 0;
    for (const auto& p : parts) {
        if (p.n() != n || p.l() != l) throw std::invalid_argument("concat_channels: shape mismatch");
        c += p.c();
    }
    Tensor out(n, c, l);
    for (std::size_t i = 0; i < n; ++i) {
        double* dst = out.sample(i);
        for (const auto& p : parts) {
            const double* src = p.sample(i);
            dst = std::copy(src, src + p.c() * l, dst);
        }
    }
    return out;
}

Tensor slice_channels(const Tensor& t, std::size_t first, std::size_t count) {
    Tensor out(t.n(), count, t.l());
    for (std::size_t i = 0; i < t.n(); ++i) {
        const double* src = t.row(i, first);
        std::copy(src, src + count * t.l(), out.sample(i));
    }
    return out;
}

} // namespace ppgbench::nn
