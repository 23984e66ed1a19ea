#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ppgbench::nn {

/// Dense activation tensor laid out as [batch, channels, length], row-major.
/// Feature vectors (after pooling) use length 1.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::size_t n, std::size_t c, std::size_t l, double fill = 0.0)
        : n_(n), c_(c), l_(l), data_(n * c * l, fill) {}

    std::size_t n() const { return n_; }
    std::size_t c() const { return c_; }
    std::size_t l() const { return l_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    double* sample(std::size_t i) { return data_.data() + i * c_ * l_; }
    const double* sample(std::size_t i) const { return data_.data() + i * c_ * l_; }
    double* row(std::size_t i, std::size_t ch) { return data_.data() + (i * c_ + ch) * l_; }
    const double* row(std::size_t i, std::size_t ch) const { return data_.data() + (i * c_ + ch) * l_; }

    double& operator()(std::size_t i, std::size_t ch, std::size_t t) { return data_[(i * c_ + ch) * l_ + t]; }
    double operator()(std::size_t i, std::size_t ch, std::size_t t) const { return data_[(i * c_ + ch) * l_ + t]; }

    bool same_shape(const Tensor& o) const { return n_ == o.n_ && c_ == o.c_ && l_ == o.l_; }
    std::string shape_string() const;

    Tensor& operator+=(const Tensor& o);

    bool operator==(const Tensor&) const = default;

private:
    std::size_t n_ = 0, c_ = 0, l_ = 0;
    std::vector<double> data_;
};

/// Stacks channel blocks of tensors that share batch and length.
Tensor concat_channels(std::span<const Tensor> parts);

/// Copies channels [first, first + count) into a new tensor.
Tensor slice_channels(const Tensor& t, std::size_t first, std::size_t count);

} // namespace ppgbench::nn
