#include "ppgbench/nn/s4.hpp"

#include <Eigen/Core>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace ppgbench::nn {

namespace {

using cd = std::complex<double>;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct S4Cache : LayerCache {
    Tensor input;
};

// Upper-triangular Toeplitz operator: (u T)[t] = sum_{s<=t} K[t-s] u[s].
RowMat toeplitz(const std::vector<double>& k) {
    const auto L = static_cast<Eigen::Index>(k.size());
    RowMat t = RowMat::Zero(L, L);
    for (Eigen::Index s = 0; s < L; ++s)
        for (Eigen::Index j = s; j < L; ++j) t(s, j) = k[static_cast<std::size_t>(j - s)];
    return t;
}

RowMat gather_channel(const Tensor& x, std::size_t ch) {
    RowMat u(static_cast<Eigen::Index>(x.n()), static_cast<Eigen::Index>(x.l()));
    for (std::size_t i = 0; i < x.n(); ++i)
        std::copy(x.row(i, ch), x.row(i, ch) + x.l(), u.row(static_cast<Eigen::Index>(i)).data());
    return u;
}

} // namespace

S4DLayer::S4DLayer(ParamRegistry& reg, const std::string& name, std::size_t channels, std::size_t state_size)
    : h_(channels), m_(state_size / 2) {
    if (m_ == 0) throw std::invalid_argument("s4d: state size must be at least 2");
    log_dt_ = reg.uniform(name + ".log_dt", {h_}, std::log(1e-3), std::log(1e-1));
    c_re_ = reg.normal(name + ".C_re", {h_, m_}, std::sqrt(0.5));
    c_im_ = reg.normal(name + ".C_im", {h_, m_}, std::sqrt(0.5));
    // S4D-Lin: A_m = -1/2 + i*pi*m
    log_a_re_ = reg.constant(name + ".log_A_re", {h_, m_}, std::log(0.5));
    a_im_ = reg.constant(name + ".A_im", {h_, m_}, 0.0);
    auto& im = reg.values(a_im_);
    for (std::size_t h = 0; h < h_; ++h)
        for (std::size_t m = 0; m < m_; ++m) im[h * m_ + m] = std::numbers::pi * static_cast<double>(m);
    d_ = reg.normal(name + ".D", {h_}, 1.0);
}

std::vector<double> S4DLayer::kernel(const Pass& pass, std::size_t ch, std::size_t length) const {
    const double dt = std::exp(pass.params[log_dt_].values[ch]);
    std::vector<double> k(length, 0.0);
    for (std::size_t m = 0; m < m_; ++m) {
        const std::size_t j = ch * m_ + m;
        const cd a(-std::exp(pass.params[log_a_re_].values[j]), pass.params[a_im_].values[j]);
        const cd c(pass.params[c_re_].values[j], pass.params[c_im_].values[j]);
        const cd z = std::exp(dt * a);
        cd p = 2.0 * c * (z - 1.0) / a;  // coefficient times z^l
        for (std::size_t l = 0; l < length; ++l) {
            k[l] += p.real();
            p *= z;
        }
    }
    return k;
}

Tensor S4DLayer::forward(const Tensor& x, Pass& pass) const {
    if (x.c() != h_) throw std::invalid_argument("s4d: channel mismatch " + x.shape_string());
    const std::size_t n = x.n(), L = x.l();
    Tensor y(n, h_, L);
    const auto& D = pass.params[d_].values;
    for (std::size_t ch = 0; ch < h_; ++ch) {
        const RowMat u = gather_channel(x, ch);
        const RowMat out = u * toeplitz(kernel(pass, ch, L));
        for (std::size_t i = 0; i < n; ++i) {
            const double* r = x.row(i, ch);
            double* o = y.row(i, ch);
            for (std::size_t t = 0; t < L; ++t)
                o[t] = out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) + D[ch] * r[t];
        }
    }
    if (pass.tape) pass.tape->put<S4Cache>(this).input = x;
    return y;
}

Tensor S4DLayer::backward(const Tensor& dy, Pass& pass, GradientSet& grads) const {
    const Tensor& x = pass.tape->get<S4Cache>(this).input;
    const std::size_t n = x.n(), L = x.l();
    const auto& D = pass.params[d_].values;
    Tensor dx(n, h_, L);
    for (std::size_t ch = 0; ch < h_; ++ch) {
        const RowMat u = gather_channel(x, ch);
        const RowMat g = gather_channel(dy, ch);
        const RowMat du = g * toeplitz(kernel(pass, ch, L)).transpose();
        double gd = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double* r = x.row(i, ch);
            const double* d = dy.row(i, ch);
            double* o = dx.row(i, ch);
            for (std::size_t t = 0; t < L; ++t) {
                o[t] = du(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) + D[ch] * d[t];
                gd += d[t] * r[t];
            }
        }
        grads[d_][ch] += gd;

        // dK[l] = sum over samples and t of g[t] u[t-l]: diagonal sums of u^T g.
        const RowMat corr = u.transpose() * g;
        std::vector<double> dk(L, 0.0);
        for (std::size_t s = 0; s < L; ++s)
            for (std::size_t t = s; t < L; ++t)
                dk[t - s] += corr(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t));

        // Chain through K[l] = 2 Re sum_m C (z-1)/A z^l with z = exp(dt A).
        const double dt = std::exp(pass.params[log_dt_].values[ch]);
        double gdt = 0.0;
        for (std::size_t m = 0; m < m_; ++m) {
            const std::size_t j = ch * m_ + m;
            const double a_re = -std::exp(pass.params[log_a_re_].values[j]);
            const cd a(a_re, pass.params[a_im_].values[j]);
            const cd c(pass.params[c_re_].values[j], pass.params[c_im_].values[j]);
            const cd z = std::exp(dt * a);
            cd S = 0.0, U = 0.0, zl = 1.0;
            for (std::size_t l = 0; l < L; ++l) {
                S += dk[l] * zl;
                U += dk[l] * static_cast<double>(l) * zl;
                zl *= z;
            }
            const cd w = (z - 1.0) / a;
            const cd gc = 2.0 * w * S;
            grads[c_re_][j] += gc.real();
            grads[c_im_][j] -= gc.imag();
            const cd dw = (dt * z * a - (z - 1.0)) / (a * a);
            const cd ga = 2.0 * c * (dw * S + w * dt * U);
            grads[log_a_re_][j] += ga.real() * a_re;
            grads[a_im_][j] -= ga.imag();
            gdt += (2.0 * c * (z * S + (z - 1.0) * U)).real();
        }
        grads[log_dt_][ch] += gdt * dt;
    }
    return dx;
}

S4Block::S4Block(ParamRegistry& reg, const std::string& name, std::size_t channels, std::size_t state_size,
                 std::vector<const BatchNorm1d*>& norms) {
    s4_ = std::make_unique<S4DLayer>(reg, name + ".s4d", channels, state_size);
    mix_ = std::make_unique<Conv1d>(reg, name + ".mix", channels, channels, 1, 1, 0, true);
    norm_ = std::make_unique<BatchNorm1d>(reg, name + ".norm", channels);
    norms.push_back(norm_.get());
}

Tensor S4Block::forward(const Tensor& x, Pass& pass) const {
    Tensor z = mix_->forward(gelu_.forward(s4_->forward(x, pass), pass), pass);
    z += x;
    return norm_->forward(z, pass);
}

Tensor S4Block::backward(const Tensor& dy, Pass& pass, GradientSet& grads) const {
    const Tensor dz = norm_->backward(dy, pass, grads);
    Tensor dx = s4_->backward(gelu_.backward(mix_->backward(dz, pass, grads), pass, grads), pass, grads);
    dx += dz;
    return dx;
}

} // namespace ppgbench::nn
