#include "ppgbench/nn/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace ppgbench::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMat>;
using CMapRM = Eigen::Map<const RowMat>;

std::size_t product(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

struct InputCache : LayerCache {
    Tensor input;
};

struct OutputCache : LayerCache {
    Tensor output;
};

} // namespace

// --- ParamRegistry -------------------------------------------------------------

std::size_t ParamRegistry::add(const std::string& name, std::vector<std::size_t> shape) {
    for (const auto& p : params_)
        if (p.name == name) throw std::logic_error("duplicate parameter name " + name);
    NamedArray a{name, shape, std::vector<double>(product(shape), 0.0)};
    params_.push_back(std::move(a));
    return params_.size() - 1;
}

std::size_t ParamRegistry::normal(const std::string& name, std::vector<std::size_t> shape, double stddev) {
    auto idx = add(name, std::move(shape));
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& v : params_[idx].values) v = dist(rng_);
    return idx;
}

std::size_t ParamRegistry::uniform(const std::string& name, std::vector<std::size_t> shape, double low,
                                   double high) {
    auto idx = add(name, std::move(shape));
    std::uniform_real_distribution<double> dist(low, high);
    for (auto& v : params_[idx].values) v = dist(rng_);
    return idx;
}

std::size_t ParamRegistry::constant(const std::string& name, std::vector<std::size_t> shape, double value) {
    auto idx = add(name, std::move(shape));
    std::fill(params_[idx].values.begin(), params_[idx].values.end(), value);
    return idx;
}

std::size_t ParamRegistry::buffer(const std::string& name, std::vector<std::size_t> shape, double value) {
    const auto n = product(shape);
    buffers_.push_back({name, std::move(shape), std::vector<double>(n, value)});
    return buffers_.size() - 1;
}

// --- Conv1d --------------------------------------------------------------------

Conv1d::Conv1d(ParamRegistry& reg, const std::string& name, std::size_t in, std::size_t out, std::size_t kernel,
               std::size_t stride, std::size_t padding, bool bias)
    : in_(in), out_(out), k_(kernel), stride_(stride), pad_(padding) {
    const double fan_in = static_cast<double>(in * kernel);
    w_ = reg.normal(name + ".weight", {out, in, kernel}, std::sqrt(2.0 / fan_in));
    if (bias) b_ = static_cast<long>(reg.constant(name + ".bias", {out}, 0.0));
}

std::size_t Conv1d::out_length(std::size_t in_length) const {
    if (in_length + 2 * pad_ < k_) throw std::invalid_argument("conv1d: input shorter than kernel");
    return (in_length + 2 * pad_ - k_) / stride_ + 1;
}

namespace {

void im2col(const double* x, std::size_t in, std::size_t L, std::size_t k, std::size_t stride, std::size_t pad,
            std::size_t lout, RowMat& cols) {
    for (std::size_t ci = 0; ci < in; ++ci) {
        const double* xr = x + ci * L;
        for (std::size_t kk = 0; kk < k; ++kk) {
            double* dst = cols.data() + (ci * k + kk) * lout;
            for (std::size_t t = 0; t < lout; ++t) {
                const long pos = static_cast<long>(t * stride + kk) - static_cast<long>(pad);
                dst[t] = (pos >= 0 && pos < static_cast<long>(L)) ? xr[pos] : 0.0;
            }
        }
    }
}

void col2im_add(const RowMat& cols, std::size_t in, std::size_t L, std::size_t k, std::size_t stride,
                std::size_t pad, std::size_t lout, double* dx) {
    for (std::size_t ci = 0; ci < in; ++ci) {
        double* dr = dx + ci * L;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double* src = cols.data() + (ci * k + kk) * lout;
            for (std::size_t t = 0; t < lout; ++t) {
                const long pos = static_cast<long>(t * stride + kk) - static_cast<long>(pad);
                if (pos >= 0 && pos < static_cast<long>(L)) dr[pos] += src[t];
            }
        }
    }
}

} // namespace

Tensor Conv1d::forward(const Tensor& x, Pass& pass) const {
    if (x.c() != in_)
        throw std::invalid_argument("conv1d: expected " + std::to_string(in_) + " channels, got " + x.shape_string());
    const std::size_t L = x.l();
    const std::size_t lout = out_length(L);
    const bool pointwise = k_ == 1 && stride_ == 1 && pad_ == 0;
    Tensor y(x.n(), out_, lout);
    CMapRM W(pass.params[w_].values.data(), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(in_ * k_));
    RowMat cols;
    if (!pointwise) cols.resize(static_cast<Eigen::Index>(in_ * k_), static_cast<Eigen::Index>(lout));
    for (std::size_t i = 0; i < x.n(); ++i) {
        MapRM Y(y.sample(i), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(lout));
        if (pointwise) {
            Y.noalias() = W * CMapRM(x.sample(i), static_cast<Eigen::Index>(in_), static_cast<Eigen::Index>(L));
        } else {
            im2col(x.sample(i), in_, L, k_, stride_, pad_, lout, cols);
            Y.noalias() = W * cols;
        }
        if (b_ >= 0) {
            const auto& b = pass.params[static_cast<std::size_t>(b_)].values;
            for (std::size_t o = 0; o < out_; ++o) Y.row(static_cast<Eigen::Index>(o)).array() += b[o];
        }
    }
    if (pass.tape) pass.tape->put<InputCache>(this).input = x;
    return y;
}

Tensor Conv1d::backward(const Tensor& dy, Pass& pass, GradientSet& grads) const {
    const Tensor& x = pass.tape->get<InputCache>(this).input;
    const std::size_t L = x.l();
    const std::size_t lout = dy.l();
    const bool pointwise = k_ == 1 && stride_ == 1 && pad_ == 0;
    Tensor dx(x.n(), in_, L);
    const auto ik = static_cast<Eigen::Index>(in_ * k_);
    CMapRM W(pass.params[w_].values.data(), static_cast<Eigen::Index>(out_), ik);
    MapRM GW(grads[w_].data(), static_cast<Eigen::Index>(out_), ik);
    RowMat cols, dcols;
    if (!pointwise) cols.resize(ik, static_cast<Eigen::Index>(lout));
    for (std::size_t i = 0; i < x.n(); ++i) {
        CMapRM DY(dy.sample(i), static_cast<Eigen::Index>(out_), static_cast<Eigen::Index>(lout));
        if (pointwise) {
            CMapRM X(x.sample(i), static_cast<Eigen::Index>(in_), static_cast<Eigen::Index>(L));
            GW.noalias() += DY * X.transpose();
            MapRM(dx.sample(i), static_cast<Eigen::Index>(in_), static_cast<Eigen::Index>(L)).noalias() =
                W.transpose() * DY;
        } else {
            im2col(x.sample(i), in_, L, k_, stride_, pad_, lout, cols);
            GW.noalias() += DY * cols.transpose();
            dcols.noalias() = W.transpose() * DY;
            col2im_add(dcols, in_, L, k_, stride_, pad_, lout, dx.sample(i));
        }
        if (b_ >= 0) {
            auto& gb = grads[static_cast<std::size_t>(b_)];
            for (std::size_t o = 0; o < out_; ++o) gb[o] += DY.row(static_cast<Eigen::Index>(o)).sum();
        }
    }
    return dx;
}

// --- BatchNorm1d ---------------------------------------------------------------

namespace {

struct BatchNormCache : LayerCache {
    Tensor xhat;
    std::vector<double> inv_std;
    std::vector<double> batch_mean;
    std::vector<double> batch_var;  // biased
    std::size_t count = 0;
    bool train = false;
};

} // namespace

BatchNorm1d::BatchNorm1d(ParamRegistry& reg, const std::string& name, std::size_t channels, double gamma_init)
    : c_(channels) {
    gamma_ = reg.constant(name + ".weight", {channels}, gamma_init);
    beta_ = reg.constant(name + ".bias", {channels}, 0.0);
    mean_ = reg.buffer(name + ".running_mean", {channels}, 0.0);
    var_ = reg.buffer(name + ".running_var", {channels}, 1.0);
}

Tensor BatchNorm1d::forward(const Tensor& x, Pass& pass) const {
    if (x.c() != c_) throw std::invalid_argument("batchnorm: channel mismatch " + x.shape_string());
    const auto& gamma = pass.params[gamma_].values;
    const auto& beta = pass.params[beta_].values;
    const std::size_t n = x.n(), L = x.l();
    const std::size_t count = n * L;
    std::vector<double> mean(c_), var(c_), inv(c_);
    const bool train = pass.mode == Mode::Train;
    if (train) {
        if (count < 2) throw std::invalid_argument("batchnorm: training needs more than one value per channel");
        for (std::size_t ch = 0; ch < c_; ++ch) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double* r = x.row(i, ch);
                for (std::size_t t = 0; t < L; ++t) s += r[t];
            }
            const double m = s / static_cast<double>(count);
            double v = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double* r = x.row(i, ch);
                for (std::size_t t = 0; t < L; ++t) v += (r[t] - m) * (r[t] - m);
            }
            mean[ch] = m;
            var[ch] = v / static_cast<double>(count);
        }
    } else {
        mean = pass.buffers[mean_].values;
        var = pass.buffers[var_].values;
    }
    for (std::size_t ch = 0; ch < c_; ++ch) inv[ch] = 1.0 / std::sqrt(var[ch] + kEps);

    Tensor y(n, c_, L);
    Tensor xhat;
    if (pass.tape) xhat = Tensor(n, c_, L);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c_; ++ch) {
            const double* r = x.row(i, ch);
            double* o = y.row(i, ch);
            double* h = pass.tape ? xhat.row(i, ch) : nullptr;
            for (std::size_t t = 0; t < L; ++t) {
                const double xh = (r[t] - mean[ch]) * inv[ch];
                if (h) h[t] = xh;
                o[t] = gamma[ch] * xh + beta[ch];
            }
        }
    if (pass.tape) {
        auto& c = pass.tape->put<BatchNormCache>(this);
        c.xhat = std::move(xhat);
        c.inv_std = std::move(inv);
        c.batch_mean = std::move(mean);
        c.batch_var = std::move(var);
        c.count = count;
        c.train = train;
    }
    return y;
}

Tensor BatchNorm1d::backward(const Tensor& dy, Pass& pass, GradientSet& grads) const {
    const auto& c = pass.tape->get<BatchNormCache>(this);
    const auto& gamma = pass.params[gamma_].values;
    auto& gg = grads[gamma_];
    auto& gb = grads[beta_];
    const std::size_t n = dy.n(), L = dy.l();
    const double M = static_cast<double>(c.count);
    Tensor dx(n, c_, L);
    for (std::size_t ch = 0; ch < c_; ++ch) {
        double sum_dy = 0.0, sum_dy_xh = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double* d = dy.row(i, ch);
            const double* h = c.xhat.row(i, ch);
            for (std::size_t t = 0; t < L; ++t) {
                sum_dy += d[t];
                sum_dy_xh += d[t] * h[t];
            }
        }
        gg[ch] += sum_dy_xh;
        gb[ch] += sum_dy;
        const double scale = gamma[ch] * c.inv_std[ch];
        for (std::size_t i = 0; i < n; ++i) {
            const double* d = dy.row(i, ch);
            const double* h = c.xhat.row(i, ch);
            double* o = dx.row(i, ch);
            if (c.train) {
                for (std::size_t t = 0; t < L; ++t)
                    o[t] = scale * (d[t] - sum_dy / M - h[t] * (sum_dy_xh / M));
            } else {
                for (std::size_t t = 0; t < L; ++t) o[t] = scale * d[t];
            }
        }
    }
    return dx;
}

void BatchNorm1d::commit(const Tape& tape, std::span<NamedArray> buffers, double momentum) const {
    const auto& c = tape.get<BatchNormCache>(this);
    if (!c.train) return;
    auto& rm = buffers[mean_].values;
    auto& rv = buffers[var_].values;
    const double unbias = static_cast<double>(c.count) / static_cast<double>(c.count - 1);
    for (std::size_t ch = 0; ch < c_; ++ch) {
        rm[ch] = (1.0 - momentum) * rm[ch] + momentum * c.batch_mean[ch];
        rv[ch] = (1.0 - momentum) * rv[ch] + momentum * c.batch_var[ch] * unbias;
    }
}

// --- activations ---------------------------------------------------------------

Tensor ReLU::forward(const Tensor& x, Pass& pass) const {
    Tensor y = x;
    for (auto& v : y.values()) v = v < 0.0 ? 0.0 : v;  // NaN passes through
    if (pass.tape) pass.tape->put<OutputCache>(this).output = y;
    return y;
}

Tensor ReLU::backward(const Tensor& dy, Pass& pass, GradientSet&) const {
    const auto& y = pass.tape->get<OutputCache>(this).output;
    Tensor dx = dy;
    auto d = dx.values();
    auto out = y.values();
    for (std::size_t i = 0; i < d.size(); ++i)
        if (!(out[i] > 0.0)) d[i] = 0.0;
    return dx;
}

Tensor GELU::forward(const Tensor& x, Pass& pass) const {
    Tensor y = x;
    for (auto& v : y.values()) v = 0.5 * v * (1.0 + std::erf(v * M_SQRT1_2));
    if (pass.tape) pass.tape->put<InputCache>(this).input = x;
    return y;
}

Tensor GELU::backward(const Tensor& dy, Pass& pass, GradientSet&) const {
    const auto& x = pass.tape->get<InputCache>(this).input;
    Tensor dx = dy;
    auto d = dx.values();
    auto in = x.values();
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double v = in[i];
        const double cdf = 0.5 * (1.0 + std::erf(v * M_SQRT1_2));
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
        d[i] *= cdf + v * pdf;
    }
    return dx;
}

// --- pooling -------------------------------------------------------------------

namespace {

struct MaxPoolCache : LayerCache {
    std::vector<std::size_t> argmax;
    std::size_t n = 0, c = 0, L = 0, lout = 0;
};

struct LengthCache : LayerCache {
    std::size_t L = 0;
};

} // namespace

Tensor MaxPool1d::forward(const Tensor& x, Pass& pass) const {
    const std::size_t L = x.l();
    if (L + 2 * pad_ < k_) throw std::invalid_argument("maxpool: input shorter than window");
    const std::size_t lout = (L + 2 * pad_ - k_) / stride_ + 1;
    Tensor y(x.n(), x.c(), lout);
    std::vector<std::size_t> arg(pass.tape ? y.size() : 0);
    for (std::size_t i = 0; i < x.n(); ++i)
        for (std::size_t ch = 0; ch < x.c(); ++ch) {
            const double* r = x.row(i, ch);
            double* o = y.row(i, ch);
            for (std::size_t t = 0; t < lout; ++t) {
                const long start = static_cast<long>(t * stride_) - static_cast<long>(pad_);
                const long lo = std::max<long>(start, 0);
                const long hi = std::min<long>(start + static_cast<long>(k_), static_cast<long>(L));
                long best = lo;
                for (long p = lo + 1; p < hi; ++p)
                    if (r[p] > r[best]) best = p;
                o[t] = r[best];
                if (pass.tape) arg[(i * x.c() + ch) * lout + t] = static_cast<std::size_t>(best);
            }
        }
    if (pass.tape) {
        auto& c = pass.tape->put<MaxPoolCache>(this);
        c.argmax = std::move(arg);
        c.n = x.n();
        c.c = x.c();
        c.L = L;
        c.lout = lout;
    }
    return y;
}

Tensor MaxPool1d::backward(const Tensor& dy, Pass& pass, GradientSet&) const {
    const auto& c = pass.tape->get<MaxPoolCache>(this);
    Tensor dx(c.n, c.c, c.L);
    for (std::size_t i = 0; i < c.n; ++i)
        for (std::size_t ch = 0; ch < c.c; ++ch) {
            const double* d = dy.row(i, ch);
            double* o = dx.row(i, ch);
            const std::size_t* a = c.argmax.data() + (i * c.c + ch) * c.lout;
            for (std::size_t t = 0; t < c.lout; ++t) o[a[t]] += d[t];
        }
    return dx;
}

Tensor AvgPool1dCeil::forward(const Tensor& x, Pass& pass) const {
    const std::size_t L = x.l();
    const std::size_t lout = (L + k_ - 1) / k_;
    Tensor y(x.n(), x.c(), lout);
    for (std::size_t i = 0; i < x.n(); ++i)
        for (std::size_t ch = 0; ch < x.c(); ++ch) {
            const double* r = x.row(i, ch);
            double* o = y.row(i, ch);
            for (std::size_t t = 0; t < lout; ++t) {
                const std::size_t lo = t * k_, hi = std::min(lo + k_, L);
                double s = 0.0;
                for (std::size_t p = lo; p < hi; ++p) s += r[p];
                o[t] = s / static_cast<double>(hi - lo);
            }
        }
    if (pass.tape) pass.tape->put<LengthCache>(this).L = L;
    return y;
}

Tensor AvgPool1dCeil::backward(const Tensor& dy, Pass& pass, GradientSet&) const {
    const std::size_t L = pass.tape->get<LengthCache>(this).L;
    Tensor dx(dy.n(), dy.c(), L);
    for (std::size_t i = 0; i < dy.n(); ++i)
        for (std::size_t ch = 0; ch < dy.c(); ++ch) {
            const double* d = dy.row(i, ch);
            double* o = dx.row(i, ch);
            for (std::size_t t = 0; t < dy.l(); ++t) {
                const std::size_t lo = t * k_, hi = std::min(lo + k_, L);
                const double g = d[t] / static_cast<double>(hi - lo);
                for (std::size_t p = lo; p < hi; ++p) o[p] += g;
            }
        }
    return dx;
}

Tensor GlobalAvgPool::forward(const Tensor& x, Pass& pass) const {
    Tensor y(x.n(), x.c(), 1);
    const double inv = 1.0 / static_cast<double>(x.l());
    for (std::size_t i = 0; i < x.n(); ++i)
        for (std::size_t ch = 0; ch < x.c(); ++ch) {
            const double* r = x.row(i, ch);
            double s = 0.0;
            for (std::size_t t = 0; t < x.l(); ++t) s += r[t];
            y(i, ch, 0) = s * inv;
        }
    if (pass.tape) pass.tape->put<LengthCache>(this).L = x.l();
    return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy, Pass& pass, GradientSet&) const {
    const std::size_t L = pass.tape->get<LengthCache>(this).L;
    Tensor dx(dy.n(), dy.c(), L);
    const double inv = 1.0 / static_cast<double>(L);
    for (std::size_t i = 0; i < dy.n(); ++i)
        for (std::size_t ch = 0; ch < dy.c(); ++ch) {
            const double g = dy(i, ch, 0) * inv;
            double* o = dx.row(i, ch);
            for (std::size_t t = 0; t < L; ++t) o[t] = g;
        }
    return dx;
}

// --- Linear --------------------------------------------------------------------

Linear::Linear(ParamRegistry& reg, const std::string& name, std::size_t in, std::size_t out, double gain)
    : in_(in), out_(out) {
    w_ = reg.normal(name + ".weight", {out, in}, gain / std::sqrt(static_cast<double>(in)));
    b_ = reg.constant(name + ".bias", {out}, 0.0);
}

Tensor Linear::forward(const Tensor& x, Pass& pass) const {
    if (x.c() != in_ || x.l() != 1) throw std::invalid_argument("linear: expected [n," + std::to_string(in_) + ",1]");
    const auto& W = pass.params[w_].values;
    const auto& b = pass.params[b_].values;
    Tensor y(x.n(), out_, 1);
    for (std::size_t i = 0; i < x.n(); ++i)
        for (std::size_t o = 0; o < out_; ++o) {
            double s = b[o];
            const double* w = W.data() + o * in_;
            const double* xi = x.sample(i);
            for (std::size_t k = 0; k < in_; ++k) s += w[k] * xi[k];
            y(i, o, 0) = s;
        }
    if (pass.tape) pass.tape->put<InputCache>(this).input = x;
    return y;
}

Tensor Linear::backward(const Tensor& dy, Pass& pass, GradientSet& grads) const {
    const auto& x = pass.tape->get<InputCache>(this).input;
    const auto& W = pass.params[w_].values;
    auto& gw = grads[w_];
    auto& gb = grads[b_];
    Tensor dx(x.n(), in_, 1);
    for (std::size_t i = 0; i < x.n(); ++i)
        for (std::size_t o = 0; o < out_; ++o) {
            const double d = dy(i, o, 0);
            gb[o] += d;
            const double* xi = x.sample(i);
            const double* w = W.data() + o * in_;
            double* gwo = gw.data() + o * in_;
            double* dxi = dx.sample(i);
            for (std::size_t k = 0; k < in_; ++k) {
                gwo[k] += d * xi[k];
                dxi[k] += d * w[k];
            }
        }
    return dx;
}

// --- containers ----------------------------------------------------------------

Tensor Sequential::forward(const Tensor& x, Pass& pass) const {
    Tensor h = x;
    for (const auto& layer : layers_) h = layer->forward(h, pass);
    return h;
}

Tensor Sequential::backward(const Tensor& dy, Pass& pass, GradientSet& grads) const {
    Tensor g = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g, pass, grads);
    return g;
}

Tensor Residual::forward(const Tensor& x, Pass& pass) const {
    Tensor z = body_->forward(x, pass);
    if (shortcut_->empty()) z += x;
    else z += shortcut_->forward(x, pass);
    for (auto& v : z.values()) v = v < 0.0 ? 0.0 : v;  // NaN passes through
    if (pass.tape) pass.tape->put<OutputCache>(this).output = z;
    return z;
}

Tensor Residual::backward(const Tensor& dy, Pass& pass, GradientSet& grads) const {
    const auto& out = pass.tape->get<OutputCache>(this).output;
    Tensor dz = dy;
    auto d = dz.values();
    auto o = out.values();
    for (std::size_t i = 0; i < d.size(); ++i)
        if (!(o[i] > 0.0)) d[i] = 0.0;
    Tensor dx = body_->backward(dz, pass, grads);
    if (shortcut_->empty()) dx += dz;
    else dx += shortcut_->backward(dz, pass, grads);
    return dx;
}

// --- InceptionBlock ------------------------------------------------------------

InceptionBlock::InceptionBlock(ParamRegistry& reg, const std::string& name, std::size_t in, std::size_t filters,
                               std::size_t bottleneck, const std::vector<std::size_t>& kernels,
                               std::vector<const BatchNorm1d*>& norms)
    : filters_(filters) {
    bottleneck_ = std::make_unique<Conv1d>(reg, name + ".bottleneck", in, bottleneck, 1);
    for (std::size_t i = 0; i < kernels.size(); ++i)
        convs_.push_back(std::make_unique<Conv1d>(reg, name + ".conv" + std::to_string(i), bottleneck, filters,
                                                  kernels[i], 1, kernels[i] / 2));
    pool_conv_ = std::make_unique<Conv1d>(reg, name + ".pool_conv", in, filters, 1);
    bn_ = std::make_unique<BatchNorm1d>(reg, name + ".bn", out_channels());
    norms.push_back(bn_.get());
}

Tensor InceptionBlock::forward(const Tensor& x, Pass& pass) const {
    const Tensor b = bottleneck_->forward(x, pass);
    std::vector<Tensor> parts;
    parts.reserve(convs_.size() + 1);
    for (const auto& c : convs_) parts.push_back(c->forward(b, pass));
    parts.push_back(pool_conv_->forward(pool_.forward(x, pass), pass));
    return relu_.forward(bn_->forward(concat_channels(parts), pass), pass);
}

Tensor InceptionBlock::backward(const Tensor& dy, Pass& pass, GradientSet& grads) const {
    const Tensor dcat = bn_->backward(relu_.backward(dy, pass, grads), pass, grads);
    Tensor db;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        Tensor g = convs_[i]->backward(slice_channels(dcat, i * filters_, filters_), pass, grads);
        if (db.empty()) db = std::move(g);
        else db += g;
    }
    Tensor dx = bottleneck_->backward(db, pass, grads);
    const Tensor dp = pool_conv_->backward(slice_channels(dcat, convs_.size() * filters_, filters_), pass, grads);
    dx += pool_.backward(dp, pass, grads);
    return dx;
}

} // namespace ppgbench::nn
