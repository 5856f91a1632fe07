#include "sadepth/nn.hpp"

#include <cmath>

namespace sadepth::nn {

Tensor conv_init(int64_t out_ch, int64_t in_ch, int64_t kernel, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_ch * kernel * kernel));
    Tensor w({out_ch, in_ch, kernel, kernel});
    for (int64_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-bound, bound);
    return w;
}

Conv2d Conv2d::create(int64_t in_ch, int64_t out_ch, int64_t kernel, int64_t stride, int64_t pad, int64_t dilation,
                      bool with_bias, Rng& rng) {
    Conv2d c;
    c.weight = Var::param(conv_init(out_ch, in_ch, kernel, rng));
    if (with_bias) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in_ch * kernel * kernel));
        Tensor b({out_ch});
        for (int64_t i = 0; i < out_ch; ++i) b[i] = rng.uniform(-bound, bound);
        c.bias = Var::param(std::move(b));
    }
    c.stride = stride;
    c.pad = pad;
    c.dilation = dilation;
    return c;
}

Var Conv2d::forward(const Var& x) const { return ops::conv2d(x, weight, bias, stride, pad, dilation); }

void Conv2d::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".weight", weight});
    if (bias.defined()) out.push_back({prefix + ".bias", bias});
}

int64_t Conv2d::param_count() const { return weight.numel() + (bias.defined() ? bias.numel() : 0); }

BatchNorm2d BatchNorm2d::create(int64_t channels) {
    BatchNorm2d bn;
    bn.gamma = Var::param(Tensor({channels}, 1.0));
    bn.beta = Var::param(Tensor({channels}, 0.0));
    bn.running_mean = Tensor({channels}, 0.0);
    bn.running_var = Tensor({channels}, 1.0);
    return bn;
}

Var BatchNorm2d::forward(const Var& x, bool training) {
    if (training) return ops::batchnorm_train(x, gamma, beta, running_mean, running_var, momentum, eps);
    return ops::batchnorm_eval(x, gamma, beta, running_mean, running_var, eps);
}

void BatchNorm2d::collect(const std::string& prefix, std::vector<NamedParam>& out) {
    out.push_back({prefix + ".gamma", gamma});
    out.push_back({prefix + ".beta", beta});
}

void BatchNorm2d::collect_buffers(const std::string& prefix, std::vector<NamedBuffer>& out) {
    out.push_back({prefix + ".running_mean", &running_mean});
    out.push_back({prefix + ".running_var", &running_var});
}

Linear Linear::create(int64_t in_features, int64_t out_features, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_features));
    Tensor w({out_features, in_features});
    for (int64_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-bound, bound);
    Tensor b({out_features});
    for (int64_t i = 0; i < out_features; ++i) b[i] = rng.uniform(-bound, bound);
    Linear l;
    l.weight = Var::param(std::move(w));
    l.bias = Var::param(std::move(b));
    return l;
}

Linear Linear::create_zero(int64_t in_features, int64_t out_features) {
    Linear l;
    l.weight = Var::param(Tensor({out_features, in_features}, 0.0));
    l.bias = Var::param(Tensor({out_features}, 0.0));
    return l;
}

Var Linear::forward(const Var& x) const {
    return ops::add(ops::matmul(x, ops::transpose_last2(weight)), bias);
}

void Linear::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
}

} // namespace sadepth::nn
