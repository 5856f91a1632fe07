#pragma once

#include <string>
#include <vector>

#include "sadepth/ops.hpp"
#include "sadepth/rng.hpp"

namespace sadepth::nn {

struct NamedParam {
    std::string name;
    Var var;
};

/// Non-trainable state (batch-norm running stats) exposed for checkpoints.
struct NamedBuffer {
    std::string name;
    Tensor* tensor;
};

struct Conv2d {
    Var weight; // (out, in, k, k)
    Var bias;   // undefined when bias-less
    int64_t stride = 1, pad = 0, dilation = 1;

    static Conv2d create(int64_t in_ch, int64_t out_ch, int64_t kernel, int64_t stride, int64_t pad, int64_t dilation,
                         bool with_bias, Rng& rng);
    Var forward(const Var& x) const;
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
    int64_t param_count() const;
};

struct BatchNorm2d {
    Var gamma, beta;
    Tensor running_mean, running_var;
    double momentum = 0.1;
    double eps = 1e-5;

    static BatchNorm2d create(int64_t channels);
    Var forward(const Var& x, bool training);
    void collect(const std::string& prefix, std::vector<NamedParam>& out);
    void collect_buffers(const std::string& prefix, std::vector<NamedBuffer>& out);
    int64_t param_count() const { return gamma.numel() + beta.numel(); }
};

struct Linear {
    Var weight; // (out, in)
    Var bias;   // (out)

    static Linear create(int64_t in_features, int64_t out_features, Rng& rng);
    static Linear create_zero(int64_t in_features, int64_t out_features);
    Var forward(const Var& x) const; // x (N, in)
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
    int64_t param_count() const { return weight.numel() + bias.numel(); }
};

/// Fan-in scaled uniform init used for every convolution.
Tensor conv_init(int64_t out_ch, int64_t in_ch, int64_t kernel, Rng& rng);

} // namespace sadepth::nn
