#include "sadepth/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace sadepth::attention {

namespace {

Var project(const Var& x, const Var& w) {
    // 1x1 convolution with the (N_ch, M) matrix as kernel
    const int64_t out_ch = w.shape()[0], in_ch = w.shape()[1];
    return ops::conv2d(x, ops::reshape(w, {out_ch, in_ch, 1, 1}), Var(), 1, 0);
}

} // namespace

AttentionProjections AttentionProjections::create(int64_t in_channels, int64_t out_channels, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels));
    auto make = [&] {
        Tensor t({out_channels, in_channels});
        for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-bound, bound);
        return Var::param(std::move(t));
    };
    AttentionProjections p;
    p.w_query = make();
    p.w_key = make();
    p.w_value = make();
    return p;
}

QkvMaps project_qkv(const Var& x, const AttentionProjections& w) {
    if (x.shape().size() != 4) throw std::invalid_argument("project_qkv: feature map must be (N,M,H,W)");
    if (x.shape()[1] != w.in_channels()) {
        throw std::invalid_argument("project_qkv: feature channels " + std::to_string(x.shape()[1]) +
                                    " do not match projection input " + std::to_string(w.in_channels()));
    }
    return QkvMaps{project(x, w.w_query), project(x, w.w_key), project(x, w.w_value)};
}

Var attention_weights(const Var& query, const Var& key, bool scale_scores) {
    if (query.shape() != key.shape()) throw std::invalid_argument("attention_weights: query/key shape mismatch");
    const auto& s = query.shape();
    const int64_t n = s[0], c = s[1], p = s[2] * s[3];
    Var q = ops::reshape(query, {n, c, p});
    Var k = ops::reshape(key, {n, c, p});
    Var scores = ops::batched_matmul(ops::transpose_last2(q), k); // (N, P, P)
    if (scale_scores) scores = ops::mul_scalar(scores, 1.0 / std::sqrt(static_cast<double>(c)));
    return ops::softmax(scores, 2);
}

Var attention_output(const Var& value, const Var& weights) {
    const auto& vs = value.shape();
    const int64_t n = vs[0], c = vs[1], h = vs[2], w = vs[3];
    const int64_t p = h * w;
    if (weights.shape() != std::vector<int64_t>{n, p, p}) {
        throw std::invalid_argument("attention_output: weights must be (N,P,P) with P matching the value map");
    }
    Var v = ops::reshape(value, {n, c, p});
    // A[:, :, w] = sum_v value[:, :, v] * S[w, v]  ==  V * S^T
    Var a = ops::batched_matmul(v, ops::transpose_last2(weights));
    return ops::reshape(a, {n, c, h, w});
}

Var self_attention(const Var& x, const AttentionProjections& w, bool scale_scores) {
    QkvMaps qkv = project_qkv(x, w);
    Var s = attention_weights(qkv.query, qkv.key, scale_scores);
    return attention_output(qkv.value, s);
}

std::vector<Tensor> export_attention_maps(const Tensor& weights,
                                          const std::vector<std::pair<int64_t, int64_t>>& positions, int64_t h,
                                          int64_t w) {
    const int64_t p = h * w;
    if (weights.ndim() != 2 || weights.dim(0) != p || weights.dim(1) != p) {
        throw std::invalid_argument("export_attention_maps: weights must be (P,P) for the given lattice");
    }
    std::vector<Tensor> maps;
    maps.reserve(positions.size());
    for (const auto& [u, v] : positions) {
        if (u < 0 || u >= w || v < 0 || v >= h) {
            throw std::invalid_argument("export_attention_maps: query position off the lattice");
        }
        const int64_t row = v * w + u;
        Tensor map({h, w});
        for (int64_t i = 0; i < p; ++i) map[i] = weights[row * p + i];
        maps.push_back(std::move(map));
    }
    return maps;
}

} // namespace sadepth::attention
