#pragma once

#include <utility>
#include <vector>

#include "sadepth/ops.hpp"
#include "sadepth/rng.hpp"

namespace sadepth::attention {

/// 1x1 projections forming query, key and value, each (N_ch, M). No bias.
struct AttentionProjections {
    Var w_query, w_key, w_value;

    static AttentionProjections create(int64_t in_channels, int64_t out_channels, Rng& rng);
    int64_t in_channels() const { return w_query.shape()[1]; }
    int64_t out_channels() const { return w_query.shape()[0]; }
};

struct QkvMaps {
    Var query, key, value; // (N, N_ch, H, W)
};

/// Per-position linear maps W_f X, W_g X, W_h X over an (N, M, H, W) feature map.
QkvMaps project_qkv(const Var& x, const AttentionProjections& w);

/// Row-stochastic weights (N, P, P), P = H*W. Row w holds the softmax over all
/// positions of <query(w), key(.)>. Scores are not scaled by 1/sqrt(N_ch)
/// unless scale_scores is set.
Var attention_weights(const Var& query, const Var& key, bool scale_scores = false);

/// A(w) = sum_v value(v) * S_w(v); output (N, N_ch, H, W).
Var attention_output(const Var& value, const Var& weights);

/// Full context module: attention_output over project_qkv.
Var self_attention(const Var& x, const AttentionProjections& w, bool scale_scores = false);

/// One (h, w) heat map per query pixel; each is the pixel's weight row
/// reshaped to the lattice. positions are (u, v) on the low-res lattice.
std::vector<Tensor> export_attention_maps(const Tensor& weights, const std::vector<std::pair<int64_t, int64_t>>& positions,
                                          int64_t h, int64_t w);

} // namespace sadepth::attention
