#pragma once

#include <string>
#include <vector>

#include "sadepth/networks.hpp"
#include "sadepth/tensor.hpp"

namespace sadepth::eval {

struct DepthMetrics {
    double abs_rel = 0, sq_rel = 0, rmse = 0, rmse_log = 0, log10 = 0;
    double a1 = 0, a2 = 0, a3 = 0; // delta < 1.25^{1,2,3}, strict
};

struct EvalProtocol {
    double min_depth_clamp = 1e-3;
    double max_depth_cap = 80.0;
    bool median_scaling = true;
    int64_t crop_border = 0; // pixels excluded at every image edge
};

/// Metrics over valid, in-range GT pixels. `valid_mask` (same lattice, 0/1)
/// may be null; GT pixels outside [min_depth_clamp, max_depth_cap] are
/// excluded. Predictions are median-scaled (optional) then clamped into the
/// protocol range. Throws when no valid pixel remains.
DepthMetrics compute_metrics(const Tensor& pred_depth, const Tensor& gt_depth, const Tensor* valid_mask,
                             const EvalProtocol& protocol);

struct EvalItem {
    Tensor image;    // (3,H,W)
    Tensor gt_depth; // (1,H,W) or (H,W)
    std::string name;
};

struct EvalResult {
    DepthMetrics aggregate; // unweighted mean over images
    std::vector<DepthMetrics> per_image;
    std::vector<std::string> names;
};

/// Runs the depth network (eval mode, full-scale disparity head) per image.
/// `workers` <= 1 runs sequentially; results are ordered by index either way.
EvalResult evaluate_frames(net::DepthNet& depth_net, const std::vector<EvalItem>& items, const EvalProtocol& protocol,
                           int workers = 1);

/// Full-scale predicted depth (1,H,W) for one image.
Tensor predict_depth(net::DepthNet& depth_net, const Tensor& image);

/// Fixed-width text table in the Table-1 column order.
std::string format_table(const EvalResult& result);

int workers_from_env();

} // namespace sadepth::eval
