#pragma once

#include <optional>
#include <vector>

#include "sadepth/geometry.hpp"
#include "sadepth/ops.hpp"

namespace sadepth::losses {

inline constexpr double kSsimC1 = 1e-4; // 0.01^2 on the [0,1] range
inline constexpr double kSsimC2 = 9e-4; // 0.03^2
inline constexpr double kAlpha = 0.85;

/// Local SSIM with 3x3 mean pooling (reflect borders), clipped to [-1, 1].
/// Inputs (N,C,H,W) in [0,1].
Var ssim(const Var& x, const Var& y);

/// pe = alpha/2 * (1 - SSIM) + (1 - alpha) * |t - s|, channel-averaged.
/// Output (N,1,H,W).
Var photometric_error(const Var& target, const Var& synthesized);

/// Warp `source` into the target view through predicted depth and relative
/// pose: bilinear_sample(source, project(backproject(depth), T)).
Var synthesize_view(const Var& source, const Var& depth, const Var& rotation, const Var& translation,
                    const geometry::Intrinsics& k);
Var synthesize_view(const Var& source, const Var& depth, const geometry::RigidTransform& t,
                    const geometry::Intrinsics& k);

/// Binary stationary-pixel mask: 1 where the best warped error strictly beats
/// the best un-warped error. `identity_noise`, when given, is added to the
/// un-warped error before the comparison (tie-break aid; off by default).
Tensor automask(const Var& target, const std::vector<Var>& sources, const std::vector<Var>& synthesized,
                const Tensor* identity_noise = nullptr);

struct ReprojectionLoss {
    Var loss;                             // scalar
    std::vector<double> per_scale;        // photometric term per scale
    std::vector<double> mask_density;     // mean of the mask per scale
};

/// Per-pixel minimum over sources, masked, averaged over all pixels (masked
/// pixels contribute zero), then averaged over scales.
/// synthesized[s][j] warps source j at scale s (already at input resolution).
ReprojectionLoss min_reprojection_loss(const Var& target, const std::vector<Var>& sources,
                                       const std::vector<std::vector<Var>>& synthesized_per_scale,
                                       const std::vector<Tensor>& masks_per_scale);

/// Edge-aware first-order smoothness of mean-normalized disparity.
Var smoothness_loss(const Var& disparity, const Var& image);

struct LossBreakdown {
    Var total; // scalar, for backward
    double total_value = 0;
    double photometric = 0;
    double smoothness = 0;
    std::vector<double> per_scale_photometric;
    std::vector<double> mask_density;
    double lambda = 0;
};

LossBreakdown total_loss(const Var& photometric, const Var& smoothness, double lambda);

} // namespace sadepth::losses
