#pragma once

#include <vector>

#include "sadepth/ops.hpp"

namespace sadepth::ddv {

enum class BinSpacing {
    kLinearDisparity, // default: uniform pixel-displacement resolution
    kLinearLogDepth,
};

/// Strictly increasing positive disparity values, one per bin.
struct DisparityBins {
    std::vector<double> values;

    int64_t count() const { return static_cast<int64_t>(values.size()); }
    double front() const { return values.front(); }
    double back() const { return values.back(); }
    void validate() const;
};

/// K values between 1/max_depth and 1/min_depth inclusive.
DisparityBins make_bins(int64_t k, double min_depth, double max_depth,
                        BinSpacing spacing = BinSpacing::kLinearDisparity);

/// K-bin logits over the disparity range at one scale.
struct DisparityVolume {
    Var logits; // (N, K, H, W)
    DisparityBins bins;
};

/// Probability-weighted average of bin values: (N,1,H,W), always inside
/// [bins.front(), bins.back()].
Var softargmax(const DisparityVolume& volume);

/// Per-pixel variance of the bin distribution, (N,1,H,W), in squared
/// disparity units. Clamped at zero to absorb rounding.
Var uncertainty(const DisparityVolume& volume);

Var disparity_to_depth(const Var& disparity);

} // namespace sadepth::ddv
