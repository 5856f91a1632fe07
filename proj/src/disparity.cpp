#include "sadepth/disparity.hpp"

#include <cmath>
#include <stdexcept>

namespace sadepth::ddv {

void DisparityBins::validate() const {
    if (count() < 2) throw std::invalid_argument("DisparityBins: need at least two bins");
    if (!(values.front() > 0)) throw std::invalid_argument("DisparityBins: bins must be positive");
    for (size_t i = 1; i < values.size(); ++i) {
        if (!(values[i] > values[i - 1])) throw std::invalid_argument("DisparityBins: bins must strictly increase");
    }
}

DisparityBins make_bins(int64_t k, double min_depth, double max_depth, BinSpacing spacing) {
    if (!(min_depth > 0) || !(max_depth > min_depth)) {
        throw std::invalid_argument("make_bins: require 0 < min_depth < max_depth");
    }
    if (k < 2) throw std::invalid_argument("make_bins: k must be >= 2");
    DisparityBins bins;
    bins.values.resize(static_cast<size_t>(k));
    if (spacing == BinSpacing::kLinearDisparity) {
        const double lo = 1.0 / max_depth, hi = 1.0 / min_depth;
        for (int64_t i = 0; i < k; ++i) {
            bins.values[static_cast<size_t>(i)] =
                lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(k - 1);
        }
    } else {
        const double llo = std::log(min_depth), lhi = std::log(max_depth);
        for (int64_t i = 0; i < k; ++i) {
            // depth log-spaced descending so disparity ascends
            const double d = std::exp(lhi - (lhi - llo) * static_cast<double>(i) / static_cast<double>(k - 1));
            bins.values[static_cast<size_t>(i)] = 1.0 / d;
        }
    }
    bins.validate();
    return bins;
}

namespace {

Var bins_var(const DisparityBins& bins, bool squared) {
    Tensor t({1, bins.count(), 1, 1});
    for (int64_t i = 0; i < bins.count(); ++i) {
        const double v = bins.values[static_cast<size_t>(i)];
        t[i] = squared ? v * v : v;
    }
    return Var::constant(std::move(t));
}

void check_volume(const DisparityVolume& volume) {
    volume.bins.validate();
    if (volume.logits.shape().size() != 4 || volume.logits.shape()[1] != volume.bins.count()) {
        throw std::invalid_argument("DisparityVolume: logits must be (N,K,H,W) with K matching the bins");
    }
}

} // namespace

Var softargmax(const DisparityVolume& volume) {
    check_volume(volume);
    Var probs = ops::softmax(volume.logits, 1);
    return ops::sum_axis(ops::mul(probs, bins_var(volume.bins, false)), 1, true);
}

Var uncertainty(const DisparityVolume& volume) {
    check_volume(volume);
    Var probs = ops::softmax(volume.logits, 1);
    Var mean = ops::sum_axis(ops::mul(probs, bins_var(volume.bins, false)), 1, true);
    Var second = ops::sum_axis(ops::mul(probs, bins_var(volume.bins, true)), 1, true);
    return ops::relu(ops::sub(second, ops::square(mean)));
}

Var disparity_to_depth(const Var& disparity) { return ops::reciprocal(disparity); }

} // namespace sadepth::ddv
