#pragma once

#include <array>
#include <vector>

// Independent brute-force recomputation of every hand-derived expected value.
// Everything here is evaluated from first principles with plain loops and
// <cmath>; nothing calls into the library under test.
namespace oracle {

struct AttentionScalarCase {
    std::array<double, 2> row1; // softmax weights for query position 1
    std::array<double, 2> row2; // softmax weights for query position 2
    std::array<double, 2> output;
};

/// M = N = 1, X = [0, 1], W_f = W_g = W_h = 1.
AttentionScalarCase attention_scalar_case();

/// Probability-weighted bin average for given logits and bins.
double softargmax_brute(const std::vector<double>& logits, const std::vector<double>& bins);

/// Variance of the softmax distribution over the bins.
double variance_brute(const std::vector<double>& logits, const std::vector<double>& bins);

/// Variance directly from probabilities.
double variance_from_probs(const std::vector<double>& probs, const std::vector<double>& bins);

/// SSIM of two constant patches under C1 = 0.01^2, C2 = 0.03^2.
double ssim_constant(double x, double y);

/// alpha-mixed photometric error of two constant patches, alpha = 0.85.
double pe_constant(double x, double y);

/// Edge-aware smoothness of a 1x2 disparity map against a constant image.
double smoothness_1x2(double d0, double d1);

struct Metrics {
    double abs_rel, sq_rel, rmse, rmse_log, log10, a1, a2, a3;
};

/// Single-pixel metric vector, no scaling.
Metrics metrics_single(double pred, double gt);

/// Interpolated median (mean of middles for even counts).
double median(std::vector<double> values);

} // namespace oracle
