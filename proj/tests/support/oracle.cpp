#include "support/oracle.hpp"

#include <algorithm>
#include <cmath>

namespace oracle {

namespace {

std::vector<double> softmax_brute(const std::vector<double>& logits) {
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    std::vector<double> p(logits.size());
    double denom = 0;
    for (size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        denom += p[i];
    }
    for (double& v : p) v /= denom;
    return p;
}

} // namespace

AttentionScalarCase attention_scalar_case() {
    const double x[2] = {0.0, 1.0};
    // W_f = W_g = W_h = 1 so q = k = v = x
    AttentionScalarCase out;
    for (int q = 0; q < 2; ++q) {
        std::vector<double> scores = {x[q] * x[0], x[q] * x[1]};
        std::vector<double> row = softmax_brute(scores);
        double a = row[0] * x[0] + row[1] * x[1];
        if (q == 0) {
            out.row1 = {row[0], row[1]};
        } else {
            out.row2 = {row[0], row[1]};
        }
        out.output[static_cast<size_t>(q)] = a;
    }
    return out;
}

double softargmax_brute(const std::vector<double>& logits, const std::vector<double>& bins) {
    std::vector<double> p = softmax_brute(logits);
    double s = 0;
    for (size_t i = 0; i < p.size(); ++i) s += p[i] * bins[i];
    return s;
}

double variance_from_probs(const std::vector<double>& probs, const std::vector<double>& bins) {
    double mean = 0, second = 0;
    for (size_t i = 0; i < probs.size(); ++i) {
        mean += probs[i] * bins[i];
        second += probs[i] * bins[i] * bins[i];
    }
    return second - mean * mean;
}

double variance_brute(const std::vector<double>& logits, const std::vector<double>& bins) {
    return variance_from_probs(softmax_brute(logits), bins);
}

double ssim_constant(double x, double y) {
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    // constant patches: mu_x = x, mu_y = y, all (co)variances zero
    const double num = (2.0 * x * y + c1) * (0.0 + c2);
    const double den = (x * x + y * y + c1) * (0.0 + 0.0 + c2);
    return num / den;
}

double pe_constant(double x, double y) {
    const double alpha = 0.85;
    return alpha / 2.0 * (1.0 - ssim_constant(x, y)) + (1.0 - alpha) * std::fabs(x - y);
}

double smoothness_1x2(double d0, double d1) {
    const double mean = 0.5 * (d0 + d1);
    const double n0 = d0 / mean, n1 = d1 / mean;
    // one valid x-difference, no y-differences; constant image => exp(0) = 1
    return std::fabs(n1 - n0) * 1.0;
}

Metrics metrics_single(double pred, double gt) {
    Metrics m;
    const double d = pred - gt;
    m.abs_rel = std::fabs(d) / gt;
    m.sq_rel = d * d / gt;
    m.rmse = std::sqrt(d * d);
    const double dl = std::log(pred) - std::log(gt);
    m.rmse_log = std::sqrt(dl * dl);
    m.log10 = std::fabs(std::log10(pred) - std::log10(gt));
    const double ratio = std::max(pred / gt, gt / pred);
    m.a1 = ratio < 1.25 ? 1.0 : 0.0;
    m.a2 = ratio < 1.25 * 1.25 ? 1.0 : 0.0;
    m.a3 = ratio < 1.25 * 1.25 * 1.25 ? 1.0 : 0.0;
    return m;
}

double median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

} // namespace oracle
