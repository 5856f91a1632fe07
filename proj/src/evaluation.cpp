#include "sadepth/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "sadepth/disparity.hpp"

namespace sadepth::eval {

namespace {

double median_of(std::vector<double> v) {
    const size_t n = v.size();
    std::sort(v.begin(), v.end());
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

DepthMetrics compute_metrics(const Tensor& pred_depth, const Tensor& gt_depth, const Tensor* valid_mask,
                             const EvalProtocol& protocol) {
    if (pred_depth.numel() != gt_depth.numel()) throw std::invalid_argument("compute_metrics: shape mismatch");
    if (valid_mask && valid_mask->numel() != gt_depth.numel()) {
        throw std::invalid_argument("compute_metrics: mask shape mismatch");
    }
    const int64_t h = gt_depth.dim(gt_depth.ndim() - 2);
    const int64_t w = gt_depth.dim(gt_depth.ndim() - 1);
    std::vector<double> p, g;
    p.reserve(static_cast<size_t>(gt_depth.numel()));
    g.reserve(static_cast<size_t>(gt_depth.numel()));
    for (int64_t i = 0; i < gt_depth.numel(); ++i) {
        if (protocol.crop_border > 0) {
            const int64_t y = (i / w) % h, x = i % w;
            if (y < protocol.crop_border || y >= h - protocol.crop_border || x < protocol.crop_border ||
                x >= w - protocol.crop_border) {
                continue;
            }
        }
        if (valid_mask && (*valid_mask)[i] == 0.0) continue;
        const double gv = gt_depth[i];
        if (!(gv >= protocol.min_depth_clamp && gv <= protocol.max_depth_cap)) continue;
        p.push_back(pred_depth[i]);
        g.push_back(gv);
    }
    if (p.empty()) throw std::runtime_error("compute_metrics: no valid ground-truth pixels in range");

    if (protocol.median_scaling) {
        const double scale = median_of(g) / median_of(p);
        for (double& v : p) v *= scale;
    }
    for (double& v : p) v = std::min(std::max(v, protocol.min_depth_clamp), protocol.max_depth_cap);

    DepthMetrics m;
    const double n = static_cast<double>(p.size());
    for (size_t i = 0; i < p.size(); ++i) {
        const double pe = p[i], ge = g[i];
        const double d = pe - ge;
        m.abs_rel += std::fabs(d) / ge;
        m.sq_rel += d * d / ge;
        m.rmse += d * d;
        const double dl = std::log(pe) - std::log(ge);
        m.rmse_log += dl * dl;
        m.log10 += std::fabs(std::log10(pe) - std::log10(ge));
        const double ratio = std::max(pe / ge, ge / pe);
        if (ratio < 1.25) m.a1 += 1;
        if (ratio < 1.25 * 1.25) m.a2 += 1;
        if (ratio < 1.25 * 1.25 * 1.25) m.a3 += 1;
    }
    m.abs_rel /= n;
    m.sq_rel /= n;
    m.rmse = std::sqrt(m.rmse / n);
    m.rmse_log = std::sqrt(m.rmse_log / n);
    m.log10 /= n;
    m.a1 /= n;
    m.a2 /= n;
    m.a3 /= n;
    return m;
}

Tensor predict_depth(net::DepthNet& depth_net, const Tensor& image) {
    NoGradGuard guard;
    const auto& s = image.shape();
    Var batch = Var::constant(image.reshaped({1, s[0], s[1], s[2]}));
    net::MultiScaleDisparity out = depth_net.forward(batch, /*training=*/false);
    const Var& disp = out.disparity_full.back(); // 1/1 scale
    Tensor depth = ddv::disparity_to_depth(disp).value();
    return depth.reshaped({1, s[1], s[2]});
}

EvalResult evaluate_frames(net::DepthNet& depth_net, const std::vector<EvalItem>& items, const EvalProtocol& protocol,
                           int workers) {
    EvalResult result;
    result.per_image.resize(items.size());
    result.names.resize(items.size());

    auto run_one = [&](size_t i) {
        const Tensor depth = predict_depth(depth_net, items[i].image);
        result.per_image[i] = compute_metrics(depth, items[i].gt_depth, nullptr, protocol);
        result.names[i] = items[i].name;
    };

    if (workers <= 1 || items.size() <= 1) {
        for (size_t i = 0; i < items.size(); ++i) run_one(i);
    } else {
        std::vector<std::thread> pool;
        std::atomic<size_t> next{0};
        const int n_threads = std::min<int>(workers, static_cast<int>(items.size()));
        for (int t = 0; t < n_threads; ++t) {
            pool.emplace_back([&] {
                for (size_t i = next.fetch_add(1); i < items.size(); i = next.fetch_add(1)) run_one(i);
            });
        }
        for (auto& th : pool) th.join();
    }

    DepthMetrics& agg = result.aggregate;
    for (const DepthMetrics& m : result.per_image) {
        agg.abs_rel += m.abs_rel;
        agg.sq_rel += m.sq_rel;
        agg.rmse += m.rmse;
        agg.rmse_log += m.rmse_log;
        agg.log10 += m.log10;
        agg.a1 += m.a1;
        agg.a2 += m.a2;
        agg.a3 += m.a3;
    }
    const double n = static_cast<double>(std::max<size_t>(result.per_image.size(), 1));
    agg.abs_rel /= n;
    agg.sq_rel /= n;
    agg.rmse /= n;
    agg.rmse_log /= n;
    agg.log10 /= n;
    agg.a1 /= n;
    agg.a2 /= n;
    agg.a3 /= n;
    return result;
}

std::string format_table(const EvalResult& result) {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof(line), "%-20s %9s %9s %9s %9s %9s %9s %9s\n", "image", "abs_rel", "sq_rel", "rmse",
                  "rmse_log", "d<1.25", "d<1.25^2", "d<1.25^3");
    os << line;
    auto row = [&](const std::string& name, const DepthMetrics& m) {
        std::snprintf(line, sizeof(line), "%-20s %9.4f %9.4f %9.4f %9.4f %9.4f %9.4f %9.4f\n", name.c_str(), m.abs_rel,
                      m.sq_rel, m.rmse, m.rmse_log, m.a1, m.a2, m.a3);
        os << line;
    };
    for (size_t i = 0; i < result.per_image.size(); ++i) row(result.names[i], result.per_image[i]);
    row("mean", result.aggregate);
    return os.str();
}

int workers_from_env() {
    const char* env = std::getenv("SADEPTH_NUM_WORKERS");
    if (!env) return 1;
    const int v = std::atoi(env);
    return v < 1 ? 1 : v;
}

} // namespace sadepth::eval
