#include "sadepth/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace sadepth::losses {

namespace op = sadepth::ops;

Var ssim(const Var& x, const Var& y) {
    if (x.shape() != y.shape()) throw std::invalid_argument("ssim: shape mismatch");
    Var mu_x = op::box_filter3(x);
    Var mu_y = op::box_filter3(y);
    Var sigma_x = op::sub(op::box_filter3(op::mul(x, x)), op::square(mu_x));
    Var sigma_y = op::sub(op::box_filter3(op::mul(y, y)), op::square(mu_y));
    Var sigma_xy = op::sub(op::box_filter3(op::mul(x, y)), op::mul(mu_x, mu_y));
    Var num = op::mul(op::add_scalar(op::mul_scalar(op::mul(mu_x, mu_y), 2.0), kSsimC1),
                      op::add_scalar(op::mul_scalar(sigma_xy, 2.0), kSsimC2));
    Var den = op::mul(op::add_scalar(op::add(op::square(mu_x), op::square(mu_y)), kSsimC1),
                      op::add_scalar(op::add(sigma_x, sigma_y), kSsimC2));
    return op::clamp(op::div(num, den), -1.0, 1.0);
}

Var photometric_error(const Var& target, const Var& synthesized) {
    if (target.shape() != synthesized.shape()) throw std::invalid_argument("photometric_error: shape mismatch");
    Var s = ssim(target, synthesized);
    Var ssim_term = op::mul_scalar(op::add_scalar(op::neg(s), 1.0), kAlpha / 2.0);
    Var l1_term = op::mul_scalar(op::abs(op::sub(target, synthesized)), 1.0 - kAlpha);
    return op::mean_axis(op::add(ssim_term, l1_term), 1, true);
}

Var synthesize_view(const Var& source, const Var& depth, const Var& rotation, const Var& translation,
                    const geometry::Intrinsics& k) {
    Var points = geometry::backproject(depth, k);
    geometry::SampleGrid grid = geometry::project(points, k, rotation, translation);
    return geometry::bilinear_sample(source, grid);
}

Var synthesize_view(const Var& source, const Var& depth, const geometry::RigidTransform& t,
                    const geometry::Intrinsics& k) {
    const int64_t n = depth.shape()[0];
    return synthesize_view(source, depth, geometry::rotation_constant(t, n), geometry::translation_constant(t, n), k);
}

Tensor automask(const Var& target, const std::vector<Var>& sources, const std::vector<Var>& synthesized,
                const Tensor* identity_noise) {
    if (sources.empty() || sources.size() != synthesized.size()) {
        throw std::invalid_argument("automask: need one synthesized image per source");
    }
    NoGradGuard guard; // mask is data, not part of the objective's graph
    Var target_c = Var::constant(target.value());
    Tensor warped_min, identity_min;
    for (size_t j = 0; j < sources.size(); ++j) {
        Tensor pe_warp = photometric_error(target_c, Var::constant(synthesized[j].value())).value();
        Tensor pe_id = photometric_error(target_c, Var::constant(sources[j].value())).value();
        if (j == 0) {
            warped_min = pe_warp;
            identity_min = pe_id;
        } else {
            for (int64_t i = 0; i < warped_min.numel(); ++i) {
                warped_min[i] = std::min(warped_min[i], pe_warp[i]);
                identity_min[i] = std::min(identity_min[i], pe_id[i]);
            }
        }
    }
    if (identity_noise) {
        if (!identity_noise->same_shape(identity_min)) {
            throw std::invalid_argument("automask: identity_noise shape mismatch");
        }
        for (int64_t i = 0; i < identity_min.numel(); ++i) identity_min[i] += (*identity_noise)[i];
    }
    Tensor mask(warped_min.shape());
    for (int64_t i = 0; i < mask.numel(); ++i) mask[i] = warped_min[i] < identity_min[i] ? 1.0 : 0.0;
    return mask;
}

ReprojectionLoss min_reprojection_loss(const Var& target, const std::vector<Var>& sources,
                                       const std::vector<std::vector<Var>>& synthesized_per_scale,
                                       const std::vector<Tensor>& masks_per_scale) {
    if (synthesized_per_scale.empty()) throw std::invalid_argument("min_reprojection_loss: empty scale set");
    if (masks_per_scale.size() != synthesized_per_scale.size()) {
        throw std::invalid_argument("min_reprojection_loss: one mask per scale required");
    }
    ReprojectionLoss out;
    Var acc;
    const double scale_w = 1.0 / static_cast<double>(synthesized_per_scale.size());
    for (size_t s = 0; s < synthesized_per_scale.size(); ++s) {
        const auto& synth = synthesized_per_scale[s];
        if (synth.size() != sources.size() || synth.empty()) {
            throw std::invalid_argument("min_reprojection_loss: one synthesized image per source required");
        }
        Var min_pe = photometric_error(target, synth[0]);
        for (size_t j = 1; j < synth.size(); ++j) {
            min_pe = op::minimum(min_pe, photometric_error(target, synth[j]));
        }
        Var masked = op::mul(min_pe, Var::constant(masks_per_scale[s]));
        Var term = op::mean_all(masked); // masked pixels contribute zero to a mean over all pixels
        out.per_scale.push_back(term.value().item());
        double density = 0;
        for (int64_t i = 0; i < masks_per_scale[s].numel(); ++i) density += masks_per_scale[s][i];
        out.mask_density.push_back(density / static_cast<double>(masks_per_scale[s].numel()));
        acc = acc.defined() ? op::add(acc, term) : term;
    }
    out.loss = op::mul_scalar(acc, scale_w);
    return out;
}

Var smoothness_loss(const Var& disparity, const Var& image) {
    const auto& ds = disparity.shape();
    const auto& is = image.shape();
    if (ds.size() != 4 || is.size() != 4 || ds[0] != is[0] || ds[2] != is[2] || ds[3] != is[3]) {
        throw std::invalid_argument("smoothness_loss: disparity and image must share the lattice");
    }
    const int64_t n = ds[0], h = ds[2], w = ds[3];
    // per-image mean normalization
    Var flat = op::reshape(disparity, {n, h * w});
    Var mean = op::mean_axis(flat, 1, true); // (n,1)
    for (int64_t i = 0; i < n; ++i) {
        if (!(mean.value()[i] > 0)) throw std::invalid_argument("smoothness_loss: mean disparity must be positive");
    }
    Var norm = op::reshape(op::div(flat, mean), {n, 1, h, w});

    Var zero = Var::constant(Tensor::scalar(0.0));
    Var acc = zero;
    if (w > 1) {
        Var dx = op::abs(op::sub(op::slice(norm, 3, 1, w - 1), op::slice(norm, 3, 0, w - 1)));
        Var gx = op::mean_axis(op::abs(op::sub(op::slice(image, 3, 1, w - 1), op::slice(image, 3, 0, w - 1))), 1, true);
        acc = op::add(acc, op::mean_all(op::mul(dx, op::exp(op::neg(gx)))));
    }
    if (h > 1) {
        Var dy = op::abs(op::sub(op::slice(norm, 2, 1, h - 1), op::slice(norm, 2, 0, h - 1)));
        Var gy = op::mean_axis(op::abs(op::sub(op::slice(image, 2, 1, h - 1), op::slice(image, 2, 0, h - 1))), 1, true);
        acc = op::add(acc, op::mean_all(op::mul(dy, op::exp(op::neg(gy)))));
    }
    return acc;
}

LossBreakdown total_loss(const Var& photometric, const Var& smoothness, double lambda) {
    if (lambda < 0) throw std::invalid_argument("total_loss: lambda must be non-negative");
    LossBreakdown out;
    out.total = op::add(photometric, op::mul_scalar(smoothness, lambda));
    out.total_value = out.total.value().item();
    out.photometric = photometric.value().item();
    out.smoothness = smoothness.value().item();
    out.lambda = lambda;
    return out;
}

} // namespace sadepth::losses
