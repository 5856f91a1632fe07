#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sadepth/losses.hpp"
#include "support/oracle.hpp"
#include "support/testutil.hpp"

using namespace sadepth;
using namespace sadepth::losses;
namespace op = sadepth::ops;
using testing::random_tensor;

namespace {
Var constant_image(double v, int64_t h = 6, int64_t w = 8) { return Var::constant(Tensor({1, 3, h, w}, v)); }
} // namespace

TEST_CASE("ssim: self-similarity, constant-patch closed form, symmetry") {
    Rng rng(3);
    Var x = Var::constant(random_tensor({1, 3, 6, 8}, rng, 0, 1));
    Tensor self = ssim(x, x).value();
    for (int64_t i = 0; i < self.numel(); ++i) CHECK(self[i] == doctest::Approx(1.0).epsilon(1e-6));

    const double expected = oracle::ssim_constant(0.2, 0.5);
    CHECK(expected == doctest::Approx(0.68976).epsilon(1e-4)); // frozen hand value
    Tensor c = ssim(constant_image(0.2), constant_image(0.5)).value();
    for (int64_t i = 0; i < c.numel(); ++i) CHECK(c[i] == doctest::Approx(expected).epsilon(1e-9));

    Var y = Var::constant(random_tensor({1, 3, 6, 8}, rng, 0, 1));
    Tensor xy = ssim(x, y).value();
    Tensor yx = ssim(y, x).value();
    for (int64_t i = 0; i < xy.numel(); ++i) CHECK(std::fabs(xy[i] - yx[i]) < 1e-9);

    CHECK_THROWS_AS(ssim(x, constant_image(0.5, 4, 4)), std::invalid_argument);
}

TEST_CASE("photometric_error: zero on identity, constant example, non-negative") {
    Rng rng(5);
    Var x = Var::constant(random_tensor({1, 3, 6, 8}, rng, 0, 1));
    Tensor zero = photometric_error(x, x).value();
    for (int64_t i = 0; i < zero.numel(); ++i) CHECK(std::fabs(zero[i]) < 1e-6);

    const double expected = oracle::pe_constant(0.5, 0.2);
    CHECK(expected == doctest::Approx(0.17685).epsilon(1e-4)); // frozen hand value
    Tensor pe = photometric_error(constant_image(0.5), constant_image(0.2)).value();
    CHECK(pe.shape() == std::vector<int64_t>{1, 1, 6, 8});
    for (int64_t i = 0; i < pe.numel(); ++i) CHECK(pe[i] == doctest::Approx(expected).epsilon(1e-9));

    Var y = Var::constant(random_tensor({1, 3, 6, 8}, rng, 0, 1));
    Tensor r = photometric_error(x, y).value();
    for (int64_t i = 0; i < r.numel(); ++i) CHECK(r[i] >= 0.0);
}

TEST_CASE("synthesize_view with the identity transform reproduces the source") {
    Rng rng(7);
    geometry::Intrinsics k;
    k.fx = 8;
    k.fy = 8;
    k.cx = 3.5;
    k.cy = 2.5;
    k.width = 8;
    k.height = 6;
    Var source = Var::constant(random_tensor({1, 3, 6, 8}, rng, 0, 1));
    Var depth = Var::constant(random_tensor({1, 1, 6, 8}, rng, 2.0, 9.0));
    Tensor out = synthesize_view(source, depth, geometry::RigidTransform::identity(), k).value();
    for (int64_t i = 0; i < out.numel(); ++i) CHECK(out[i] == doctest::Approx(source.value()[i]).epsilon(1e-9));
}

TEST_CASE("automask: ties give zero, better warp gives one") {
    Rng rng(9);
    Var target = Var::constant(random_tensor({1, 3, 6, 8}, rng, 0, 1));
    // static scene: source equals target, identity warp equals source
    Tensor mask = automask(target, {target}, {target});
    for (int64_t i = 0; i < mask.numel(); ++i) CHECK(mask[i] == 0.0);

    // synthesized equals target but the raw source differs -> 1 where source error > 0
    Var source = Var::constant(random_tensor({1, 3, 6, 8}, rng, 0, 1));
    Tensor mask2 = automask(target, {source}, {target});
    Tensor pe_src = photometric_error(target, source).value();
    for (int64_t i = 0; i < mask2.numel(); ++i) CHECK(mask2[i] == (pe_src[i] > 0.0 ? 1.0 : 0.0));

    CHECK_THROWS_AS(automask(target, {}, {}), std::invalid_argument);
}

TEST_CASE("automask tie-break noise flips ties with positive noise") {
    Var target = constant_image(0.5);
    Tensor noise(Tensor({1, 1, 6, 8}, 1e-5));
    Tensor mask = automask(target, {target}, {target}, &noise);
    for (int64_t i = 0; i < mask.numel(); ++i) CHECK(mask[i] == 1.0);
}

TEST_CASE("min_reprojection_loss: zero on identical, min semantics, masked mean") {
    Var target = constant_image(0.5);
    std::vector<Var> sources = {target, target};
    std::vector<std::vector<Var>> synth = {{target, target}};
    std::vector<Tensor> ones = {Tensor({1, 1, 6, 8}, 1.0)};
    ReprojectionLoss zero = min_reprojection_loss(target, sources, synth, ones);
    CHECK(zero.loss.value().item() == doctest::Approx(0.0).epsilon(1e-9));

    // two synthesized images with different constant errors: the min wins
    Var far = constant_image(0.2);
    Var close = constant_image(0.4);
    std::vector<std::vector<Var>> synth2 = {{far, close}};
    ReprojectionLoss r = min_reprojection_loss(target, sources, synth2, ones);
    const double pe_close = oracle::pe_constant(0.5, 0.4);
    CHECK(r.per_scale[0] == doctest::Approx(pe_close).epsilon(1e-9));
    CHECK(r.loss.value().item() == doctest::Approx(pe_close).epsilon(1e-9));

    // masked pixels contribute zero to a mean over all pixels
    Tensor half_mask({1, 1, 6, 8}, 0.0);
    for (int64_t i = 0; i < half_mask.numel() / 2; ++i) half_mask[i] = 1.0;
    ReprojectionLoss rm = min_reprojection_loss(target, sources, synth2, {half_mask});
    CHECK(rm.loss.value().item() == doctest::Approx(pe_close * 0.5).epsilon(1e-9));
    CHECK(rm.mask_density[0] == doctest::Approx(0.5).epsilon(1e-12));

    CHECK_THROWS_AS(min_reprojection_loss(target, sources, {}, {}), std::invalid_argument);
}

TEST_CASE("smoothness: constant disparity, 1x2 hand case, scale invariance") {
    Var flat = Var::constant(Tensor({1, 1, 4, 5}, 0.7));
    Rng rng(11);
    Var img = Var::constant(random_tensor({1, 3, 4, 5}, rng, 0, 1));
    CHECK(smoothness_loss(flat, img).value().item() == doctest::Approx(0.0).epsilon(1e-12));

    Var two = Var::constant(Tensor({1, 1, 1, 2}, {1.0, 3.0}));
    Var const_img = Var::constant(Tensor({1, 3, 1, 2}, 0.3));
    const double expected = oracle::smoothness_1x2(1.0, 3.0);
    CHECK(expected == doctest::Approx(1.0).epsilon(1e-12)); // frozen hand value
    CHECK(smoothness_loss(two, const_img).value().item() == doctest::Approx(expected).epsilon(1e-9));

    Var disp = Var::constant(random_tensor({1, 1, 4, 5}, rng, 0.2, 1.2));
    const double base = smoothness_loss(disp, img).value().item();
    Tensor scaled = disp.value();
    for (int64_t i = 0; i < scaled.numel(); ++i) scaled[i] *= 3.7;
    const double rescaled = smoothness_loss(Var::constant(scaled), img).value().item();
    CHECK(std::fabs(base - rescaled) < 1e-9);

    Tensor negative({1, 1, 2, 2}, -1.0);
    CHECK_THROWS_AS(smoothness_loss(Var::constant(negative), Var::constant(Tensor({1, 3, 2, 2}, 0.5))),
                    std::invalid_argument);
}

TEST_CASE("smoothness prefers disparity edges aligned with image edges") {
    // disparity steps at column 2; image edge either aligned or elsewhere
    Tensor disp({1, 1, 1, 4}, {1.0, 1.0, 3.0, 3.0});
    Tensor aligned({1, 3, 1, 4});
    Tensor misaligned({1, 3, 1, 4});
    for (int64_t c = 0; c < 3; ++c) {
        aligned.at({0, c, 0, 0}) = 0.1;
        aligned.at({0, c, 0, 1}) = 0.1;
        aligned.at({0, c, 0, 2}) = 0.9;
        aligned.at({0, c, 0, 3}) = 0.9;
        for (int64_t x = 0; x < 4; ++x) misaligned.at({0, c, 0, x}) = 0.5;
    }
    const double with_edge = smoothness_loss(Var::constant(disp), Var::constant(aligned)).value().item();
    const double without_edge = smoothness_loss(Var::constant(disp), Var::constant(misaligned)).value().item();
    CHECK(with_edge < without_edge);
}

TEST_CASE("total_loss arithmetic and breakdown invariant") {
    Var lp = Var::constant(Tensor::scalar(0.5));
    Var ls = Var::constant(Tensor::scalar(100.0));
    LossBreakdown b = total_loss(lp, ls, 1e-3);
    CHECK(b.total_value == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(std::fabs(b.total_value - (b.photometric + b.lambda * b.smoothness)) < 1e-9);

    LossBreakdown z = total_loss(lp, ls, 0.0);
    CHECK(z.total_value == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(total_loss(lp, ls, -1.0), std::invalid_argument);
}
