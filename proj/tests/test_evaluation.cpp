#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sadepth/evaluation.hpp"
#include "support/oracle.hpp"
#include "support/testutil.hpp"

using namespace sadepth;
using namespace sadepth::eval;
using testing::random_tensor;

namespace {
EvalProtocol no_scaling() {
    EvalProtocol p;
    p.median_scaling = false;
    return p;
}
} // namespace

TEST_CASE("perfect prediction scores zero errors and full deltas") {
    Rng rng(3);
    Tensor gt = random_tensor({1, 4, 5}, rng, 1.0, 20.0);
    DepthMetrics m = compute_metrics(gt, gt, nullptr, no_scaling());
    CHECK(m.abs_rel == doctest::Approx(0.0));
    CHECK(m.sq_rel == doctest::Approx(0.0));
    CHECK(m.rmse == doctest::Approx(0.0));
    CHECK(m.rmse_log == doctest::Approx(0.0));
    CHECK(m.log10 == doctest::Approx(0.0));
    CHECK(m.a1 == doctest::Approx(1.0));
    CHECK(m.a3 == doctest::Approx(1.0));
}

TEST_CASE("single pixel pred 2 vs gt 1 matches the hand-derived vector") {
    Tensor pred({1, 1, 1}, 2.0);
    Tensor gt({1, 1, 1}, 1.0);
    DepthMetrics m = compute_metrics(pred, gt, nullptr, no_scaling());
    const oracle::Metrics e = oracle::metrics_single(2.0, 1.0);
    CHECK(m.abs_rel == doctest::Approx(e.abs_rel).epsilon(1e-12));
    CHECK(m.sq_rel == doctest::Approx(e.sq_rel).epsilon(1e-12));
    CHECK(m.rmse == doctest::Approx(e.rmse).epsilon(1e-12));
    CHECK(m.rmse_log == doctest::Approx(e.rmse_log).epsilon(1e-12));
    CHECK(m.log10 == doctest::Approx(e.log10).epsilon(1e-12));
    CHECK(m.a1 == e.a1);
    CHECK(m.a2 == e.a2);
    CHECK(m.a3 == e.a3);
    // frozen literals; ratio 2 exceeds every delta threshold (1.25^3 = 1.953125 < 2)
    CHECK(m.abs_rel == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(m.sq_rel == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(m.rmse == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(m.rmse_log == doctest::Approx(0.6931471805599453).epsilon(1e-9));
    CHECK(m.log10 == doctest::Approx(0.30102999566398120).epsilon(1e-9));
    CHECK(m.a1 == 0.0);
    CHECK(m.a2 == 0.0);
    CHECK(m.a3 == 0.0);
}

TEST_CASE("median scaling is exactly invariant to a power-of-two rescale") {
    Rng rng(5);
    Tensor gt = random_tensor({1, 6, 7}, rng, 2.0, 30.0);
    Tensor pred = random_tensor({1, 6, 7}, rng, 2.0, 30.0);
    EvalProtocol p; // scaling on
    DepthMetrics base = compute_metrics(pred, gt, nullptr, p);
    Tensor scaled = pred;
    for (int64_t i = 0; i < scaled.numel(); ++i) scaled[i] *= 2.0;
    DepthMetrics doubled = compute_metrics(scaled, gt, nullptr, p);
    CHECK(base.abs_rel == doubled.abs_rel);
    CHECK(base.sq_rel == doubled.sq_rel);
    CHECK(base.rmse == doubled.rmse);
    CHECK(base.rmse_log == doubled.rmse_log);
    CHECK(base.a1 == doubled.a1);

    // non-dyadic rescale agrees to rounding error
    Tensor odd = pred;
    for (int64_t i = 0; i < odd.numel(); ++i) odd[i] *= 3.7;
    DepthMetrics m37 = compute_metrics(odd, gt, nullptr, p);
    CHECK(m37.abs_rel == doctest::Approx(base.abs_rel).epsilon(1e-12));
}

TEST_CASE("strict delta thresholds: ratio exactly 1.25 fails") {
    Tensor pred({1, 1, 1}, 1.25);
    Tensor gt({1, 1, 1}, 1.0);
    DepthMetrics m = compute_metrics(pred, gt, nullptr, no_scaling());
    CHECK(m.a1 == 0.0);
}

TEST_CASE("threshold monotonicity holds for random inputs") {
    Rng rng(7);
    for (int t = 0; t < 10; ++t) {
        Tensor gt = random_tensor({1, 5, 5}, rng, 0.5, 40.0);
        Tensor pred = random_tensor({1, 5, 5}, rng, 0.5, 40.0);
        DepthMetrics m = compute_metrics(pred, gt, nullptr, no_scaling());
        CHECK(m.a1 <= m.a2);
        CHECK(m.a2 <= m.a3);
    }
}

TEST_CASE("out-of-range and masked ground truth") {
    Tensor pred({1, 2, 2}, 5.0);
    Tensor beyond({1, 2, 2}, 100.0); // beyond the 80 cap
    CHECK_THROWS_AS(compute_metrics(pred, beyond, nullptr, no_scaling()), std::runtime_error);

    Tensor gt({1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
    Tensor mask({1, 2, 2}, {0.0, 0.0, 1.0, 1.0});
    DepthMetrics m = compute_metrics(pred, gt, &mask, no_scaling());
    // only the 3.0 and 4.0 pixels count
    const double expected = 0.5 * (std::fabs(5.0 - 3.0) / 3.0 + std::fabs(5.0 - 4.0) / 4.0);
    CHECK(m.abs_rel == doctest::Approx(expected).epsilon(1e-12));

    Tensor zero_mask({1, 2, 2}, 0.0);
    CHECK_THROWS_AS(compute_metrics(pred, gt, &zero_mask, no_scaling()), std::runtime_error);
}

TEST_CASE("prediction clamping into the protocol range") {
    Tensor pred({1, 1, 2}, {1e-9, 500.0});
    Tensor gt({1, 1, 2}, {1.0, 79.0});
    DepthMetrics m = compute_metrics(pred, gt, nullptr, no_scaling());
    // clamped to [1e-3, 80]: errors computed against the clamped values
    const double e0 = std::fabs(1e-3 - 1.0) / 1.0;
    const double e1 = std::fabs(80.0 - 79.0) / 79.0;
    CHECK(m.abs_rel == doctest::Approx(0.5 * (e0 + e1)).epsilon(1e-12));
}

TEST_CASE("evaluate_frames: aggregate is the unweighted mean; workers agree") {
    Rng rng(11);
    net::DepthNetConfig cfg = net::DepthNetConfig::desk();
    cfg.input_height = 16;
    cfg.input_width = 24;
    cfg.stem_channels = {4, 4, 8};
    cfg.stage_channels = {8, 12, 16, 24};
    cfg.attention_channels = 24;
    cfg.ddv_bins = 4;
    cfg.decoder_channels = {8, 8, 8, 8, 4, 4};
    net::DepthNet depth_net(cfg, rng);

    std::vector<EvalItem> items;
    for (int i = 0; i < 3; ++i) {
        EvalItem item;
        item.image = random_tensor({3, 16, 24}, rng, 0, 1);
        item.gt_depth = random_tensor({1, 16, 24}, rng, 2.0, 50.0);
        item.name = "img" + std::to_string(i);
        items.push_back(std::move(item));
    }
    EvalProtocol protocol;
    EvalResult res = evaluate_frames(depth_net, items, protocol, 1);
    REQUIRE(res.per_image.size() == 3);
    double mean_abs_rel = 0;
    for (const auto& m : res.per_image) mean_abs_rel += m.abs_rel;
    mean_abs_rel /= 3.0;
    CHECK(res.aggregate.abs_rel == doctest::Approx(mean_abs_rel).epsilon(1e-12));

    EvalResult res2 = evaluate_frames(depth_net, items, protocol, 2);
    for (size_t i = 0; i < 3; ++i) CHECK(res2.per_image[i].abs_rel == res.per_image[i].abs_rel);

    const std::string table = format_table(res);
    CHECK(table.find("abs_rel") != std::string::npos);
    CHECK(table.find("mean") != std::string::npos);
}

TEST_CASE("crop border excludes edge pixels from the protocol") {
    Tensor gt({1, 4, 4}, 2.0);
    Tensor pred({1, 4, 4}, 2.0);
    // corrupt the border only; a 1-pixel crop must ignore it
    pred[0] = 100.0;
    pred.at({0, 3, 3}) = 100.0;
    EvalProtocol p = no_scaling();
    p.crop_border = 1;
    DepthMetrics m = compute_metrics(pred, gt, nullptr, p);
    CHECK(m.abs_rel == doctest::Approx(0.0));
    EvalProtocol full = no_scaling();
    DepthMetrics worse = compute_metrics(pred, gt, nullptr, full);
    CHECK(worse.abs_rel > 0.0);
}
