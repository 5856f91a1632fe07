#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "sadepth/attention.hpp"
#include "support/oracle.hpp"
#include "support/testutil.hpp"

using namespace sadepth;
using namespace sadepth::attention;
namespace op = sadepth::ops;
using testing::random_tensor;

namespace {

AttentionProjections fixed_projections(double fq, double fk, double fv) {
    AttentionProjections p;
    p.w_query = Var::param(Tensor({1, 1}, {fq}));
    p.w_key = Var::param(Tensor({1, 1}, {fk}));
    p.w_value = Var::param(Tensor({1, 1}, {fv}));
    return p;
}

// X = [0, 1] as a 1x1x1x2 feature map
Var scalar_case_input() { return Var::constant(Tensor({1, 1, 1, 2}, {0.0, 1.0})); }

} // namespace

TEST_CASE("project_qkv: identity, zero, scalar multiply; channel mismatch") {
    Rng rng(3);
    Var x = Var::constant(random_tensor({1, 2, 2, 2}, rng));
    AttentionProjections ident;
    ident.w_query = Var::param(Tensor({2, 2}, {1, 0, 0, 1}));
    ident.w_key = Var::param(Tensor({2, 2}, 0.0));
    ident.w_value = Var::param(Tensor({2, 2}, {2, 0, 0, 2}));
    QkvMaps maps = project_qkv(x, ident);
    for (int64_t i = 0; i < x.numel(); ++i) {
        CHECK(maps.query.value()[i] == doctest::Approx(x.value()[i]).epsilon(1e-12));
        CHECK(maps.key.value()[i] == 0.0);
        CHECK(maps.value.value()[i] == doctest::Approx(2.0 * x.value()[i]).epsilon(1e-12));
    }

    Var scalar_x = Var::constant(Tensor({1, 1, 1, 2}, {1.0, 3.0}));
    QkvMaps s = project_qkv(scalar_x, fixed_projections(2.0, 1.0, 1.0));
    CHECK(s.query.value()[0] == doctest::Approx(2.0));
    CHECK(s.query.value()[1] == doctest::Approx(6.0));

    Var wrong = Var::constant(random_tensor({1, 3, 2, 2}, rng));
    CHECK_THROWS_AS(project_qkv(wrong, ident), std::invalid_argument);
}

TEST_CASE("attention_weights: uniform rows for zero query, P=1, scalar case") {
    Rng rng(5);
    Var zero_q = Var::constant(Tensor({1, 2, 2, 3}, 0.0));
    Var key = Var::constant(random_tensor({1, 2, 2, 3}, rng));
    Tensor w = attention_weights(zero_q, key).value();
    for (int64_t r = 0; r < 6; ++r)
        for (int64_t c = 0; c < 6; ++c) CHECK(w.at({0, r, c}) == doctest::Approx(1.0 / 6.0).epsilon(1e-9));

    Var single = Var::constant(Tensor({1, 3, 1, 1}, {0.2, -1.0, 0.7}));
    Tensor w1 = attention_weights(single, single).value();
    CHECK(w1.numel() == 1);
    CHECK(w1[0] == doctest::Approx(1.0));

    QkvMaps maps = project_qkv(scalar_case_input(), fixed_projections(1.0, 1.0, 1.0));
    Tensor ws = attention_weights(maps.query, maps.key).value();
    const auto expected = oracle::attention_scalar_case();
    CHECK(ws.at({0, 1, 0}) == doctest::Approx(expected.row2[0]).epsilon(1e-9));
    CHECK(ws.at({0, 1, 1}) == doctest::Approx(expected.row2[1]).epsilon(1e-9));
    // frozen literals from the derivation
    CHECK(ws.at({0, 1, 0}) == doctest::Approx(0.2689).epsilon(1e-4));
    CHECK(ws.at({0, 1, 1}) == doctest::Approx(0.7311).epsilon(1e-4));
}

TEST_CASE("attention_output: convex average, one-hot, scalar case") {
    Rng rng(7);
    const int64_t p = 6;
    Var value = Var::constant(random_tensor({1, 3, 2, 3}, rng));
    Var uniform = Var::constant(Tensor({1, p, p}, 1.0 / static_cast<double>(p)));
    Tensor out = attention_output(value, uniform).value();
    for (int64_t c = 0; c < 3; ++c) {
        double mean = 0;
        for (int64_t i = 0; i < p; ++i) mean += value.value()[c * p + i];
        mean /= static_cast<double>(p);
        for (int64_t i = 0; i < p; ++i) CHECK(out[c * p + i] == doctest::Approx(mean).epsilon(1e-9));
    }

    Tensor onehot({1, p, p}, 0.0);
    for (int64_t r = 0; r < p; ++r) onehot.at({0, r, 2}) = 1.0; // every query attends to position 2
    Tensor picked = attention_output(value, Var::constant(onehot)).value();
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t i = 0; i < p; ++i) CHECK(picked[c * p + i] == doctest::Approx(value.value()[c * p + 2]));

    Var a = self_attention(scalar_case_input(), fixed_projections(1.0, 1.0, 1.0));
    const auto expected = oracle::attention_scalar_case();
    CHECK(a.value()[0] == doctest::Approx(expected.output[0]).epsilon(1e-9));
    CHECK(a.value()[1] == doctest::Approx(expected.output[1]).epsilon(1e-9));
    CHECK(a.value()[0] == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(a.value()[1] == doctest::Approx(0.7311).epsilon(1e-4));
}

TEST_CASE("export_attention_maps: rows reshape, sums, errors") {
    QkvMaps maps = project_qkv(scalar_case_input(), fixed_projections(1.0, 1.0, 1.0));
    Tensor ws = attention_weights(maps.query, maps.key).value().reshaped({2, 2});
    auto heat = export_attention_maps(ws, {{0, 0}, {1, 0}}, 1, 2);
    REQUIRE(heat.size() == 2);
    const auto expected = oracle::attention_scalar_case();
    CHECK(heat[0][0] == doctest::Approx(expected.row1[0]).epsilon(1e-9));
    CHECK(heat[1][1] == doctest::Approx(expected.row2[1]).epsilon(1e-9));
    for (const Tensor& m : heat) {
        double s = 0;
        for (int64_t i = 0; i < m.numel(); ++i) s += m[i];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
    CHECK_THROWS_AS(export_attention_maps(ws, {{5, 0}}, 1, 2), std::invalid_argument);

    Tensor one({1, 1}, 1.0);
    auto single = export_attention_maps(one, {{0, 0}}, 1, 1);
    CHECK(single[0][0] == doctest::Approx(1.0));
}

TEST_CASE("attention rows are probability distributions for random inputs") {
    Rng rng(11);
    Var x = Var::constant(random_tensor({2, 4, 3, 3}, rng, -2, 2));
    AttentionProjections w = AttentionProjections::create(4, 3, rng);
    QkvMaps maps = project_qkv(x, w);
    Tensor s = attention_weights(maps.query, maps.key).value();
    const int64_t p = 9;
    for (int64_t n = 0; n < 2; ++n)
        for (int64_t r = 0; r < p; ++r) {
            double sum = 0;
            for (int64_t c = 0; c < p; ++c) {
                const double v = s.at({n, r, c});
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
                sum += v;
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
        }
}

TEST_CASE("attention output stays in the convex hull of value vectors") {
    Rng rng(13);
    Var x = Var::constant(random_tensor({1, 4, 3, 4}, rng, -2, 2));
    AttentionProjections w = AttentionProjections::create(4, 3, rng);
    QkvMaps maps = project_qkv(x, w);
    Var a = attention_output(maps.value, attention_weights(maps.query, maps.key));
    const int64_t p = 12;
    for (int64_t c = 0; c < 3; ++c) {
        double lo = 1e30, hi = -1e30;
        for (int64_t i = 0; i < p; ++i) {
            lo = std::min(lo, maps.value.value()[c * p + i]);
            hi = std::max(hi, maps.value.value()[c * p + i]);
        }
        for (int64_t i = 0; i < p; ++i) {
            CHECK(a.value()[c * p + i] >= lo - 1e-9);
            CHECK(a.value()[c * p + i] <= hi + 1e-9);
        }
    }
}

TEST_CASE("permutation equivariance of the attention map") {
    Rng rng(17);
    const int64_t channels = 3, h = 2, w = 3, p = h * w;
    Tensor x = random_tensor({1, channels, h, w}, rng);
    const std::vector<int64_t> perm = {3, 0, 5, 1, 4, 2};
    Tensor xp({1, channels, h, w});
    for (int64_t c = 0; c < channels; ++c)
        for (int64_t i = 0; i < p; ++i) xp[c * p + i] = x[c * p + perm[static_cast<size_t>(i)]];

    AttentionProjections proj = AttentionProjections::create(channels, 2, rng);
    QkvMaps m0 = project_qkv(Var::constant(x), proj);
    QkvMaps m1 = project_qkv(Var::constant(xp), proj);
    Tensor s0 = attention_weights(m0.query, m0.key).value();
    Tensor s1 = attention_weights(m1.query, m1.key).value();
    Tensor a0 = attention_output(m0.value, attention_weights(m0.query, m0.key)).value();
    Tensor a1 = attention_output(m1.value, attention_weights(m1.query, m1.key)).value();
    for (int64_t r = 0; r < p; ++r)
        for (int64_t c = 0; c < p; ++c) {
            CHECK(s1.at({0, r, c}) ==
                  doctest::Approx(s0.at({0, perm[static_cast<size_t>(r)], perm[static_cast<size_t>(c)]}))
                      .epsilon(1e-12));
        }
    for (int64_t c = 0; c < 2; ++c)
        for (int64_t i = 0; i < p; ++i) {
            CHECK(a1[c * p + i] == doctest::Approx(a0[c * p + perm[static_cast<size_t>(i)]]).epsilon(1e-12));
        }
}

TEST_CASE("score scaling flag divides logits by sqrt(N)") {
    Rng rng(23);
    Var x = Var::constant(random_tensor({1, 4, 2, 2}, rng, -1, 1));
    AttentionProjections w = AttentionProjections::create(4, 4, rng);
    QkvMaps maps = project_qkv(x, w);
    Tensor plain = attention_weights(maps.query, maps.key, false).value();
    Tensor scaled = attention_weights(maps.query, maps.key, true).value();
    double diff = 0;
    for (int64_t i = 0; i < plain.numel(); ++i) diff += std::fabs(plain[i] - scaled[i]);
    CHECK(diff > 1e-6); // scaling changes the distribution
    // scaled weights are still row-stochastic
    for (int64_t r = 0; r < 4; ++r) {
        double sum = 0;
        for (int64_t c = 0; c < 4; ++c) sum += scaled.at({0, r, c});
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}
