#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sadepth/gradcheck.hpp"
#include "sadepth/ops.hpp"
#include "support/testutil.hpp"

using namespace sadepth;
namespace op = sadepth::ops;
using testing::random_tensor;

namespace {

Var leaf(Tensor t) { return Var::param(std::move(t)); }

} // namespace

TEST_CASE("tensor basics") {
    Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.numel() == 6);
    CHECK(t.at({1, 2}) == 6);
    Tensor r = t.reshaped({3, 2});
    CHECK(r.at({2, 1}) == 6);
    CHECK_THROWS(t.reshaped({4, 2}));
}

TEST_CASE("broadcast add/mul shapes and reduction in backward") {
    Rng rng(7);
    Var a = leaf(random_tensor({2, 1, 3}, rng));
    Var b = leaf(random_tensor({4, 3}, rng));
    Var y = op::mul(a, b);
    CHECK(y.shape() == std::vector<int64_t>{2, 4, 3});
    auto res = gradcheck([&] { return op::sum_all(op::mul(a, b)); }, {a, b});
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("elementwise op gradients") {
    Rng rng(11);
    Var a = leaf(random_tensor({3, 4}, rng, 0.2, 1.5));
    Var b = leaf(random_tensor({3, 4}, rng, 0.3, 1.8));

    auto check = [&](std::function<Var()> f) {
        auto res = gradcheck(f, {a, b});
        CHECK(res.max_rel_err < 1e-6);
    };
    check([&] { return op::sum_all(op::div(a, b)); });
    check([&] { return op::sum_all(op::exp(op::neg(a))); });
    check([&] { return op::sum_all(op::log(a)); });
    check([&] { return op::sum_all(op::sqrt(a)); });
    check([&] { return op::sum_all(op::square(op::sub(a, b))); });
    check([&] { return op::sum_all(op::reciprocal(a)); });
    check([&] { return op::sum_all(op::sigmoid(op::mul_scalar(a, 3.0))); });
    check([&] { return op::sum_all(op::elu(op::sub(a, b))); });
    check([&] { return op::sum_all(op::minimum(a, b)); });
    check([&] { return op::mean_all(op::abs(op::sub(a, b))); });
}

TEST_CASE("reductions and shape ops") {
    Rng rng(13);
    Var a = leaf(random_tensor({2, 3, 4}, rng));
    CHECK(op::sum_axis(a, 1, true).shape() == std::vector<int64_t>{2, 1, 4});
    CHECK(op::sum_axis(a, 1, false).shape() == std::vector<int64_t>{2, 4});
    auto res = gradcheck([&] { return op::sum_all(op::square(op::mean_axis(a, 2, false))); }, {a});
    CHECK(res.max_rel_err < 1e-7);
    res = gradcheck([&] { return op::sum_all(op::square(op::slice(a, 1, 1, 2))); }, {a});
    CHECK(res.max_rel_err < 1e-7);
    res = gradcheck([&] { return op::sum_all(op::square(op::reshape(a, {6, 4}))); }, {a});
    CHECK(res.max_rel_err < 1e-7);

    Var b = leaf(random_tensor({2, 2, 4}, rng));
    res = gradcheck([&] { return op::sum_all(op::square(op::concat({a, b}, 1))); }, {a, b});
    CHECK(res.max_rel_err < 1e-7);
}

TEST_CASE("matmul and batched matmul") {
    Rng rng(17);
    Var a = leaf(random_tensor({3, 4}, rng));
    Var b = leaf(random_tensor({4, 2}, rng));
    Tensor y = op::matmul(a, b).value();
    double manual = 0;
    for (int k = 0; k < 4; ++k) manual += a.value().at({1, k}) * b.value().at({k, 0});
    CHECK(y.at({1, 0}) == doctest::Approx(manual).epsilon(1e-12));
    auto res = gradcheck([&] { return op::sum_all(op::square(op::matmul(a, b))); }, {a, b});
    CHECK(res.max_rel_err < 1e-7);

    Var c = leaf(random_tensor({2, 3, 4}, rng));
    Var d = leaf(random_tensor({2, 4, 5}, rng));
    res = gradcheck([&] { return op::sum_all(op::square(op::batched_matmul(c, d))); }, {c, d});
    CHECK(res.max_rel_err < 1e-7);
    res = gradcheck([&] { return op::sum_all(op::square(op::transpose_last2(c))); }, {c});
    CHECK(res.max_rel_err < 1e-7);
}

TEST_CASE("softmax rows are distributions and gradients match") {
    Rng rng(19);
    Var x = leaf(random_tensor({2, 5, 3}, rng, -2, 2));
    Var s = op::softmax(x, 1);
    for (int64_t o = 0; o < 2; ++o)
        for (int64_t i = 0; i < 3; ++i) {
            double sum = 0;
            for (int64_t l = 0; l < 5; ++l) sum += s.value().at({o, l, i});
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        }
    auto res = gradcheck([&] { return op::sum_all(op::square(op::softmax(x, 1))); }, {x});
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("softmax is stable for large logits") {
    Var x = Var::constant(Tensor({1, 3, 1}, {1000.0, 1001.0, 999.0}));
    Tensor s = op::softmax(x, 1).value();
    CHECK(s.all_finite());
    CHECK(s.at({0, 1, 0}) > s.at({0, 0, 0}));
}

TEST_CASE("conv2d matches direct computation and gradients") {
    Rng rng(23);
    Var x = leaf(random_tensor({2, 3, 5, 6}, rng));
    Var w = leaf(random_tensor({4, 3, 3, 3}, rng, -0.5, 0.5));
    Var b = leaf(random_tensor({4}, rng, -0.5, 0.5));
    Var y = op::conv2d(x, w, b, 1, 1);
    CHECK(y.shape() == std::vector<int64_t>{2, 4, 5, 6});

    // direct evaluation at one output location
    double want = b.value()[1];
    for (int c = 0; c < 3; ++c)
        for (int kh = 0; kh < 3; ++kh)
            for (int kw = 0; kw < 3; ++kw) {
                int ih = 2 + kh - 1, iw = 3 + kw - 1;
                want += x.value().at({1, c, ih, iw}) * w.value().at({1, c, kh, kw});
            }
    CHECK(y.value().at({1, 1, 2, 3}) == doctest::Approx(want).epsilon(1e-12));

    auto res = gradcheck([&] { return op::sum_all(op::square(op::conv2d(x, w, b, 1, 1))); }, {x, w, b});
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("conv2d stride and dilation output shapes and gradients") {
    Rng rng(29);
    Var x = leaf(random_tensor({1, 2, 8, 8}, rng));
    Var w = leaf(random_tensor({3, 2, 3, 3}, rng, -0.5, 0.5));
    CHECK(op::conv2d(x, w, Var(), 2, 1).shape() == std::vector<int64_t>{1, 3, 4, 4});
    CHECK(op::conv2d(x, w, Var(), 1, 2, 2).shape() == std::vector<int64_t>{1, 3, 8, 8});
    auto res = gradcheck([&] { return op::sum_all(op::square(op::conv2d(x, w, Var(), 2, 1))); }, {x, w});
    CHECK(res.max_rel_err < 1e-6);
    res = gradcheck([&] { return op::sum_all(op::square(op::conv2d(x, w, Var(), 1, 2, 2))); }, {x, w});
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("maxpool routes gradient to the argmax") {
    Rng rng(31);
    Var x = leaf(random_tensor({1, 2, 6, 6}, rng));
    Var y = op::maxpool2d(x, 3, 2, 1);
    CHECK(y.shape() == std::vector<int64_t>{1, 2, 3, 3});
    auto res = gradcheck([&] { return op::sum_all(op::square(op::maxpool2d(x, 3, 2, 1))); }, {x});
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("upsample and resize") {
    Rng rng(37);
    Var x = leaf(random_tensor({1, 2, 3, 4}, rng));
    Var up = op::upsample_nearest2x(x);
    CHECK(up.shape() == std::vector<int64_t>{1, 2, 6, 8});
    CHECK(up.value().at({0, 1, 5, 7}) == x.value().at({0, 1, 2, 3}));
    auto res = gradcheck([&] { return op::sum_all(op::square(op::upsample_nearest2x(x))); }, {x});
    CHECK(res.max_rel_err < 1e-7);
    res = gradcheck([&] { return op::sum_all(op::square(op::resize_bilinear(x, 6, 8))); }, {x});
    CHECK(res.max_rel_err < 1e-7);

    // resize to the same size is the identity
    Tensor same = op::resize_bilinear(x, 3, 4).value();
    for (int64_t i = 0; i < same.numel(); ++i) CHECK(same[i] == doctest::Approx(x.value()[i]).epsilon(1e-12));
}

TEST_CASE("box filter: constant image fixed point and gradient") {
    Rng rng(41);
    Var c = leaf(Tensor({1, 1, 4, 5}, 0.7));
    Tensor y = op::box_filter3(c).value();
    for (int64_t i = 0; i < y.numel(); ++i) CHECK(y[i] == doctest::Approx(0.7).epsilon(1e-12));
    Var x = leaf(random_tensor({1, 2, 4, 5}, rng));
    auto res = gradcheck([&] { return op::sum_all(op::square(op::box_filter3(x))); }, {x});
    CHECK(res.max_rel_err < 1e-7);
}

TEST_CASE("batchnorm train/eval") {
    Rng rng(43);
    Var x = leaf(random_tensor({3, 2, 4, 4}, rng));
    Var gamma = leaf(random_tensor({2}, rng, 0.5, 1.5));
    Var beta = leaf(random_tensor({2}, rng, -0.5, 0.5));
    Tensor rm({2}), rv({2}, 1.0);

    Var y = op::batchnorm_train(x, gamma, beta, rm, rv, 0.1, 1e-5);
    // normalized output has ~zero mean per channel (scaled by gamma, shifted by beta)
    for (int64_t c = 0; c < 2; ++c) {
        double mean = 0;
        for (int64_t n = 0; n < 3; ++n)
            for (int64_t i = 0; i < 16; ++i) mean += y.value().at({n, c, i / 4, i % 4});
        mean /= 48.0;
        CHECK(mean == doctest::Approx(beta.value()[c]).epsilon(1e-9));
    }
    Tensor rm2({2}), rv2({2}, 1.0);
    auto res = gradcheck(
        [&] {
            Tensor m = rm2, v = rv2; // keep running buffers untouched by probes
            return op::sum_all(op::square(op::batchnorm_train(x, gamma, beta, m, v, 0.1, 1e-5)));
        },
        {x, gamma, beta});
    CHECK(res.max_rel_err < 1e-5);

    res = gradcheck([&] { return op::sum_all(op::square(op::batchnorm_eval(x, gamma, beta, rm, rv, 1e-5))); },
                    {x, gamma, beta});
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("grid_sample identity, midpoint, clamp, gradients") {
    Rng rng(47);
    // identity grid reproduces the image
    Var img = leaf(random_tensor({1, 2, 4, 5}, rng));
    Tensor grid({1, 4, 5, 2});
    for (int64_t v = 0; v < 4; ++v)
        for (int64_t u = 0; u < 5; ++u) {
            grid.at({0, v, u, 0}) = static_cast<double>(u);
            grid.at({0, v, u, 1}) = static_cast<double>(v);
        }
    Tensor out = op::grid_sample(img, Var::constant(grid)).value();
    for (int64_t i = 0; i < out.numel(); ++i) CHECK(out[i] == doctest::Approx(img.value()[i]).epsilon(1e-12));

    // midpoint between two pixels of values 0.2 and 0.6 -> 0.4
    Var two = Var::constant(Tensor({1, 1, 1, 2}, {0.2, 0.6}));
    Tensor g1({1, 1, 1, 2}, {0.5, 0.0});
    CHECK(op::grid_sample(two, Var::constant(g1)).value()[0] == doctest::Approx(0.4).epsilon(1e-12));

    // clamped coordinate (-5, 10) on a 20x20 image reads pixel (0, 10)
    Tensor big({1, 1, 20, 20});
    for (int64_t i = 0; i < big.numel(); ++i) big[i] = static_cast<double>(i);
    Tensor g2({1, 1, 1, 2}, {-5.0, 10.0});
    CHECK(op::grid_sample(Var::constant(big), Var::constant(g2)).value()[0] ==
          doctest::Approx(big.at({0, 0, 10, 0})).epsilon(1e-12));

    // gradients w.r.t. image and interior grid coordinates
    Var gv = leaf(Tensor({1, 2, 2, 2}, {1.3, 2.6, 0.7, 1.9, 2.2, 0.4, 1.1, 2.9}));
    auto res = gradcheck([&] { return op::sum_all(op::square(op::grid_sample(img, gv))); }, {img, gv});
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("no-grad guard builds no tape") {
    Var a = leaf(Tensor({2}, {1.0, 2.0}));
    {
        NoGradGuard guard;
        Var y = op::sum_all(op::square(a));
        CHECK(!y.requires_grad());
    }
    Var y = op::sum_all(op::square(a));
    CHECK(y.requires_grad());
}

TEST_CASE("backward accumulates across shared subexpressions") {
    Var a = leaf(Tensor({1}, {3.0}));
    Var sq = op::square(a); // used twice
    Var y = op::add(sq, sq);
    y = op::sum_all(y);
    y.backward();
    CHECK(a.grad()[0] == doctest::Approx(12.0).epsilon(1e-12)); // d(2x^2)/dx = 4x
}
