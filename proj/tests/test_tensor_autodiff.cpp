#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lut/autodiff.hpp"
#include "lut/rng.hpp"
#include "oracles.hpp"

using namespace lut;

namespace {

kernels::Conv2dGeom geom(int64_t n, int64_t ci, int64_t hw, int64_t co, int64_t k,
                         int64_t stride = 1, int64_t pad = 0, int64_t dil = 1) {
    kernels::Conv2dGeom g{};
    g.n = n;
    g.c_in = ci;
    g.h = g.w = hw;
    g.c_out = co;
    g.k = k;
    g.stride = stride;
    g.pad = pad;
    g.dil = dil;
    return g;
}

template <class S>
Tensor<S> randu(const Shape& s, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<S> t(s);
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = S(rng.uniform(lo, hi));
    return t;
}

} // namespace

TEST_CASE("tensor shape/data invariant") {
    CHECK_THROWS_AS(Tensor<float>(Shape{2, 3}, std::vector<float>(5)), shape_error);
    Tensor<float> t(Shape{2, 3}, 1.f);
    CHECK(t.numel() == 6);
    t[0] = std::numeric_limits<float>::infinity();
    CHECK_FALSE(t.all_finite());
}

TEST_CASE("conv2d scalar product and identity") {
    auto x = make_leaf<float>(Tensor<float>(Shape{1, 1, 1, 1}, {2.f}));
    auto w = make_leaf<float>(Tensor<float>(Shape{1, 1, 1, 1}, {3.f}));
    auto b = make_leaf<float>(Tensor<float>(Shape{1}, {0.f}));
    auto y = ops::conv2d(x, w, b, geom(1, 1, 1, 1, 1));
    CHECK(y->value[0] == doctest::Approx(6.f));

    Rng rng(11);
    auto xi = make_leaf<float>(randu<float>(Shape{1, 1, 6, 6}, rng));
    auto wi = make_leaf<float>(Tensor<float>(Shape{1, 1, 1, 1}, {1.f}));
    auto yi = ops::conv2d(xi, wi, nullptr, geom(1, 1, 6, 1, 1));
    for (int64_t i = 0; i < yi->value.numel(); ++i) CHECK(yi->value[i] == xi->value[i]);
}

TEST_CASE("conv2d matches the six-loop oracle") {
    Rng rng(5);
    for (int rep = 0; rep < 6; ++rep) {
        const int64_t k = rep % 2 ? 3 : 2;
        const int64_t stride = 1 + rep % 2, pad = rep % 3, dil = int64_t(1) + (rep == 4 ? 1 : 0);
        auto g = geom(2, 3, 8, 4, k, stride, pad, dil);
        auto x = make_leaf<float>(randu<float>(Shape{g.n, g.c_in, g.h, g.w}, rng));
        auto w = make_leaf<float>(randu<float>(Shape{g.c_out, g.c_in, g.k, g.k}, rng));
        auto b = make_leaf<float>(randu<float>(Shape{g.c_out}, rng));
        auto y = ops::conv2d(x, w, b, g);

        oracle::Geom og{g.n, g.c_in, g.h, g.w, g.c_out, g.k, g.stride, g.pad, g.dil};
        std::vector<float> bias(b->value.vec());
        auto ref = oracle::naive_conv2d<float>(og, x->value, w->value, bias);
        REQUIRE(ref.numel() == y->value.numel());
        for (int64_t i = 0; i < ref.numel(); ++i)
            CHECK(std::abs(y->value[i] - ref[i]) <= 1e-5f);
    }
}

TEST_CASE("conv2d rejects mismatched shapes") {
    Rng rng(2);
    auto g = geom(1, 3, 4, 2, 3, 1, 1);
    auto x = make_leaf<float>(randu<float>(Shape{1, 2, 4, 4}, rng)); // wrong channels
    auto w = make_leaf<float>(randu<float>(Shape{2, 3, 3, 3}, rng));
    CHECK_THROWS_AS(ops::conv2d(x, w, nullptr, g), shape_error);
}

TEST_CASE("batchnorm identity in eval mode") {
    Rng rng(3);
    auto x = make_leaf<float>(randu<float>(Shape{2, 3, 4, 4}, rng));
    auto gamma = make_leaf<float>(Tensor<float>(Shape{3}, 1.f));
    auto beta = make_leaf<float>(Tensor<float>(Shape{3}, 0.f));
    Tensor<float> rm(Shape{3}, 0.f), rv(Shape{3}, 1.f);
    auto y = ops::batchnorm2d(x, gamma, beta, &rm, &rv, 0.0, 0.1, false);
    for (int64_t i = 0; i < y->value.numel(); ++i)
        CHECK(y->value[i] == doctest::Approx(x->value[i]).epsilon(1e-6));
}

TEST_CASE("batchnorm constant channel gives beta in train mode") {
    auto x = make_leaf<float>(Tensor<float>(Shape{2, 1, 3, 3}, 4.2f));
    auto gamma = make_leaf<float>(Tensor<float>(Shape{1}, 1.f));
    auto beta = make_leaf<float>(Tensor<float>(Shape{1}, 0.7f));
    Tensor<float> rm(Shape{1}), rv(Shape{1}, 1.f);
    auto y = ops::batchnorm2d(x, gamma, beta, &rm, &rv, 1e-5, 0.1, true);
    for (int64_t i = 0; i < y->value.numel(); ++i)
        CHECK(y->value[i] == doctest::Approx(0.7f).epsilon(1e-5));
}

TEST_CASE("batchnorm train mode matches the direct statistics oracle") {
    Rng rng(17);
    auto x = make_leaf<float>(randu<float>(Shape{4, 3, 5, 5}, rng, -2.0, 2.0));
    auto gamma = make_leaf<float>(randu<float>(Shape{3}, rng, 0.5, 1.5));
    auto beta = make_leaf<float>(randu<float>(Shape{3}, rng));
    Tensor<float> rm(Shape{3}), rv(Shape{3}, 1.f);
    const double eps = 1e-5;
    auto y = ops::batchnorm2d(x, gamma, beta, &rm, &rv, eps, 0.1, true);

    std::vector<double> mean, var;
    oracle::batch_stats(x->value, mean, var);
    const int64_t plane = 25;
    for (int64_t n = 0; n < 4; ++n)
        for (int64_t c = 0; c < 3; ++c)
            for (int64_t i = 0; i < plane; ++i) {
                const double xh = (double(x->value[(n * 3 + c) * plane + i]) - mean[size_t(c)]) /
                                  std::sqrt(var[size_t(c)] + eps);
                const double want = double(gamma->value[c]) * xh + double(beta->value[c]);
                CHECK(std::abs(double(y->value[(n * 3 + c) * plane + i]) - want) <= 1e-5);
            }
}

TEST_CASE("batchnorm rejects non-positive variance plus eps") {
    auto x = make_leaf<float>(Tensor<float>(Shape{1, 1, 2, 2}, 1.f));
    auto gamma = make_leaf<float>(Tensor<float>(Shape{1}, 1.f));
    auto beta = make_leaf<float>(Tensor<float>(Shape{1}, 0.f));
    Tensor<float> rm(Shape{1}), rv(Shape{1}, -1.f);
    CHECK_THROWS_AS(ops::batchnorm2d(x, gamma, beta, &rm, &rv, 0.0, 0.1, false), numeric_error);
}

TEST_CASE("backward: sum gives ones, sum of squares gives 2x") {
    auto x = make_leaf<float>(Tensor<float>(Shape{2}, {1.f, 2.f}), true, "x");
    auto loss = ops::sum(x);
    backward(loss);
    CHECK(x->grad[0] == 1.f);
    CHECK(x->grad[1] == 1.f);

    auto x2 = make_leaf<float>(Tensor<float>(Shape{2}, {1.f, 2.f}), true, "x2");
    auto loss2 = ops::sum(ops::mul(x2, x2));
    backward(loss2);
    CHECK(x2->grad[0] == doctest::Approx(2.f));
    CHECK(x2->grad[1] == doctest::Approx(4.f));
}

TEST_CASE("backward requires a scalar loss; diamond graphs accumulate once per path") {
    auto x = make_leaf<float>(Tensor<float>(Shape{3}, 1.f), true, "x");
    CHECK_THROWS(backward(ops::mul(x, x)));

    auto s = ops::add(x, x);
    auto loss = ops::sum(s);
    backward(loss);
    for (int i = 0; i < 3; ++i) CHECK(x->grad[i] == doctest::Approx(2.f));
}

TEST_CASE("backward detects cycles") {
    auto x = make_leaf<float>(Tensor<float>(Shape{1}, 1.f), true, "x");
    auto y = ops::sum(x);
    y->parents.push_back(y); // deliberately corrupt the graph
    CHECK_THROWS_WITH_AS(backward(y), doctest::Contains("cycle"), std::runtime_error);
}

TEST_CASE("composite conv+bn+relu gradients match finite differences (f64)") {
    Rng rng(23);
    auto g = geom(2, 2, 6, 3, 3, 1, 1);
    Tensor<double> x0 = randu<double>(Shape{g.n, g.c_in, g.h, g.w}, rng);
    Tensor<double> w0 = randu<double>(Shape{g.c_out, g.c_in, g.k, g.k}, rng, -0.5, 0.5);
    Tensor<double> g0 = randu<double>(Shape{g.c_out}, rng, 0.5, 1.5);
    Tensor<double> b0 = randu<double>(Shape{g.c_out}, rng, -0.2, 0.2);

    NodePtr<double> xn, wn, gn, bn;
    auto run = [&](bool want_grads) {
        auto x = make_leaf<double>(Tensor<double>(x0), want_grads, "x");
        auto w = make_leaf<double>(Tensor<double>(w0), want_grads, "w");
        auto gm = make_leaf<double>(Tensor<double>(g0), want_grads, "gamma");
        auto bt = make_leaf<double>(Tensor<double>(b0), want_grads, "beta");
        Tensor<double> rm(Shape{g.c_out}), rv(Shape{g.c_out}, 1.0);
        auto y = ops::relu(ops::batchnorm2d(ops::conv2d(x, w, nullptr, g), gm, bt, &rm, &rv,
                                            1e-5, 0.1, true));
        auto loss = ops::sum(ops::mul(y, y));
        if (want_grads) {
            backward(loss);
            xn = x;
            wn = w;
            gn = gm;
            bn = bt;
        }
        return double(loss->value[0]);
    };
    run(true);

    Rng pick(31);
    auto check_param = [&](Tensor<double>& host, const NodePtr<double>& node, int samples) {
        for (int s = 0; s < samples; ++s) {
            const int64_t i = int64_t(pick.below(uint64_t(host.numel())));
            const double keep = host[i];
            const double h = 1e-4;
            host[i] = keep + h;
            const double lp = run(false);
            host[i] = keep - h;
            const double lm = run(false);
            host[i] = keep;
            const double fd = (lp - lm) / (2 * h);
            const double an = node->grad[i];
            const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
            CHECK(std::abs(fd - an) / denom <= 1e-4);
        }
    };
    check_param(x0, xn, 8);
    check_param(w0, wn, 8);
    check_param(g0, gn, 3);
    check_param(b0, bn, 3);
}

TEST_CASE("forward and backward determinism under a fixed seed") {
    auto once = [](uint64_t seed) {
        Rng rng(seed);
        auto g = geom(2, 3, 8, 4, 3, 1, 1);
        auto x = make_leaf<float>(randu<float>(Shape{g.n, g.c_in, g.h, g.w}, rng));
        auto w = make_leaf<float>(randu<float>(Shape{g.c_out, g.c_in, g.k, g.k}, rng), true, "w");
        auto y = ops::conv2d(x, w, nullptr, g);
        auto loss = ops::sum(ops::mul(y, y));
        backward(loss);
        return std::make_pair(y->value.vec(), w->grad.vec());
    };
    auto [v1, g1] = once(99);
    auto [v2, g2] = once(99);
    CHECK(v1 == v2);
    CHECK(g1 == g2);
}

TEST_CASE("non-finite values are a hard error") {
    auto x = make_leaf<float>(Tensor<float>(Shape{2}, {1.f, 0.f}), false, "x");
    x->value[1] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(ops::relu(x), numeric_error);
}
