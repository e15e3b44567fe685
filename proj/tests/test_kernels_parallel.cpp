#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lut/kernels/conv.hpp"
#include "lut/kernels/lookup.hpp"
#include "lut/rng.hpp"

#include <vector>

// The OpenMP kernels parallelize over disjoint outputs with the per-output
// accumulation order unchanged, so they must be bit-identical to the serial
// reference for any geometry and thread count.

using lut::Rng;
using namespace lut::kernels;

namespace {

Conv2dGeom random_geom(Rng& rng) {
    Conv2dGeom g{};
    g.n = 1 + int64_t(rng.below(3));
    g.c_in = 1 + int64_t(rng.below(4));
    g.c_out = 1 + int64_t(rng.below(5));
    g.k = 1 + int64_t(rng.below(3));
    g.stride = 1 + int64_t(rng.below(2));
    g.pad = int64_t(rng.below(2));
    g.dil = 1 + int64_t(rng.below(2));
    const int64_t min_hw = g.k_eff() > 4 ? g.k_eff() : 4;
    g.h = min_hw + int64_t(rng.below(6));
    g.w = min_hw + int64_t(rng.below(6));
    return g;
}

std::vector<float> randv(int64_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<float> v(size_t(n));
    for (auto& x : v) x = float(rng.uniform(lo, hi));
    return v;
}

} // namespace

TEST_CASE("conv kernels: omp output is bit-identical to the serial reference") {
    Rng rng(41);
    for (int rep = 0; rep < 25; ++rep) {
        const Conv2dGeom g = random_geom(rng);
        const auto in = randv(g.in_numel(), rng);
        const auto wgt = randv(g.wgt_numel(), rng);
        const auto bias = randv(g.c_out, rng);
        const auto gout = randv(g.out_numel(), rng);

        std::vector<float> a(size_t(g.out_numel())), b(size_t(g.out_numel()));
        conv2d_forward_ref(g, in.data(), wgt.data(), bias.data(), a.data());
        conv2d_forward_omp(g, in.data(), wgt.data(), bias.data(), b.data());
        CHECK(a == b);

        std::vector<float> gi1(size_t(g.in_numel())), gi2(size_t(g.in_numel()));
        conv2d_input_grad_ref(g, gout.data(), wgt.data(), gi1.data());
        conv2d_input_grad_omp(g, gout.data(), wgt.data(), gi2.data());
        CHECK(gi1 == gi2);

        // all-ones kernel variant used by the lookup layer's gradient spread
        conv2d_input_grad_ref<float>(g, gout.data(), nullptr, gi1.data());
        conv2d_input_grad_omp<float>(g, gout.data(), nullptr, gi2.data());
        CHECK(gi1 == gi2);

        std::vector<float> gw1(size_t(g.wgt_numel())), gw2(size_t(g.wgt_numel()));
        conv2d_weight_grad_ref(g, gout.data(), in.data(), gw1.data());
        conv2d_weight_grad_omp(g, gout.data(), in.data(), gw2.data());
        CHECK(gw1 == gw2);
    }
}

TEST_CASE("lookup forward kernels: omp vs serial, values and response sums") {
    Rng rng(43);
    for (int rep = 0; rep < 25; ++rep) {
        const Conv2dGeom g = random_geom(rng);
        const auto tf_val = randv(g.in_numel(), rng, 0.0, 1.0);
        const auto tw_val = randv(g.wgt_numel(), rng);
        const auto bias = randv(g.c_out, rng);
        const double m = rng.uniform(0.1, 4.0);

        std::vector<float> a(size_t(g.out_numel())), b(size_t(g.out_numel()));
        std::vector<double> ra(size_t(g.out_numel())), rb(size_t(g.out_numel()));
        lookup_sep_forward_ref(g, tf_val.data(), tw_val.data(), bias.data(), m, a.data(),
                               ra.data());
        lookup_sep_forward_omp(g, tf_val.data(), tw_val.data(), bias.data(), m, b.data(),
                               rb.data());
        CHECK(a == b);
        CHECK(ra == rb);
    }
}

TEST_CASE("lookup 2d-table kernels: omp vs serial") {
    Rng rng(47);
    for (int rep = 0; rep < 15; ++rep) {
        const Conv2dGeom g = random_geom(rng);
        const int64_t nf = 9, nw = 9;
        std::vector<uint16_t> idx_f(size_t(g.in_numel())), idx_w(size_t(g.wgt_numel()));
        for (auto& v : idx_f) v = uint16_t(rng.below(nf));
        for (auto& v : idx_w) v = uint16_t(rng.below(nw));
        const auto t2d = randv(nf * nw, rng);
        const auto bias = randv(g.c_out, rng);

        std::vector<float> a(size_t(g.out_numel())), b(size_t(g.out_numel()));
        std::vector<double> ra(size_t(g.out_numel())), rb(size_t(g.out_numel()));
        lookup_2d_forward_ref(g, idx_f.data(), idx_w.data(), t2d.data(), nw, bias.data(), 1.3,
                              a.data(), ra.data());
        lookup_2d_forward_omp(g, idx_f.data(), idx_w.data(), t2d.data(), nw, bias.data(), 1.3,
                              b.data(), rb.data());
        CHECK(a == b);
        CHECK(ra == rb);
    }
}

TEST_CASE("usage map counts every in-bounds patch slot exactly") {
    Rng rng(53);
    for (int rep = 0; rep < 10; ++rep) {
        const Conv2dGeom g = random_geom(rng);
        const auto usage = usage_map(g);
        // brute-force recount
        std::vector<int64_t> want(size_t(g.h * g.w), 0);
        for (int64_t oh = 0; oh < g.h_out(); ++oh)
            for (int64_t ow = 0; ow < g.w_out(); ++ow)
                for (int64_t ky = 0; ky < g.k; ++ky)
                    for (int64_t kx = 0; kx < g.k; ++kx) {
                        const int64_t ih = oh * g.stride - g.pad + ky * g.dil;
                        const int64_t iw = ow * g.stride - g.pad + kx * g.dil;
                        if (ih >= 0 && ih < g.h && iw >= 0 && iw < g.w)
                            ++want[size_t(ih * g.w + iw)];
                    }
        CHECK(usage == want);
    }
}
