#include "lut/kernels/conv.hpp"
#include "lut/kernels/lookup.hpp"
#include "lut/rng.hpp"
#include "lut/tensor.hpp"

#include <benchmark/benchmark.h>

#include <vector>

// Serial reference vs OpenMP kernels on a mid-sized layer. Both variants are
// bit-identical by construction; this target measures the speed difference.
namespace {

using lut::kernels::Conv2dGeom;

Conv2dGeom bench_geom() {
    Conv2dGeom g{};
    g.n = 8;
    g.c_in = 32;
    g.h = g.w = 16;
    g.c_out = 64;
    g.k = 3;
    g.stride = 1;
    g.pad = 1;
    return g;
}

struct BenchData {
    Conv2dGeom g = bench_geom();
    std::vector<float> in, wgt, bias, out, gout, gin, gw;
    std::vector<double> rsum;

    BenchData() {
        lut::Rng rng(7);
        in.resize(static_cast<size_t>(g.in_numel()));
        wgt.resize(static_cast<size_t>(g.wgt_numel()));
        bias.resize(static_cast<size_t>(g.c_out));
        out.resize(static_cast<size_t>(g.out_numel()));
        gout.resize(static_cast<size_t>(g.out_numel()));
        gin.resize(static_cast<size_t>(g.in_numel()));
        gw.resize(static_cast<size_t>(g.wgt_numel()));
        rsum.resize(static_cast<size_t>(g.out_numel()));
        for (auto& v : in) v = static_cast<float>(rng.uniform());
        for (auto& v : wgt) v = static_cast<float>(rng.normal(0.0, 0.2));
        for (auto& v : gout) v = static_cast<float>(rng.normal());
    }
};

BenchData& data() {
    static BenchData d;
    return d;
}

void conv_forward_serial(benchmark::State& state) {
    auto& d = data();
    for (auto _ : state) {
        lut::kernels::conv2d_forward_ref(d.g, d.in.data(), d.wgt.data(), d.bias.data(),
                                         d.out.data());
        benchmark::ClobberMemory();
    }
}

void conv_forward_omp(benchmark::State& state) {
    auto& d = data();
    for (auto _ : state) {
        lut::kernels::conv2d_forward_omp(d.g, d.in.data(), d.wgt.data(), d.bias.data(),
                                         d.out.data());
        benchmark::ClobberMemory();
    }
}

void conv_input_grad_serial(benchmark::State& state) {
    auto& d = data();
    for (auto _ : state) {
        lut::kernels::conv2d_input_grad_ref(d.g, d.gout.data(), d.wgt.data(), d.gin.data());
        benchmark::ClobberMemory();
    }
}

void conv_input_grad_omp(benchmark::State& state) {
    auto& d = data();
    for (auto _ : state) {
        lut::kernels::conv2d_input_grad_omp(d.g, d.gout.data(), d.wgt.data(), d.gin.data());
        benchmark::ClobberMemory();
    }
}

void conv_weight_grad_serial(benchmark::State& state) {
    auto& d = data();
    for (auto _ : state) {
        lut::kernels::conv2d_weight_grad_ref(d.g, d.gout.data(), d.in.data(), d.gw.data());
        benchmark::ClobberMemory();
    }
}

void conv_weight_grad_omp(benchmark::State& state) {
    auto& d = data();
    for (auto _ : state) {
        lut::kernels::conv2d_weight_grad_omp(d.g, d.gout.data(), d.in.data(), d.gw.data());
        benchmark::ClobberMemory();
    }
}

void lookup_forward_serial(benchmark::State& state) {
    auto& d = data();
    for (auto _ : state) {
        lut::kernels::lookup_sep_forward_ref(d.g, d.in.data(), d.wgt.data(), d.bias.data(), 1.5,
                                             d.out.data(), d.rsum.data());
        benchmark::ClobberMemory();
    }
}

void lookup_forward_omp(benchmark::State& state) {
    auto& d = data();
    for (auto _ : state) {
        lut::kernels::lookup_sep_forward_omp(d.g, d.in.data(), d.wgt.data(), d.bias.data(), 1.5,
                                             d.out.data(), d.rsum.data());
        benchmark::ClobberMemory();
    }
}

} // namespace

BENCHMARK(conv_forward_serial);
BENCHMARK(conv_forward_omp);
BENCHMARK(conv_input_grad_serial);
BENCHMARK(conv_input_grad_omp);
BENCHMARK(conv_weight_grad_serial);
BENCHMARK(conv_weight_grad_omp);
BENCHMARK(lookup_forward_serial);
BENCHMARK(lookup_forward_omp);

int main(int argc, char** argv) {
    lut::finite_checks_enabled() = false;
    benchmark::Initialize(&argc, argv);
    benchmark::RunSpecifiedBenchmarks();
    return 0;
}
