#pragma once

#include "lut/kernels/geometry.hpp"

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

// Cross-correlation kernels, each in two forms: a plain serial reference and
// an OpenMP version parallelized over disjoint output elements. Both
// accumulate in double with the patch traversed in (c_in, ky, kx) order, so
// results are bit-identical to each other for any thread count.
//
// The per-term multiplier `m` is applied inside each product,
// acc += m * (in * wgt); real convolution passes m = 1. The lookup layer
// reuses these kernels on its table-value maps with m = s_w * s_f, and with
// wgt == nullptr (terms of 1) to spread upstream gradients.
namespace lut::kernels {

template <class S>
void conv2d_forward_ref(const Conv2dGeom& g, const S* in, const S* wgt, const S* bias, S* out,
                        double m = 1.0) {
    const int64_t ho = g.h_out(), wo = g.w_out();
    for (int64_t n = 0; n < g.n; ++n)
        for (int64_t co = 0; co < g.c_out; ++co)
            for (int64_t oh = 0; oh < ho; ++oh)
                for (int64_t ow = 0; ow < wo; ++ow) {
                    double acc = 0.0;
                    for (int64_t ci = 0; ci < g.c_in; ++ci) {
                        const S* in_c = in + (n * g.c_in + ci) * g.h * g.w;
                        const S* w_c = wgt + ((co * g.c_in + ci) * g.k) * g.k;
                        for (int64_t ky = 0; ky < g.k; ++ky) {
                            const int64_t ih = oh * g.stride - g.pad + ky * g.dil;
                            if (ih < 0 || ih >= g.h) continue;
                            for (int64_t kx = 0; kx < g.k; ++kx) {
                                const int64_t iw = ow * g.stride - g.pad + kx * g.dil;
                                if (iw < 0 || iw >= g.w) continue;
                                acc += m * (static_cast<double>(in_c[ih * g.w + iw]) *
                                            static_cast<double>(w_c[ky * g.k + kx]));
                            }
                        }
                    }
                    if (bias) acc += static_cast<double>(bias[co]);
                    out[((n * g.c_out + co) * ho + oh) * wo + ow] = static_cast<S>(acc);
                }
}

template <class S>
void conv2d_forward_omp(const Conv2dGeom& g, const S* in, const S* wgt, const S* bias, S* out,
                        double m = 1.0) {
    const int64_t ho = g.h_out(), wo = g.w_out();
    const int64_t rows = g.n * g.c_out * ho;
#pragma omp parallel for schedule(static)
    for (int64_t row = 0; row < rows; ++row) {
        const int64_t n = row / (g.c_out * ho);
        const int64_t co = (row / ho) % g.c_out;
        const int64_t oh = row % ho;
        for (int64_t ow = 0; ow < wo; ++ow) {
            double acc = 0.0;
            for (int64_t ci = 0; ci < g.c_in; ++ci) {
                const S* in_c = in + (n * g.c_in + ci) * g.h * g.w;
                const S* w_c = wgt + ((co * g.c_in + ci) * g.k) * g.k;
                for (int64_t ky = 0; ky < g.k; ++ky) {
                    const int64_t ih = oh * g.stride - g.pad + ky * g.dil;
                    if (ih < 0 || ih >= g.h) continue;
                    for (int64_t kx = 0; kx < g.k; ++kx) {
                        const int64_t iw = ow * g.stride - g.pad + kx * g.dil;
                        if (iw < 0 || iw >= g.w) continue;
                        acc += m * (static_cast<double>(in_c[ih * g.w + iw]) *
                                    static_cast<double>(w_c[ky * g.k + kx]));
                    }
                }
            }
            if (bias) acc += static_cast<double>(bias[co]);
            out[(row * wo) + ow] = static_cast<S>(acc);
        }
    }
}

// Gradient w.r.t. the input, written as a gather per input element so the
// parallel version writes disjoint locations. wgt == nullptr treats every
// kernel value as 1.
template <class S>
void conv2d_input_grad_ref(const Conv2dGeom& g, const S* gout, const S* wgt, S* gin,
                           double m = 1.0) {
    const int64_t ho = g.h_out(), wo = g.w_out();
    for (int64_t n = 0; n < g.n; ++n)
        for (int64_t ci = 0; ci < g.c_in; ++ci)
            for (int64_t ih = 0; ih < g.h; ++ih)
                for (int64_t iw = 0; iw < g.w; ++iw) {
                    double acc = 0.0;
                    for (int64_t co = 0; co < g.c_out; ++co) {
                        const S* go_c = gout + (n * g.c_out + co) * ho * wo;
                        const S* w_c = wgt ? wgt + ((co * g.c_in + ci) * g.k) * g.k : nullptr;
                        for (int64_t ky = 0; ky < g.k; ++ky) {
                            const int64_t num_h = ih + g.pad - ky * g.dil;
                            if (num_h < 0 || num_h % g.stride) continue;
                            const int64_t oh = num_h / g.stride;
                            if (oh >= ho) continue;
                            for (int64_t kx = 0; kx < g.k; ++kx) {
                                const int64_t num_w = iw + g.pad - kx * g.dil;
                                if (num_w < 0 || num_w % g.stride) continue;
                                const int64_t ow = num_w / g.stride;
                                if (ow >= wo) continue;
                                const double wv =
                                    w_c ? static_cast<double>(w_c[ky * g.k + kx]) : 1.0;
                                acc += m * (static_cast<double>(go_c[oh * wo + ow]) * wv);
                            }
                        }
                    }
                    gin[((n * g.c_in + ci) * g.h + ih) * g.w + iw] = static_cast<S>(acc);
                }
}

template <class S>
void conv2d_input_grad_omp(const Conv2dGeom& g, const S* gout, const S* wgt, S* gin,
                           double m = 1.0) {
    const int64_t ho = g.h_out(), wo = g.w_out();
    const int64_t rows = g.n * g.c_in * g.h;
#pragma omp parallel for schedule(static)
    for (int64_t row = 0; row < rows; ++row) {
        const int64_t n = row / (g.c_in * g.h);
        const int64_t ci = (row / g.h) % g.c_in;
        const int64_t ih = row % g.h;
        for (int64_t iw = 0; iw < g.w; ++iw) {
            double acc = 0.0;
            for (int64_t co = 0; co < g.c_out; ++co) {
                const S* go_c = gout + (n * g.c_out + co) * ho * wo;
                const S* w_c = wgt ? wgt + ((co * g.c_in + ci) * g.k) * g.k : nullptr;
                for (int64_t ky = 0; ky < g.k; ++ky) {
                    const int64_t num_h = ih + g.pad - ky * g.dil;
                    if (num_h < 0 || num_h % g.stride) continue;
                    const int64_t oh = num_h / g.stride;
                    if (oh >= ho) continue;
                    for (int64_t kx = 0; kx < g.k; ++kx) {
                        const int64_t num_w = iw + g.pad - kx * g.dil;
                        if (num_w < 0 || num_w % g.stride) continue;
                        const int64_t ow = num_w / g.stride;
                        if (ow >= wo) continue;
                        const double wv = w_c ? static_cast<double>(w_c[ky * g.k + kx]) : 1.0;
                        acc += m * (static_cast<double>(go_c[oh * wo + ow]) * wv);
                    }
                }
            }
            gin[row * g.w + iw] = static_cast<S>(acc);
        }
    }
}

// Gradient w.r.t. the kernel, one gather per kernel element. in == nullptr
// treats every (in-bounds) input value as 1; out-of-bounds (padding) always
// contributes 0.
template <class S>
void conv2d_weight_grad_ref(const Conv2dGeom& g, const S* gout, const S* in, S* gw,
                            double m = 1.0) {
    const int64_t ho = g.h_out(), wo = g.w_out();
    for (int64_t co = 0; co < g.c_out; ++co)
        for (int64_t ci = 0; ci < g.c_in; ++ci)
            for (int64_t ky = 0; ky < g.k; ++ky)
                for (int64_t kx = 0; kx < g.k; ++kx) {
                    double acc = 0.0;
                    for (int64_t n = 0; n < g.n; ++n) {
                        const S* go_c = gout + (n * g.c_out + co) * ho * wo;
                        const S* in_c = in ? in + (n * g.c_in + ci) * g.h * g.w : nullptr;
                        for (int64_t oh = 0; oh < ho; ++oh) {
                            const int64_t ih = oh * g.stride - g.pad + ky * g.dil;
                            if (ih < 0 || ih >= g.h) continue;
                            for (int64_t ow = 0; ow < wo; ++ow) {
                                const int64_t iw = ow * g.stride - g.pad + kx * g.dil;
                                if (iw < 0 || iw >= g.w) continue;
                                const double iv =
                                    in_c ? static_cast<double>(in_c[ih * g.w + iw]) : 1.0;
                                acc += m * (static_cast<double>(go_c[oh * wo + ow]) * iv);
                            }
                        }
                    }
                    gw[((co * g.c_in + ci) * g.k + ky) * g.k + kx] = static_cast<S>(acc);
                }
}

template <class S>
void conv2d_weight_grad_omp(const Conv2dGeom& g, const S* gout, const S* in, S* gw,
                            double m = 1.0) {
    const int64_t ho = g.h_out(), wo = g.w_out();
    const int64_t elems = g.wgt_numel();
#pragma omp parallel for schedule(static)
    for (int64_t e = 0; e < elems; ++e) {
        const int64_t co = e / (g.c_in * g.k * g.k);
        const int64_t ci = (e / (g.k * g.k)) % g.c_in;
        const int64_t ky = (e / g.k) % g.k;
        const int64_t kx = e % g.k;
        double acc = 0.0;
        for (int64_t n = 0; n < g.n; ++n) {
            const S* go_c = gout + (n * g.c_out + co) * ho * wo;
            const S* in_c = in ? in + (n * g.c_in + ci) * g.h * g.w : nullptr;
            for (int64_t oh = 0; oh < ho; ++oh) {
                const int64_t ih = oh * g.stride - g.pad + ky * g.dil;
                if (ih < 0 || ih >= g.h) continue;
                for (int64_t ow = 0; ow < wo; ++ow) {
                    const int64_t iw = ow * g.stride - g.pad + kx * g.dil;
                    if (iw < 0 || iw >= g.w) continue;
                    const double iv = in_c ? static_cast<double>(in_c[ih * g.w + iw]) : 1.0;
                    acc += m * (static_cast<double>(go_c[oh * wo + ow]) * iv);
                }
            }
        }
        gw[e] = static_cast<S>(acc);
    }
}

template <class S>
void conv2d_bias_grad(const Conv2dGeom& g, const S* gout, S* gb) {
    const int64_t plane = g.h_out() * g.w_out();
    for (int64_t co = 0; co < g.c_out; ++co) {
        double acc = 0.0;
        for (int64_t n = 0; n < g.n; ++n) {
            const S* go_c = gout + (n * g.c_out + co) * plane;
            for (int64_t i = 0; i < plane; ++i) acc += static_cast<double>(go_c[i]);
        }
        gb[co] = static_cast<S>(acc);
    }
}

// Runtime switch between the serial reference and the OpenMP kernels.
// Defaults to parallel when built with OpenMP.
inline bool& use_parallel_kernels() {
#ifdef _OPENMP
    static bool on = true;
#else
    static bool on = false;
#endif
    return on;
}

template <class S>
void conv2d_forward(const Conv2dGeom& g, const S* in, const S* wgt, const S* bias, S* out,
                    double m = 1.0) {
    if (use_parallel_kernels())
        conv2d_forward_omp(g, in, wgt, bias, out, m);
    else
        conv2d_forward_ref(g, in, wgt, bias, out, m);
}

template <class S>
void conv2d_input_grad(const Conv2dGeom& g, const S* gout, const S* wgt, S* gin, double m = 1.0) {
    if (use_parallel_kernels())
        conv2d_input_grad_omp(g, gout, wgt, gin, m);
    else
        conv2d_input_grad_ref(g, gout, wgt, gin, m);
}

template <class S>
void conv2d_weight_grad(const Conv2dGeom& g, const S* gout, const S* in, S* gw, double m = 1.0) {
    if (use_parallel_kernels())
        conv2d_weight_grad_omp(g, gout, in, gw, m);
    else
        conv2d_weight_grad_ref(g, gout, in, gw, m);
}

} // namespace lut::kernels
