#pragma once

#include "lut/kernels/geometry.hpp"
#include "lut/quantize.hpp"

#include <cstdint>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

// Forward kernels for the lookup layer. Responses accumulate in double with
// the patch traversed in (c_in, ky, kx) order and the re-scaling factor
// applied inside every term: acc += m * (T_f[i] * T_w[j]). Padded patch slots
// look up feature cell 0 (T_f[0] = 0, so separable tables add an exact 0).
// `rsum`, when non-null, receives the un-rescaled response sum per output,
// which the backward pass needs for the scale-parameter gradients.
namespace lut::kernels {

// se­parable table: response = tf_val(input element) * tw_val(kernel element),
// with value maps already gathered. Padding contributes tf = 0.
template <class S>
void lookup_sep_forward_ref(const Conv2dGeom& g, const S* tf_val, const S* tw_val, const S* bias,
                            double m, S* out, double* rsum) {
    const int64_t ho = g.h_out(), wo = g.w_out();
    for (int64_t n = 0; n < g.n; ++n)
        for (int64_t co = 0; co < g.c_out; ++co)
            for (int64_t oh = 0; oh < ho; ++oh)
                for (int64_t ow = 0; ow < wo; ++ow) {
                    double acc = 0.0, racc = 0.0;
                    for (int64_t ci = 0; ci < g.c_in; ++ci) {
                        const S* f_c = tf_val + (n * g.c_in + ci) * g.h * g.w;
                        const S* w_c = tw_val + ((co * g.c_in + ci) * g.k) * g.k;
                        for (int64_t ky = 0; ky < g.k; ++ky) {
                            const int64_t ih = oh * g.stride - g.pad + ky * g.dil;
                            if (ih < 0 || ih >= g.h) continue;
                            for (int64_t kx = 0; kx < g.k; ++kx) {
                                const int64_t iw = ow * g.stride - g.pad + kx * g.dil;
                                if (iw < 0 || iw >= g.w) continue;
                                const double r = static_cast<double>(f_c[ih * g.w + iw]) *
                                                 static_cast<double>(w_c[ky * g.k + kx]);
                                acc += m * r;
                                racc += r;
                            }
                        }
                    }
                    const int64_t o = ((n * g.c_out + co) * ho + oh) * wo + ow;
                    out[o] = static_cast<S>(bias ? acc + static_cast<double>(bias[co]) : acc);
                    if (rsum) rsum[o] = racc;
                }
}

template <class S>
void lookup_sep_forward_omp(const Conv2dGeom& g, const S* tf_val, const S* tw_val, const S* bias,
                            double m, S* out, double* rsum) {
    const int64_t ho = g.h_out(), wo = g.w_out();
    const int64_t rows = g.n * g.c_out * ho;
#pragma omp parallel for schedule(static)
    for (int64_t row = 0; row < rows; ++row) {
        const int64_t n = row / (g.c_out * ho);
        const int64_t co = (row / ho) % g.c_out;
        const int64_t oh = row % ho;
        for (int64_t ow = 0; ow < wo; ++ow) {
            double acc = 0.0, racc = 0.0;
            for (int64_t ci = 0; ci < g.c_in; ++ci) {
                const S* f_c = tf_val + (n * g.c_in + ci) * g.h * g.w;
                const S* w_c = tw_val + ((co * g.c_in + ci) * g.k) * g.k;
                for (int64_t ky = 0; ky < g.k; ++ky) {
                    const int64_t ih = oh * g.stride - g.pad + ky * g.dil;
                    if (ih < 0 || ih >= g.h) continue;
                    for (int64_t kx = 0; kx < g.k; ++kx) {
                        const int64_t iw = ow * g.stride - g.pad + kx * g.dil;
                        if (iw < 0 || iw >= g.w) continue;
                        const double r = static_cast<double>(f_c[ih * g.w + iw]) *
                                         static_cast<double>(w_c[ky * g.k + kx]);
                        acc += m * r;
                        racc += r;
                    }
                }
            }
            const int64_t o = row * wo + ow;
            out[o] = static_cast<S>(bias ? acc + static_cast<double>(bias[co]) : acc);
            if (rsum) rsum[o] = racc;
        }
    }
}

template <class S>
void lookup_sep_forward(const Conv2dGeom& g, const S* tf_val, const S* tw_val, const S* bias,
                        double m, S* out, double* rsum) {
    if (use_parallel_kernels())
        lookup_sep_forward_omp(g, tf_val, tw_val, bias, m, out, rsum);
    else
        lookup_sep_forward_ref(g, tf_val, tw_val, bias, m, out, rsum);
}

// independent (non-separable) table: response = t2d[idx_f * nw + idx_w].
// idx_f covers real input elements; padded slots read row 0.
template <class S>
void lookup_2d_forward_ref(const Conv2dGeom& g, const uint16_t* idx_f, const uint16_t* idx_w,
                           const S* t2d, int64_t nw, const S* bias, double m, S* out,
                           double* rsum) {
    const int64_t ho = g.h_out(), wo = g.w_out();
    for (int64_t n = 0; n < g.n; ++n)
        for (int64_t co = 0; co < g.c_out; ++co)
            for (int64_t oh = 0; oh < ho; ++oh)
                for (int64_t ow = 0; ow < wo; ++ow) {
                    double acc = 0.0, racc = 0.0;
                    for (int64_t ci = 0; ci < g.c_in; ++ci) {
                        const uint16_t* f_c = idx_f + (n * g.c_in + ci) * g.h * g.w;
                        const uint16_t* w_c = idx_w + ((co * g.c_in + ci) * g.k) * g.k;
                        for (int64_t ky = 0; ky < g.k; ++ky) {
                            const int64_t ih = oh * g.stride - g.pad + ky * g.dil;
                            const bool row_pad = ih < 0 || ih >= g.h;
                            for (int64_t kx = 0; kx < g.k; ++kx) {
                                const int64_t iw = ow * g.stride - g.pad + kx * g.dil;
                                const bool pad = row_pad || iw < 0 || iw >= g.w;
                                const int64_t fi = pad ? 0 : f_c[ih * g.w + iw];
                                const double r =
                                    static_cast<double>(t2d[fi * nw + w_c[ky * g.k + kx]]);
                                acc += m * r;
                                racc += r;
                            }
                        }
                    }
                    const int64_t o = ((n * g.c_out + co) * ho + oh) * wo + ow;
                    out[o] = static_cast<S>(bias ? acc + static_cast<double>(bias[co]) : acc);
                    if (rsum) rsum[o] = racc;
                }
}

template <class S>
void lookup_2d_forward_omp(const Conv2dGeom& g, const uint16_t* idx_f, const uint16_t* idx_w,
                           const S* t2d, int64_t nw, const S* bias, double m, S* out,
                           double* rsum) {
    const int64_t ho = g.h_out(), wo = g.w_out();
    const int64_t rows = g.n * g.c_out * ho;
#pragma omp parallel for schedule(static)
    for (int64_t row = 0; row < rows; ++row) {
        const int64_t n = row / (g.c_out * ho);
        const int64_t co = (row / ho) % g.c_out;
        const int64_t oh = row % ho;
        for (int64_t ow = 0; ow < wo; ++ow) {
            double acc = 0.0, racc = 0.0;
            for (int64_t ci = 0; ci < g.c_in; ++ci) {
                const uint16_t* f_c = idx_f + (n * g.c_in + ci) * g.h * g.w;
                const uint16_t* w_c = idx_w + ((co * g.c_in + ci) * g.k) * g.k;
                for (int64_t ky = 0; ky < g.k; ++ky) {
                    const int64_t ih = oh * g.stride - g.pad + ky * g.dil;
                    const bool row_pad = ih < 0 || ih >= g.h;
                    for (int64_t kx = 0; kx < g.k; ++kx) {
                        const int64_t iw = ow * g.stride - g.pad + kx * g.dil;
                        const bool pad = row_pad || iw < 0 || iw >= g.w;
                        const int64_t fi = pad ? 0 : f_c[ih * g.w + iw];
                        const double r = static_cast<double>(t2d[fi * nw + w_c[ky * g.k + kx]]);
                        acc += m * r;
                        racc += r;
                    }
                }
            }
            const int64_t o = row * wo + ow;
            out[o] = static_cast<S>(bias ? acc + static_cast<double>(bias[co]) : acc);
            if (rsum) rsum[o] = racc;
        }
    }
}

template <class S>
void lookup_2d_forward(const Conv2dGeom& g, const uint16_t* idx_f, const uint16_t* idx_w,
                       const S* t2d, int64_t nw, const S* bias, double m, S* out, double* rsum) {
    if (use_parallel_kernels())
        lookup_2d_forward_omp(g, idx_f, idx_w, t2d, nw, bias, m, out, rsum);
    else
        lookup_2d_forward_ref(g, idx_f, idx_w, t2d, nw, bias, m, out, rsum);
}

// Number of patch slots that read input position (h, w), identical for every
// batch item and input channel. Used to reproduce per-lookup hit counts
// without walking the full loop nest.
inline std::vector<int64_t> usage_map(const Conv2dGeom& g) {
    std::vector<int64_t> usage(static_cast<size_t>(g.h * g.w), 0);
    const int64_t ho = g.h_out(), wo = g.w_out();
    for (int64_t ky = 0; ky < g.k; ++ky)
        for (int64_t oh = 0; oh < ho; ++oh) {
            const int64_t ih = oh * g.stride - g.pad + ky * g.dil;
            if (ih < 0 || ih >= g.h) continue;
            for (int64_t kx = 0; kx < g.k; ++kx)
                for (int64_t ow = 0; ow < wo; ++ow) {
                    const int64_t iw = ow * g.stride - g.pad + kx * g.dil;
                    if (iw < 0 || iw >= g.w) continue;
                    ++usage[static_cast<size_t>(ih * g.w + iw)];
                }
        }
    return usage;
}

} // namespace lut::kernels
