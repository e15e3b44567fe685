#pragma once

// Independent oracles used by the tests. These are written directly from the
// math, deliberately sharing no code with the library kernels they check.

#include "lut/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace oracle {

struct Geom {
    int64_t n, c_in, h, w, c_out, k, stride, pad, dil;
    int64_t h_out() const { return (h + 2 * pad - (dil * (k - 1) + 1)) / stride + 1; }
    int64_t w_out() const { return (w + 2 * pad - (dil * (k - 1) + 1)) / stride + 1; }
};

// plain six-loop cross-correlation, double accumulation
template <class S>
lut::Tensor<S> naive_conv2d(const Geom& g, const lut::Tensor<S>& in, const lut::Tensor<S>& wgt,
                            const std::vector<S>& bias) {
    lut::Tensor<S> out(lut::Shape{g.n, g.c_out, g.h_out(), g.w_out()});
    for (int64_t n = 0; n < g.n; ++n)
        for (int64_t co = 0; co < g.c_out; ++co)
            for (int64_t oh = 0; oh < g.h_out(); ++oh)
                for (int64_t ow = 0; ow < g.w_out(); ++ow) {
                    double acc = 0.0;
                    for (int64_t ci = 0; ci < g.c_in; ++ci)
                        for (int64_t ky = 0; ky < g.k; ++ky)
                            for (int64_t kx = 0; kx < g.k; ++kx) {
                                const int64_t ih = oh * g.stride - g.pad + ky * g.dil;
                                const int64_t iw = ow * g.stride - g.pad + kx * g.dil;
                                if (ih < 0 || ih >= g.h || iw < 0 || iw >= g.w) continue;
                                acc += double(in[((n * g.c_in + ci) * g.h + ih) * g.w + iw]) *
                                       double(wgt[((co * g.c_in + ci) * g.k + ky) * g.k + kx]);
                            }
                    if (!bias.empty()) acc += double(bias[size_t(co)]);
                    out[((n * g.c_out + co) * g.h_out() + oh) * g.w_out() + ow] = S(acc);
                }
    return out;
}

// independent index computation: round-half-away-from-zero via llround
inline int64_t oracle_feature_index(double f, double s_f, int64_t nf) {
    double t = f * (double(nf - 1) / s_f);
    if (t < 0.0) t = 0.0;
    if (t > double(nf - 1)) t = double(nf - 1);
    return std::llround(t);
}

inline int64_t oracle_weight_index(double w, double s_w, int64_t nw) {
    double u = w * (1.0 / s_w);
    if (u < -1.0) u = -1.0;
    if (u > 1.0) u = 1.0;
    return std::llround((u + 1.0) * 0.5 * double(nw - 1));
}

// the per-element scale -> clip -> round -> table -> rescale -> sum pipeline,
// evaluated slot by slot (padded slots read feature cell 0); double
// accumulation in (c_in, ky, kx) order, bias added once at the end.
template <class S>
lut::Tensor<S> lookup_layer_oracle(const Geom& g, const lut::Tensor<S>& in,
                                   const lut::Tensor<S>& wgt, const std::vector<S>& bias,
                                   double s_w, double s_f, const std::vector<S>& tf,
                                   const std::vector<S>& tw) {
    const int64_t nf = int64_t(tf.size()), nw = int64_t(tw.size());
    const double m = s_w * s_f;
    lut::Tensor<S> out(lut::Shape{g.n, g.c_out, g.h_out(), g.w_out()});
    for (int64_t n = 0; n < g.n; ++n)
        for (int64_t co = 0; co < g.c_out; ++co)
            for (int64_t oh = 0; oh < g.h_out(); ++oh)
                for (int64_t ow = 0; ow < g.w_out(); ++ow) {
                    double acc = 0.0;
                    for (int64_t ci = 0; ci < g.c_in; ++ci)
                        for (int64_t ky = 0; ky < g.k; ++ky)
                            for (int64_t kx = 0; kx < g.k; ++kx) {
                                const int64_t ih = oh * g.stride - g.pad + ky * g.dil;
                                const int64_t iw = ow * g.stride - g.pad + kx * g.dil;
                                int64_t fi = 0;
                                if (ih >= 0 && ih < g.h && iw >= 0 && iw < g.w)
                                    fi = oracle_feature_index(
                                        double(in[((n * g.c_in + ci) * g.h + ih) * g.w + iw]),
                                        s_f, nf);
                                const int64_t wi = oracle_weight_index(
                                    double(wgt[((co * g.c_in + ci) * g.k + ky) * g.k + kx]), s_w,
                                    nw);
                                const double r =
                                    double(tf[size_t(fi)]) * double(tw[size_t(wi)]);
                                acc += m * r;
                            }
                    if (!bias.empty()) acc += double(bias[size_t(co)]);
                    out[((n * g.c_out + co) * g.h_out() + oh) * g.w_out() + ow] = S(acc);
                }
    return out;
}

// quantize weights and features onto their grids, then convolve
template <class S>
lut::Tensor<S> quantize_convolve_oracle(const Geom& g, const lut::Tensor<S>& in,
                                        const lut::Tensor<S>& wgt, const std::vector<S>& bias,
                                        double s_w, double s_f, int64_t nf, int64_t nw) {
    lut::Tensor<S> inq(in.shape());
    for (int64_t i = 0; i < in.numel(); ++i)
        inq[i] = S(s_f * double(oracle_feature_index(double(in[i]), s_f, nf)) / double(nf - 1));
    lut::Tensor<S> wq(wgt.shape());
    for (int64_t i = 0; i < wgt.numel(); ++i)
        wq[i] =
            S(s_w * (2.0 * double(oracle_weight_index(double(wgt[i]), s_w, nw)) / double(nw - 1) -
                     1.0));
    return naive_conv2d(g, inq, wq, bias);
}

// central finite differences of a scalar map
inline double central_diff(const std::function<double(double)>& f, double x, double h = 1e-4) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

// per-channel batch statistics computed directly
template <class S>
void batch_stats(const lut::Tensor<S>& x, std::vector<double>& mean, std::vector<double>& var) {
    const int64_t N = x.dim(0), C = x.dim(1), plane = x.dim(2) * x.dim(3);
    mean.assign(size_t(C), 0.0);
    var.assign(size_t(C), 0.0);
    for (int64_t c = 0; c < C; ++c) {
        std::vector<double> vals;
        for (int64_t n = 0; n < N; ++n)
            for (int64_t i = 0; i < plane; ++i)
                vals.push_back(double(x[(n * C + c) * plane + i]));
        double m = 0.0;
        for (double v : vals) m += v;
        m /= double(vals.size());
        double s = 0.0;
        for (double v : vals) s += (v - m) * (v - m);
        mean[size_t(c)] = m;
        var[size_t(c)] = s / double(vals.size());
    }
}

// logistic regression by gradient descent; returns training accuracy
inline double logistic_train_accuracy(const std::vector<std::vector<double>>& x,
                                      const std::vector<int>& y, int iters = 2000,
                                      double lr = 0.5) {
    const size_t n = x.size(), d = x[0].size();
    std::vector<double> w(d, 0.0);
    double b = 0.0;
    for (int it = 0; it < iters; ++it) {
        std::vector<double> gw(d, 0.0);
        double gb = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double z = b;
            for (size_t j = 0; j < d; ++j) z += w[j] * x[i][j];
            const double p = 1.0 / (1.0 + std::exp(-z));
            const double e = p - double(y[i]);
            for (size_t j = 0; j < d; ++j) gw[j] += e * x[i][j];
            gb += e;
        }
        for (size_t j = 0; j < d; ++j) w[j] -= lr * gw[j] / double(n);
        b -= lr * gb / double(n);
    }
    size_t correct = 0;
    for (size_t i = 0; i < n; ++i) {
        double z = b;
        for (size_t j = 0; j < d; ++j) z += w[j] * x[i][j];
        if ((z > 0.0) == (y[i] == 1)) ++correct;
    }
    return double(correct) / double(n);
}

} // namespace oracle
