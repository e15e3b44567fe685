#pragma once

#include "lut/autodiff.hpp"
#include "lut/kernels/lookup.hpp"
#include "lut/quantize.hpp"
#include "lut/rng.hpp"
#include "lut/table.hpp"

#include <cstdint>
#include <iostream>
#include <optional>
#include <span>

// The training-time lookup layer: scale -> lookup -> re-scale -> add.
//
// Gradient contract (straight-through estimator throughout):
//   d idx_w / d w   = 1/s_w   where |w| < s_w, else 0
//   d idx_w / d s_w = -w/s_w^2 under the same gate (features analogous on (0, s_f))
//   d r / d idx     = 1 on both axes
//   d rbar / d r    = s_w s_f,   d rbar / d s_w = s_f r,   d rbar / d s_f = s_w r
//   d o / d rbar    = 1
// Table-cell gradients are d r / d T_f[i] = T_w[j] and d r / d T_w[j] = T_f[i]
// per hit, chained through the cumulative sums and softmax into the logits,
// optionally re-scaled per cell by sqrt(N_avg / N_i) before the chain.
namespace lut {

enum class TableMode { cumulative, fixed, independent_random, independent_step };

inline const char* table_mode_name(TableMode m) {
    switch (m) {
        case TableMode::cumulative: return "cumulative";
        case TableMode::fixed: return "fixed";
        case TableMode::independent_random: return "independent-random";
        case TableMode::independent_step: return "independent-step";
    }
    return "?";
}

template <class S>
struct TableParams {
    TableMode mode = TableMode::cumulative;
    int64_t nf = 33;
    int64_t nw = 33;
    NodePtr<S> g;     // feature logits, length nf-1
    NodePtr<S> q_neg; // weight logits, negative half, length (nw-1)/2
    NodePtr<S> q_pos; // positive half
    NodePtr<S> t2d;   // independent modes: free table entries, length nf*nw

    static TableParams make(TableMode mode, int64_t nf, int64_t nw, Rng& rng,
                            const std::string& prefix) {
        check_feature_granularity(nf);
        check_weight_granularity(nw);
        TableParams tp;
        tp.mode = mode;
        tp.nf = nf;
        tp.nw = nw;
        switch (mode) {
            case TableMode::cumulative: {
                tp.g = make_leaf<S>(Tensor<S>(Shape{nf - 1}), true, prefix + ".table.g");
                tp.q_neg =
                    make_leaf<S>(Tensor<S>(Shape{(nw - 1) / 2}), true, prefix + ".table.q_neg");
                tp.q_pos =
                    make_leaf<S>(Tensor<S>(Shape{(nw - 1) / 2}), true, prefix + ".table.q_pos");
                break;
            }
            case TableMode::fixed:
                break;
            case TableMode::independent_random: {
                Tensor<S> t(Shape{nf * nw});
                for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<S>(rng.uniform());
                tp.t2d = make_leaf<S>(std::move(t), true, prefix + ".table.t2d");
                break;
            }
            case TableMode::independent_step: {
                const auto tf = ramp_feature_subtable(nf);
                const auto tw = ramp_weight_subtable(nw);
                Tensor<S> t(Shape{nf * nw});
                for (int64_t i = 0; i < nf; ++i)
                    for (int64_t j = 0; j < nw; ++j)
                        t[i * nw + j] = static_cast<S>(tf[static_cast<size_t>(i)] *
                                                       tw[static_cast<size_t>(j)]);
                tp.t2d = make_leaf<S>(std::move(t), true, prefix + ".table.t2d");
                break;
            }
        }
        return tp;
    }

    bool learnable() const { return mode != TableMode::fixed; }
    bool separable() const { return mode == TableMode::cumulative || mode == TableMode::fixed; }

    BuiltTable<S> build() const {
        switch (mode) {
            case TableMode::cumulative: {
                std::vector<double> gl(g->value.vec().begin(), g->value.vec().end());
                std::vector<double> qn(q_neg->value.vec().begin(), q_neg->value.vec().end());
                std::vector<double> qp(q_pos->value.vec().begin(), q_pos->value.vec().end());
                return materialize_table<S>(build_feature_subtable(gl),
                                            build_weight_subtable(qn, qp));
            }
            case TableMode::fixed:
                return materialize_table<S>(ramp_feature_subtable(nf), ramp_weight_subtable(nw));
            default: {
                BuiltTable<S> t;
                t.nf = nf;
                t.nw = nw;
                t.t2d = t2d->value.vec();
                return t;
            }
        }
    }
};

enum class AxisKind { weight, feature };

// Eq-1 style index computation for a whole array; the scalar contract lives
// in quantize.hpp and is shared with the converted inference graph.
template <class S>
std::vector<int64_t> compute_indices(std::span<const S> values, double scale, AxisKind kind,
                                     int64_t n_cells) {
    if (!(scale > 0.0)) throw std::invalid_argument("compute_indices: scale must be positive");
    if (kind == AxisKind::weight) check_weight_granularity(n_cells);
    std::vector<int64_t> idx(values.size());
    const double inv_grid = static_cast<double>(n_cells - 1) / scale;
    const double inv_s = 1.0 / scale;
    for (size_t i = 0; i < values.size(); ++i) {
        const double v = static_cast<double>(values[i]);
        if (!std::isfinite(v))
            throw numeric_error("compute_indices: non-finite input value");
        idx[i] = (kind == AxisKind::feature) ? feature_index(v, inv_grid, n_cells)
                                             : weight_index(v, inv_s, n_cells);
    }
    return idx;
}

// ln(3 sigma) initialization; sigma = 0 falls back to e = 0 with a warning.
struct ScaleInit {
    double e_w = 0.0;
    double e_f = 0.0;
};

template <class S>
double sample_std(std::span<const S> v) {
    if (v.size() < 2) return 0.0;
    double mean = 0.0;
    for (S x : v) mean += static_cast<double>(x);
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (S x : v) {
        const double d = static_cast<double>(x) - mean;
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

template <class S>
ScaleInit init_scales(std::span<const S> weights, std::span<const S> features) {
    ScaleInit out;
    const double sw = sample_std(weights);
    const double sf = sample_std(features);
    if (sw > 0.0) {
        out.e_w = std::log(3.0 * sw);
    } else {
        std::cerr << "warning: degenerate weight statistics (sigma = 0); using e_w = 0\n";
    }
    if (sf > 0.0) {
        out.e_f = std::log(3.0 * sf);
    } else {
        std::cerr << "warning: degenerate feature statistics (sigma = 0); using e_f = 0\n";
    }
    return out;
}

namespace detail {

template <class S>
struct LookupSaved {
    kernels::Conv2dGeom geom;
    std::vector<uint16_t> idx_f, idx_w;
    std::vector<uint8_t> gate_f, gate_w;
    std::vector<S> tf_val, tw_val; // separable modes only
    BuiltTable<S> table;
    std::vector<double> rsum; // un-rescaled response sum per output
    double sw = 1.0, sf = 1.0;
};

} // namespace detail

// Records one hit per executed lookup: every patch slot of every output
// (padded slots hit feature cell 0). For the independent modes the 2D grid is
// counted as well.
inline void ensure_count_sizes(CellCounts& c, int64_t nf, int64_t nw, bool grid) {
    if (c.feat.size() != static_cast<size_t>(nf)) c.feat.assign(static_cast<size_t>(nf), 0);
    if (c.wgt.size() != static_cast<size_t>(nw)) c.wgt.assign(static_cast<size_t>(nw), 0);
    if (grid && c.grid.size() != static_cast<size_t>(nf * nw))
        c.grid.assign(static_cast<size_t>(nf * nw), 0);
}

// The full training-time layer op. `counts` may be null (no recording);
// grad_rescale applies sqrt(N_avg/N_i) to the table-cell gradient
// contributions using the counts accumulated since the last reset.
template <class S>
NodePtr<S> lookup_conv2d(const NodePtr<S>& x, const NodePtr<S>& w, const NodePtr<S>& b,
                         const NodePtr<S>& s_w_node, const NodePtr<S>& s_f_node,
                         const TableParams<S>& table, const kernels::Conv2dGeom& geom,
                         CellCounts* counts, bool record_counts, bool grad_rescale) {
    kernels::Conv2dGeom g = geom;
    g.validate();
    if (x->value.ndim() != 4 || x->value.dim(1) != g.c_in)
        throw shape_error("lookup_conv2d: input shape mismatch");
    if (w->value.numel() != g.wgt_numel()) throw shape_error("lookup_conv2d: kernel size mismatch");
    if (b && b->value.numel() != g.c_out) throw shape_error("lookup_conv2d: bias size mismatch");

    auto st = std::make_shared<detail::LookupSaved<S>>();
    st->geom = g;
    st->sw = static_cast<double>(s_w_node->value[0]);
    st->sf = static_cast<double>(s_f_node->value[0]);
    st->table = table.build();
    const int64_t nf = st->table.nf, nw = st->table.nw;

    // scaling step: features and weights to integer indices
    const double inv_grid_f = static_cast<double>(nf - 1) / st->sf;
    const double inv_sw = 1.0 / st->sw;
    const int64_t in_n = g.in_numel(), wg_n = g.wgt_numel();
    st->idx_f.resize(static_cast<size_t>(in_n));
    st->gate_f.resize(static_cast<size_t>(in_n));
    for (int64_t i = 0; i < in_n; ++i) {
        const double fv = static_cast<double>(x->value[i]);
        if (!std::isfinite(fv)) throw numeric_error("lookup_conv2d: non-finite feature");
        st->idx_f[static_cast<size_t>(i)] = static_cast<uint16_t>(feature_index(fv, inv_grid_f, nf));
        st->gate_f[static_cast<size_t>(i)] = (fv > 0.0 && fv < st->sf) ? 1 : 0;
    }
    st->idx_w.resize(static_cast<size_t>(wg_n));
    st->gate_w.resize(static_cast<size_t>(wg_n));
    for (int64_t i = 0; i < wg_n; ++i) {
        const double wv = static_cast<double>(w->value[i]);
        if (!std::isfinite(wv)) throw numeric_error("lookup_conv2d: non-finite weight");
        st->idx_w[static_cast<size_t>(i)] = static_cast<uint16_t>(weight_index(wv, inv_sw, nw));
        st->gate_w[static_cast<size_t>(i)] = (std::abs(wv) < st->sw) ? 1 : 0;
    }

    // lookup + re-scaling + addition
    const double m = st->sw * st->sf;
    Tensor<S> out(Shape{g.n, g.c_out, g.h_out(), g.w_out()});
    st->rsum.resize(static_cast<size_t>(g.out_numel()));
    const bool separable = table.separable();
    if (separable) {
        st->tf_val.resize(static_cast<size_t>(in_n));
        st->tw_val.resize(static_cast<size_t>(wg_n));
        for (int64_t i = 0; i < in_n; ++i)
            st->tf_val[static_cast<size_t>(i)] = st->table.tf[st->idx_f[static_cast<size_t>(i)]];
        for (int64_t i = 0; i < wg_n; ++i)
            st->tw_val[static_cast<size_t>(i)] = st->table.tw[st->idx_w[static_cast<size_t>(i)]];
        kernels::lookup_sep_forward(g, st->tf_val.data(), st->tw_val.data(),
                                    b ? b->value.data() : nullptr, m, out.data(),
                                    st->rsum.data());
    } else {
        kernels::lookup_2d_forward(g, st->idx_f.data(), st->idx_w.data(), st->table.t2d.data(),
                                   nw, b ? b->value.data() : nullptr, m, out.data(),
                                   st->rsum.data());
    }

    // hit counting
    if (counts && record_counts) {
        ensure_count_sizes(*counts, nf, nw, !separable);
        const auto usage = kernels::usage_map(g);
        const int64_t per_out = g.n * g.h_out() * g.w_out();
        for (int64_t e = 0; e < wg_n; ++e)
            counts->wgt[st->idx_w[static_cast<size_t>(e)]] += per_out;
        int64_t real_hits = 0;
        const int64_t plane = g.h * g.w;
        for (int64_t n = 0; n < g.n; ++n)
            for (int64_t c = 0; c < g.c_in; ++c) {
                const uint16_t* ip = st->idx_f.data() + (n * g.c_in + c) * plane;
                for (int64_t p = 0; p < plane; ++p) {
                    const int64_t mult = usage[static_cast<size_t>(p)] * g.c_out;
                    counts->feat[ip[p]] += mult;
                    real_hits += mult;
                }
            }
        const int64_t total = g.n * g.c_out * g.h_out() * g.w_out() * g.c_in * g.k * g.k;
        counts->feat[0] += total - real_hits; // padded slots
        if (!separable) {
            // per (ci,ky,kx): histogram of weight indices across output channels,
            // then walk output positions once
            const int64_t kk = g.k * g.k;
            std::vector<int64_t> whist(static_cast<size_t>(nw));
            for (int64_t ci = 0; ci < g.c_in; ++ci)
                for (int64_t ky = 0; ky < g.k; ++ky)
                    for (int64_t kx = 0; kx < g.k; ++kx) {
                        std::fill(whist.begin(), whist.end(), int64_t{0});
                        for (int64_t co = 0; co < g.c_out; ++co)
                            ++whist[st->idx_w[static_cast<size_t>(((co * g.c_in + ci) * g.k + ky) *
                                                                  g.k + kx)]];
                        (void)kk;
                        const int64_t ho = g.h_out(), wo = g.w_out();
                        for (int64_t n = 0; n < g.n; ++n) {
                            const uint16_t* ip = st->idx_f.data() + (n * g.c_in + ci) * plane;
                            for (int64_t oh = 0; oh < ho; ++oh) {
                                const int64_t ih = oh * g.stride - g.pad + ky * g.dil;
                                const bool rp = ih < 0 || ih >= g.h;
                                for (int64_t ow = 0; ow < wo; ++ow) {
                                    const int64_t iw = ow * g.stride - g.pad + kx * g.dil;
                                    const int64_t fi =
                                        (rp || iw < 0 || iw >= g.w) ? 0 : ip[ih * g.w + iw];
                                    for (int64_t j = 0; j < nw; ++j)
                                        if (whist[static_cast<size_t>(j)])
                                            counts->grid[static_cast<size_t>(fi * nw + j)] +=
                                                whist[static_cast<size_t>(j)];
                                }
                            }
                        }
                    }
        }
    }

    auto px = x, pw = w, pb = b, psw = s_w_node, psf = s_f_node;
    std::vector<NodePtr<S>> parents = {x, w, s_w_node, s_f_node};
    if (b) parents.push_back(b);
    TableParams<S> tp = table;
    if (tp.mode == TableMode::cumulative) {
        parents.push_back(tp.g);
        parents.push_back(tp.q_neg);
        parents.push_back(tp.q_pos);
    } else if (!tp.separable()) {
        parents.push_back(tp.t2d);
    }
    CellCounts* cts = counts;

    return make_op<S>(
        std::move(out), std::move(parents),
        [px, pw, pb, psw, psf, tp, st, cts, grad_rescale](Node<S>& n) {
            const kernels::Conv2dGeom& g = st->geom;
            const double sw = st->sw, sf = st->sf, m = sw * sf;
            const int64_t ho = g.h_out(), wo = g.w_out(), plane_o = ho * wo;
            const int64_t in_n = g.in_numel(), wg_n = g.wgt_numel();

            // per-output-channel upstream sums (also the bias gradient)
            std::vector<double> uc(static_cast<size_t>(g.c_out), 0.0);
            for (int64_t nn = 0; nn < g.n; ++nn)
                for (int64_t co = 0; co < g.c_out; ++co) {
                    const S* up = n.grad.data() + (nn * g.c_out + co) * plane_o;
                    double acc = 0.0;
                    for (int64_t i = 0; i < plane_o; ++i) acc += static_cast<double>(up[i]);
                    uc[static_cast<size_t>(co)] += acc;
                }
            if (pb && pb->requires_grad) {
                Tensor<S> gb(pb->value.shape());
                for (int64_t co = 0; co < g.c_out; ++co)
                    gb[co] = static_cast<S>(uc[static_cast<size_t>(co)]);
                pb->accumulate_grad(gb);
            }

            // kernel weights: u * s_w s_f * (1) * (1/s_w) inside the clip gate
            if (pw->requires_grad) {
                Tensor<S> gw(pw->value.shape());
                const int64_t per_co = g.c_in * g.k * g.k;
                for (int64_t e = 0; e < wg_n; ++e) {
                    const int64_t co = e / per_co;
                    gw[e] = st->gate_w[static_cast<size_t>(e)]
                                ? static_cast<S>(sf * uc[static_cast<size_t>(co)])
                                : S(0);
                }
                pw->accumulate_grad(gw);
            }

            // spread of upstream gradient onto input positions (all-ones kernel)
            Tensor<S> uspread(px->value.shape());
            kernels::conv2d_input_grad(g, n.grad.data(), static_cast<const S*>(nullptr),
                                       uspread.data());

            if (px->requires_grad) {
                Tensor<S> gin(px->value.shape());
                for (int64_t e = 0; e < in_n; ++e)
                    gin[e] = st->gate_f[static_cast<size_t>(e)]
                                 ? static_cast<S>(sw * static_cast<double>(uspread[e]))
                                 : S(0);
                px->accumulate_grad(gin);
            }

            // re-scaling step: d rbar/d s_w = s_f r, d rbar/d s_f = s_w r
            double sur = 0.0;
            for (int64_t o = 0; o < g.out_numel(); ++o)
                sur += static_cast<double>(n.grad[o]) * st->rsum[static_cast<size_t>(o)];

            if (psw->requires_grad) {
                double gsw = sf * sur;
                const int64_t per_co = g.c_in * g.k * g.k;
                for (int64_t e = 0; e < wg_n; ++e)
                    if (st->gate_w[static_cast<size_t>(e)])
                        gsw += m * (-static_cast<double>(pw->value[e]) / (sw * sw)) *
                               uc[static_cast<size_t>(e / per_co)];
                Tensor<S> gs(Shape{1});
                gs[0] = static_cast<S>(gsw);
                psw->accumulate_grad(gs);
            }
            if (psf->requires_grad) {
                double gsf = sw * sur;
                for (int64_t e = 0; e < in_n; ++e)
                    if (st->gate_f[static_cast<size_t>(e)])
                        gsf += m * (-static_cast<double>(px->value[e]) / (sf * sf)) *
                               static_cast<double>(uspread[e]);
                Tensor<S> gs(Shape{1});
                gs[0] = static_cast<S>(gsf);
                psf->accumulate_grad(gs);
            }

            // table gradients
            if (tp.mode == TableMode::cumulative) {
                const int64_t nf = st->table.nf, nw = st->table.nw;
                // d o / d T_w[j]: gather u * T_f over outputs per kernel element
                Tensor<S> gw_val(Shape{wg_n});
                kernels::conv2d_weight_grad(g, n.grad.data(), st->tf_val.data(), gw_val.data());
                std::vector<double> cell_tw(static_cast<size_t>(nw), 0.0);
                for (int64_t e = 0; e < wg_n; ++e)
                    cell_tw[st->idx_w[static_cast<size_t>(e)]] +=
                        m * static_cast<double>(gw_val[e]);
                // d o / d T_f[i]: gather u * T_w onto input elements
                Tensor<S> d_val(Shape{in_n});
                kernels::conv2d_input_grad(g, n.grad.data(), st->tw_val.data(), d_val.data());
                std::vector<double> cell_tf(static_cast<size_t>(nf), 0.0);
                for (int64_t e = 0; e < in_n; ++e)
                    cell_tf[st->idx_f[static_cast<size_t>(e)]] +=
                        m * static_cast<double>(d_val[e]);
                // padded slots would only feed the anchored T_f[0]

                if (grad_rescale && cts && !cts->feat.empty()) {
                    rescale_cell_gradients(cell_tf, cts->feat);
                    rescale_cell_gradients(cell_tw, cts->wgt);
                }

                std::vector<double> gl(tp.g->value.vec().begin(), tp.g->value.vec().end());
                std::vector<double> qn(tp.q_neg->value.vec().begin(), tp.q_neg->value.vec().end());
                std::vector<double> qp(tp.q_pos->value.vec().begin(), tp.q_pos->value.vec().end());
                const auto g_grads = feature_logit_grads(gl, cell_tf);
                const auto w_grads = weight_logit_grads(qn, qp, cell_tw);
                Tensor<S> t(tp.g->value.shape());
                for (int64_t i = 0; i < t.numel(); ++i)
                    t[i] = static_cast<S>(g_grads[static_cast<size_t>(i)]);
                tp.g->accumulate_grad(t);
                Tensor<S> tn(tp.q_neg->value.shape());
                for (int64_t i = 0; i < tn.numel(); ++i)
                    tn[i] = static_cast<S>(w_grads.neg[static_cast<size_t>(i)]);
                tp.q_neg->accumulate_grad(tn);
                Tensor<S> tps(tp.q_pos->value.shape());
                for (int64_t i = 0; i < tps.numel(); ++i)
                    tps[i] = static_cast<S>(w_grads.pos[static_cast<size_t>(i)]);
                tp.q_pos->accumulate_grad(tps);
            } else if (!tp.separable() && tp.t2d->requires_grad) {
                const int64_t nf = st->table.nf, nw = st->table.nw;
                std::vector<double> grid(static_cast<size_t>(nf * nw), 0.0);
                const int64_t plane = g.h * g.w;
                for (int64_t ci = 0; ci < g.c_in; ++ci)
                    for (int64_t ky = 0; ky < g.k; ++ky)
                        for (int64_t kx = 0; kx < g.k; ++kx) {
                            for (int64_t nn = 0; nn < g.n; ++nn) {
                                const uint16_t* ip =
                                    st->idx_f.data() + (nn * g.c_in + ci) * plane;
                                for (int64_t oh = 0; oh < ho; ++oh) {
                                    const int64_t ih = oh * g.stride - g.pad + ky * g.dil;
                                    const bool rp = ih < 0 || ih >= g.h;
                                    for (int64_t ow = 0; ow < wo; ++ow) {
                                        const int64_t iw = ow * g.stride - g.pad + kx * g.dil;
                                        const int64_t fi =
                                            (rp || iw < 0 || iw >= g.w) ? 0 : ip[ih * g.w + iw];
                                        for (int64_t co = 0; co < g.c_out; ++co) {
                                            const int64_t widx = st->idx_w[static_cast<size_t>(
                                                ((co * g.c_in + ci) * g.k + ky) * g.k + kx)];
                                            grid[static_cast<size_t>(fi * nw + widx)] +=
                                                m * static_cast<double>(
                                                        n.grad[((nn * g.c_out + co) * ho + oh) *
                                                                   wo +
                                                               ow]);
                                        }
                                    }
                                }
                            }
                        }
                if (grad_rescale && cts && !cts->grid.empty())
                    rescale_cell_gradients(grid, cts->grid);
                Tensor<S> gt(tp.t2d->value.shape());
                for (int64_t i = 0; i < gt.numel(); ++i)
                    gt[i] = static_cast<S>(grid[static_cast<size_t>(i)]);
                tp.t2d->accumulate_grad(gt);
            }
        },
        "lookup_conv2d");
}

// Residual-skip quantizer: forward rounds x through the entry layer's feature
// grid and dequantizes; backward is a pass-through inside (0, s_f), zero
// below, and routes d xhat / d s = 1 to the scale for saturated-high inputs.
template <class S>
NodePtr<S> quantize_feature_ste(const NodePtr<S>& x, const NodePtr<S>& s_f_node, int64_t nf) {
    const double s = static_cast<double>(s_f_node->value[0]);
    const double inv = static_cast<double>(nf - 1) / s;
    const double step = s / static_cast<double>(nf - 1);
    Tensor<S> out(x->value.shape());
    for (int64_t i = 0; i < x->value.numel(); ++i) {
        const double fv = static_cast<double>(x->value[i]);
        if (!std::isfinite(fv)) throw numeric_error("quantize_feature_ste: non-finite input");
        out[i] = static_cast<S>(step * static_cast<double>(feature_index(fv, inv, nf)));
    }
    auto px = x;
    auto ps = s_f_node;
    return make_op<S>(std::move(out), {x, s_f_node},
                      [px, ps](Node<S>& n) {
                          const double s = static_cast<double>(ps->value[0]);
                          if (px->requires_grad) {
                              Tensor<S> g(px->value.shape());
                              for (int64_t i = 0; i < g.numel(); ++i) {
                                  const double fv = static_cast<double>(px->value[i]);
                                  g[i] = (fv > 0.0 && fv < s) ? n.grad[i] : S(0);
                              }
                              px->accumulate_grad(g);
                          }
                          if (ps->requires_grad) {
                              double acc = 0.0;
                              for (int64_t i = 0; i < n.grad.numel(); ++i)
                                  if (static_cast<double>(px->value[i]) >= s)
                                      acc += static_cast<double>(n.grad[i]);
                              Tensor<S> g(Shape{1});
                              g[0] = static_cast<S>(acc);
                              ps->accumulate_grad(g);
                          }
                      },
                      "quantize_feature_ste");
}

} // namespace lut
