#pragma once

#include "lut/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

// Construction and differentiation of the learnable 2D lookup table.
//
// The table factors into two monotone 1D sub-tables built from cumulative
// softmax distributions: a feature sub-table spanning [0,1] with an anchored
// leading 0, and a weight sub-table spanning [-1,1] built outward from an
// anchored 0 at the center index. Entry (i,j) of the 2D table is
// T_f[i] * T_w[j], so every entry stays inside [-1,1].
namespace lut {

inline std::vector<double> softmax_masses(std::span<const double> logits) {
    if (logits.empty()) throw std::invalid_argument("softmax: empty logit vector");
    double mx = logits[0];
    for (double g : logits) mx = std::max(mx, g);
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        z += p[i];
    }
    for (double& v : p) v /= z;
    return p;
}

// T_f[0] = 0, T_f[i] = p_1 + ... + p_i, T_f[N_f-1] = 1 exactly.
inline std::vector<double> build_feature_subtable(std::span<const double> logits) {
    const std::vector<double> p = softmax_masses(logits);
    std::vector<double> tf(p.size() + 1);
    tf[0] = 0.0;
    double run = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        run += p[i];
        tf[i + 1] = std::min(run, 1.0);
    }
    tf.back() = 1.0;
    return tf;
}

// N_w = 2*len+1 entries; both halves accumulate outward from the zero center:
// T_w[c+m] = q+_1 + ... + q+_m and T_w[c-m] = -(q-_1 + ... + q-_m).
inline std::vector<double> build_weight_subtable(std::span<const double> logits_neg,
                                                 std::span<const double> logits_pos) {
    if (logits_neg.size() != logits_pos.size())
        throw std::invalid_argument("weight sub-table: halves must have equal length");
    const std::vector<double> qn = softmax_masses(logits_neg);
    const std::vector<double> qp = softmax_masses(logits_pos);
    const size_t half = qp.size();
    const size_t nw = 2 * half + 1;
    std::vector<double> tw(nw);
    const size_t c = half;
    tw[c] = 0.0;
    double run = 0.0;
    for (size_t m = 1; m <= half; ++m) {
        run += qp[m - 1];
        tw[c + m] = std::min(run, 1.0);
    }
    tw[nw - 1] = 1.0;
    run = 0.0;
    for (size_t m = 1; m <= half; ++m) {
        run += qn[m - 1];
        tw[c - m] = -std::min(run, 1.0);
    }
    tw[0] = -1.0;
    return tw;
}

// Evenly spaced sub-tables; by construction these equal the cumulative build
// with all-equal logits, and their outer product is the exact-product table
// (i/(N_f-1)) * (2j/(N_w-1) - 1) of a plain quantized multiplication.
inline std::vector<double> ramp_feature_subtable(int64_t nf) {
    std::vector<double> tf(static_cast<size_t>(nf));
    for (int64_t i = 0; i < nf; ++i) tf[static_cast<size_t>(i)] = double(i) / double(nf - 1);
    return tf;
}

inline std::vector<double> ramp_weight_subtable(int64_t nw) {
    std::vector<double> tw(static_cast<size_t>(nw));
    for (int64_t j = 0; j < nw; ++j)
        tw[static_cast<size_t>(j)] = 2.0 * double(j) / double(nw - 1) - 1.0;
    return tw;
}

inline void check_weight_granularity(int64_t nw) {
    if (nw < 3 || nw % 2 == 0)
        throw std::invalid_argument("weight sub-table size must be odd and >= 3, got " +
                                    std::to_string(nw));
}

inline void check_feature_granularity(int64_t nf) {
    if (nf < 2)
        throw std::invalid_argument("feature sub-table size must be >= 2, got " +
                                    std::to_string(nf));
}

// Materialized per-layer table. tf/tw are the source of truth for the
// separable modes; t2d is the flat N_f x N_w grid (outer product, or the free
// parameters themselves in the independent modes).
template <class S>
struct BuiltTable {
    int64_t nf = 0;
    int64_t nw = 0;
    std::vector<S> tf; // empty in independent modes
    std::vector<S> tw;
    std::vector<S> t2d;

    S at(int64_t i, int64_t j) const {
        if (i < 0 || i >= nf || j < 0 || j >= nw)
            throw std::out_of_range("lookup index out of table range");
        return t2d[static_cast<size_t>(i * nw + j)];
    }

    bool separable() const { return !tf.empty(); }
};

template <class S>
BuiltTable<S> materialize_table(const std::vector<double>& tf, const std::vector<double>& tw) {
    BuiltTable<S> t;
    t.nf = static_cast<int64_t>(tf.size());
    t.nw = static_cast<int64_t>(tw.size());
    t.tf.resize(tf.size());
    t.tw.resize(tw.size());
    for (size_t i = 0; i < tf.size(); ++i) t.tf[i] = static_cast<S>(tf[i]);
    for (size_t j = 0; j < tw.size(); ++j) t.tw[j] = static_cast<S>(tw[j]);
    t.t2d.resize(tf.size() * tw.size());
    for (size_t i = 0; i < tf.size(); ++i)
        for (size_t j = 0; j < tw.size(); ++j)
            t.t2d[i * tw.size() + j] = static_cast<S>(tf[i] * tw[j]);
    return t;
}

// ---------------------------------------------------------------------------
// Gradient chain: 2D cell grads -> sub-table cell grads -> softmax logits.

// d r / d T_f[i] = T_w[j] and vice versa, accumulated per hit by the layer;
// here we only chain already-accumulated sub-table cell gradients to logits.

// Cumulative sum: mass m (0-based) feeds every cell i >= m+1.
inline std::vector<double> cumsum_mass_grads(std::span<const double> cell_grads) {
    const size_t n_cells = cell_grads.size();
    std::vector<double> gm(n_cells - 1, 0.0);
    double suffix = 0.0;
    for (size_t i = n_cells; i-- > 1;) {
        suffix += cell_grads[i];
        gm[i - 1] = suffix;
    }
    return gm;
}

// Softmax Jacobian: g_logit[m] = p_m * (g_p[m] - sum_k p_k g_p[k]).
inline std::vector<double> softmax_logit_grads(std::span<const double> p,
                                               std::span<const double> gp) {
    double dot = 0.0;
    for (size_t k = 0; k < p.size(); ++k) dot += p[k] * gp[k];
    std::vector<double> gl(p.size());
    for (size_t m = 0; m < p.size(); ++m) gl[m] = p[m] * (gp[m] - dot);
    return gl;
}

inline std::vector<double> feature_logit_grads(std::span<const double> logits,
                                               std::span<const double> cell_grads) {
    const std::vector<double> p = softmax_masses(logits);
    const std::vector<double> gp = cumsum_mass_grads(cell_grads);
    return softmax_logit_grads(p, gp);
}

struct WeightLogitGrads {
    std::vector<double> neg;
    std::vector<double> pos;
};

inline WeightLogitGrads weight_logit_grads(std::span<const double> logits_neg,
                                           std::span<const double> logits_pos,
                                           std::span<const double> cell_grads) {
    const size_t nw = cell_grads.size();
    const size_t half = (nw - 1) / 2;
    const size_t c = half;
    // positive side cells c..nw-1 form a cumulative sub-table; negative side
    // cells c..0 (outward) form one with negated entries.
    std::vector<double> pos_cells(half + 1), neg_cells(half + 1);
    for (size_t m = 0; m <= half; ++m) {
        pos_cells[m] = cell_grads[c + m];
        neg_cells[m] = -cell_grads[c - m];
    }
    WeightLogitGrads out;
    out.pos = softmax_logit_grads(softmax_masses(logits_pos), cumsum_mass_grads(pos_cells));
    out.neg = softmax_logit_grads(softmax_masses(logits_neg), cumsum_mass_grads(neg_cells));
    return out;
}

// ---------------------------------------------------------------------------
// Per-cell hit counting and the sqrt(N_avg / N_i) gradient re-scaling.

struct CellCounts {
    std::vector<int64_t> feat;  // one counter per feature sub-table cell
    std::vector<int64_t> wgt;   // one counter per weight sub-table cell
    std::vector<int64_t> grid;  // independent mode: one counter per 2D cell

    void reset() {
        std::fill(feat.begin(), feat.end(), int64_t{0});
        std::fill(wgt.begin(), wgt.end(), int64_t{0});
        std::fill(grid.begin(), grid.end(), int64_t{0});
    }

    static double navg(std::span<const int64_t> counts) {
        double total = 0.0;
        for (int64_t c : counts) total += static_cast<double>(c);
        return counts.empty() ? 0.0 : total / static_cast<double>(counts.size());
    }
};

// Multiplies the gradient contribution of cell i by sqrt(N_avg / N_i).
// Cells that saw no hits are left untouched; counts are the caller's to reset.
inline void rescale_cell_gradients(std::span<double> cell_grads,
                                   std::span<const int64_t> counts) {
    if (cell_grads.size() != counts.size())
        throw std::invalid_argument("rescale: gradient/count length mismatch");
    const double navg = CellCounts::navg(counts);
    if (navg <= 0.0) return;
    for (size_t i = 0; i < cell_grads.size(); ++i) {
        if (counts[i] > 0)
            cell_grads[i] *= std::sqrt(navg / static_cast<double>(counts[i]));
    }
}

} // namespace lut
