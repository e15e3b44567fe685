#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

// The one index-computation contract shared by the training layer, the
// re-parameterized inference graph, and the tests. Discretization rounds
// half-away-from-zero; everything is evaluated in double so the training and
// converted paths make identical rounding decisions.
namespace lut {

inline int64_t round_half_away(double x) { return std::llround(x); }

// feature: idx = round(clip(f / s_f, 0, 1) * (N_f - 1)), computed as
// clip(f * inv, 0, N_f - 1) with inv = (N_f - 1) / s_f.
inline int64_t feature_index(double f, double inv_grid, int64_t nf) {
    double t = f * inv_grid;
    t = std::clamp(t, 0.0, static_cast<double>(nf - 1));
    return round_half_away(t);
}

// weight: idx = round((clip(w / s_w, -1, 1) + 1) / 2 * (N_w - 1))
inline int64_t weight_index(double w, double inv_sw, int64_t nw) {
    double u = std::clamp(w * inv_sw, -1.0, 1.0);
    return round_half_away((u + 1.0) * 0.5 * static_cast<double>(nw - 1));
}

} // namespace lut
