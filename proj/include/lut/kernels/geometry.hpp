#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lut::kernels {

// Geometry of a 2D sliding-window op (square kernel, symmetric stride/pad/dilation).
struct Conv2dGeom {
    int64_t n = 1;      // batch
    int64_t c_in = 1;
    int64_t h = 1, w = 1;
    int64_t c_out = 1;
    int64_t k = 1;
    int64_t stride = 1;
    int64_t pad = 0;
    int64_t dil = 1;

    int64_t k_eff() const { return dil * (k - 1) + 1; }
    int64_t h_out() const { return (h + 2 * pad - k_eff()) / stride + 1; }
    int64_t w_out() const { return (w + 2 * pad - k_eff()) / stride + 1; }

    int64_t in_numel() const { return n * c_in * h * w; }
    int64_t out_numel() const { return n * c_out * h_out() * w_out(); }
    int64_t wgt_numel() const { return c_out * c_in * k * k; }

    // multiply-accumulate pairs per image
    int64_t macs_per_image() const { return h_out() * w_out() * c_out * c_in * k * k; }

    void validate() const {
        if (n < 1 || c_in < 1 || h < 1 || w < 1 || c_out < 1 || k < 1 || stride < 1 || dil < 1 || pad < 0)
            throw std::invalid_argument("conv2d geometry: non-positive extent");
        if (h + 2 * pad < k_eff() || w + 2 * pad < k_eff())
            throw std::invalid_argument(
                "conv2d geometry: kernel (effective size " + std::to_string(k_eff()) +
                ") larger than padded input " + std::to_string(h + 2 * pad) + "x" +
                std::to_string(w + 2 * pad));
    }
};

} // namespace lut::kernels
