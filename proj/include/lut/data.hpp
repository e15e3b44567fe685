#pragma once

#include "lut/rng.hpp"
#include "lut/tensor.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lut {

struct Dataset {
    Tensor<float> images; // N x C x H x W, values in [0,1]
    std::vector<int> labels;
    int64_t classes = 10;

    int64_t size() const { return images.numel() ? images.dim(0) : 0; }
};

// CIFAR-10 binary batches: each record is 1 label byte followed by 3072 pixel
// bytes (R plane, G plane, B plane; row-major 32x32). Pixels map to byte/255.
Dataset load_cifar10(const std::vector<std::string>& paths);

// Standard directory layout (data_batch_1..5.bin / test_batch.bin).
Dataset load_cifar10_dir(const std::string& dir, bool train);

// Writes records in the exact binary format (fixture/synthetic generation).
void write_cifar10(const std::string& path, std::span<const uint8_t> labels,
                   std::span<const uint8_t> pixels);

// Class-structured 32x32 RGB images: class-dependent oriented gratings and
// color tint with per-sample jitter and noise, byte-quantized. `pixels_out`,
// when non-null, receives the raw bytes for writing to the binary format.
Dataset synthetic_images(int64_t n, int64_t classes, uint64_t seed,
                         std::vector<uint8_t>* labels_out = nullptr,
                         std::vector<uint8_t>* pixels_out = nullptr);

// Gaussian class blobs as N x dims x 1 x 1 tensors, linearly separable for
// sufficiently large separation.
Dataset synthetic_gaussian(int64_t n, int64_t dims, int64_t classes, double separation,
                           uint64_t seed);

Dataset subset(const Dataset& d, int64_t from, int64_t count);

// pad-4 zero border, random 32x32 crop, 50% horizontal flip
struct AugmentConfig {
    int64_t pad = 4;
    bool flip = true;
};

Tensor<float> augment_batch(const Tensor<float>& batch, Rng& rng,
                            const AugmentConfig& cfg = {});

Tensor<float> hflip(const Tensor<float>& batch);

} // namespace lut
