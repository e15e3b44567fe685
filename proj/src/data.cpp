#include "lut/data.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace lut {

namespace {
constexpr int64_t kRecordBytes = 3073;
constexpr int64_t kPixelBytes = 3072;
} // namespace

Dataset load_cifar10(const std::vector<std::string>& paths) {
    std::vector<uint8_t> raw;
    for (const auto& p : paths) {
        std::ifstream f(p, std::ios::binary);
        if (!f) throw std::runtime_error("cifar10: cannot open " + p);
        f.seekg(0, std::ios::end);
        const int64_t bytes = static_cast<int64_t>(f.tellg());
        f.seekg(0);
        if (bytes % kRecordBytes != 0)
            throw std::runtime_error("cifar10: truncated file " + p + ": size " +
                                     std::to_string(bytes) + " bytes, record boundary at offset " +
                                     std::to_string((bytes / kRecordBytes) * kRecordBytes));
        const size_t off = raw.size();
        raw.resize(off + static_cast<size_t>(bytes));
        if (bytes > 0) f.read(reinterpret_cast<char*>(raw.data() + off), bytes);
        if (!f && bytes > 0) throw std::runtime_error("cifar10: read failure on " + p);
    }
    const int64_t n = static_cast<int64_t>(raw.size()) / kRecordBytes;
    Dataset d;
    d.classes = 10;
    d.images.reset(Shape{n, 3, 32, 32});
    d.labels.resize(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        const uint8_t* rec = raw.data() + i * kRecordBytes;
        const uint8_t label = rec[0];
        if (label > 9)
            throw std::runtime_error("cifar10: label " + std::to_string(int(label)) +
                                     " out of range at record " + std::to_string(i));
        d.labels[static_cast<size_t>(i)] = label;
        float* img = d.images.data() + i * kPixelBytes;
        for (int64_t b = 0; b < kPixelBytes; ++b)
            img[b] = static_cast<float>(rec[1 + b]) / 255.0f;
    }
    return d;
}

Dataset load_cifar10_dir(const std::string& dir, bool train) {
    std::vector<std::string> paths;
    if (train) {
        for (int i = 1; i <= 5; ++i)
            paths.push_back(dir + "/data_batch_" + std::to_string(i) + ".bin");
    } else {
        paths.push_back(dir + "/test_batch.bin");
    }
    return load_cifar10(paths);
}

void write_cifar10(const std::string& path, std::span<const uint8_t> labels,
                   std::span<const uint8_t> pixels) {
    if (pixels.size() != labels.size() * static_cast<size_t>(kPixelBytes))
        throw std::invalid_argument("write_cifar10: pixel/label count mismatch");
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("write_cifar10: cannot open " + path);
    for (size_t i = 0; i < labels.size(); ++i) {
        f.put(static_cast<char>(labels[i]));
        f.write(reinterpret_cast<const char*>(pixels.data() + i * kPixelBytes), kPixelBytes);
    }
    if (!f) throw std::runtime_error("write_cifar10: write failure on " + path);
}

Dataset synthetic_images(int64_t n, int64_t classes, uint64_t seed,
                         std::vector<uint8_t>* labels_out, std::vector<uint8_t>* pixels_out) {
    Rng rng(seed);
    Dataset d;
    d.classes = classes;
    d.images.reset(Shape{n, 3, 32, 32});
    d.labels.resize(static_cast<size_t>(n));
    if (labels_out) labels_out->resize(static_cast<size_t>(n));
    if (pixels_out) pixels_out->resize(static_cast<size_t>(n * kPixelBytes));

    for (int64_t i = 0; i < n; ++i) {
        const int cls = static_cast<int>(rng.below(static_cast<uint64_t>(classes)));
        d.labels[static_cast<size_t>(i)] = cls;
        if (labels_out) (*labels_out)[static_cast<size_t>(i)] = static_cast<uint8_t>(cls);

        // class-dependent grating orientation/frequency plus color tint
        const double theta = 3.14159265358979 * (0.08 + static_cast<double>(cls)) /
                             static_cast<double>(classes);
        const double freq = 0.35 + 0.06 * static_cast<double>(cls % 5);
        const double phase = rng.uniform(0.0, 6.283185307);
        const double cx = rng.uniform(10.0, 22.0);
        const double cy = rng.uniform(10.0, 22.0);
        const double tint[3] = {0.5 + 0.4 * std::cos(0.7 * cls), 0.5 + 0.4 * std::sin(1.3 * cls),
                                0.5 - 0.4 * std::cos(1.9 * cls)};
        const double ct = std::cos(theta), stheta = std::sin(theta);
        for (int64_t y = 0; y < 32; ++y)
            for (int64_t x = 0; x < 32; ++x) {
                const double u = ct * (x - cx) + stheta * (y - cy);
                const double v = -stheta * (x - cx) + ct * (y - cy);
                const double grating = 0.5 + 0.5 * std::sin(freq * u + phase);
                const double blob = std::exp(-(u * u + v * v) / 180.0);
                for (int64_t c = 0; c < 3; ++c) {
                    double val = 0.55 * grating * tint[c] + 0.35 * blob * tint[2 - c] +
                                 0.12 * rng.uniform();
                    val = std::clamp(val, 0.0, 1.0);
                    const uint8_t q = static_cast<uint8_t>(std::lround(val * 255.0));
                    d.images.at4(i, c, y, x) = static_cast<float>(q) / 255.0f;
                    if (pixels_out)
                        (*pixels_out)[static_cast<size_t>(i * kPixelBytes + c * 1024 + y * 32 +
                                                          x)] = q;
                }
            }
    }
    return d;
}

Dataset synthetic_gaussian(int64_t n, int64_t dims, int64_t classes, double separation,
                           uint64_t seed) {
    Rng rng(seed);
    // fixed unit directions per class
    std::vector<double> centers(static_cast<size_t>(classes * dims));
    for (int64_t c = 0; c < classes; ++c) {
        double norm = 0.0;
        for (int64_t k = 0; k < dims; ++k) {
            const double v = rng.normal();
            centers[static_cast<size_t>(c * dims + k)] = v;
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (int64_t k = 0; k < dims; ++k)
            centers[static_cast<size_t>(c * dims + k)] *= separation / norm;
    }
    Dataset d;
    d.classes = classes;
    d.images.reset(Shape{n, dims, 1, 1});
    d.labels.resize(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        const int cls = static_cast<int>(rng.below(static_cast<uint64_t>(classes)));
        d.labels[static_cast<size_t>(i)] = cls;
        for (int64_t k = 0; k < dims; ++k)
            d.images[i * dims + k] =
                static_cast<float>(centers[static_cast<size_t>(cls * dims + k)] + rng.normal());
    }
    return d;
}

Dataset subset(const Dataset& d, int64_t from, int64_t count) {
    if (from < 0 || from + count > d.size())
        throw std::out_of_range("dataset subset out of range");
    Dataset out;
    out.classes = d.classes;
    const int64_t px = d.images.numel() / d.size();
    out.images.reset(Shape{count, d.images.dim(1), d.images.dim(2), d.images.dim(3)});
    std::copy(d.images.data() + from * px, d.images.data() + (from + count) * px,
              out.images.data());
    out.labels.assign(d.labels.begin() + from, d.labels.begin() + from + count);
    return out;
}

Tensor<float> augment_batch(const Tensor<float>& batch, Rng& rng, const AugmentConfig& cfg) {
    const int64_t N = batch.dim(0), C = batch.dim(1), H = batch.dim(2), W = batch.dim(3);
    Tensor<float> out(batch.shape());
    for (int64_t n = 0; n < N; ++n) {
        const int64_t oy = static_cast<int64_t>(rng.below(static_cast<uint64_t>(2 * cfg.pad + 1)));
        const int64_t ox = static_cast<int64_t>(rng.below(static_cast<uint64_t>(2 * cfg.pad + 1)));
        const bool flip = cfg.flip && rng.coin();
        for (int64_t c = 0; c < C; ++c)
            for (int64_t y = 0; y < H; ++y)
                for (int64_t x = 0; x < W; ++x) {
                    // flip acts on the cropped window; (oy,ox) position it in
                    // the padded image
                    const int64_t xc = flip ? (W - 1 - x) : x;
                    const int64_t sy = y + oy - cfg.pad;
                    const int64_t sx = xc + ox - cfg.pad;
                    float v = 0.0f;
                    if (sy >= 0 && sy < H && sx >= 0 && sx < W) v = batch.at4(n, c, sy, sx);
                    out.at4(n, c, y, x) = v;
                }
    }
    return out;
}

Tensor<float> hflip(const Tensor<float>& batch) {
    const int64_t N = batch.dim(0), C = batch.dim(1), H = batch.dim(2), W = batch.dim(3);
    Tensor<float> out(batch.shape());
    for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c)
            for (int64_t y = 0; y < H; ++y)
                for (int64_t x = 0; x < W; ++x) out.at4(n, c, y, x) = batch.at4(n, c, y, W - 1 - x);
    return out;
}

} // namespace lut
