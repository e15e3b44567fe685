#pragma once

#include "lut/data.hpp"
#include "lut/net.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace lut {

struct TrainConfig {
    int64_t epochs = 30;
    int64_t batch_size = 100;
    double lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    double clip_norm = 3.0;
    std::vector<int64_t> lr_decay_epochs = {20, 27};
    double lr_decay_factor = 0.1;
    bool augment = true;
    uint64_t seed = 1;
};

// SGD with momentum; weight decay is added to the gradient only for
// decay-flagged parameters (kernel and linear weights).
template <class S>
class Sgd {
public:
    explicit Sgd(std::vector<NamedParam<S>> params, double momentum, double weight_decay)
        : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
        for (auto& p : params_) bufs_.emplace_back(p.node->value.shape());
    }

    void step(double lr) {
        for (size_t i = 0; i < params_.size(); ++i) {
            auto& p = params_[i];
            if (!p.node->grad.numel()) continue;
            Tensor<S>& buf = bufs_[i];
            for (int64_t j = 0; j < p.node->value.numel(); ++j) {
                double g = static_cast<double>(p.node->grad[j]);
                if (p.decay && weight_decay_ != 0.0)
                    g += weight_decay_ * static_cast<double>(p.node->value[j]);
                const double b = momentum_ * static_cast<double>(buf[j]) + g;
                buf[j] = static_cast<S>(b);
                p.node->value[j] = static_cast<S>(static_cast<double>(p.node->value[j]) - lr * b);
            }
        }
    }

    void zero_grad() {
        for (auto& p : params_) p.node->zero_grad();
    }

    const std::vector<NamedParam<S>>& params() const { return params_; }

private:
    std::vector<NamedParam<S>> params_;
    std::vector<Tensor<S>> bufs_;
    double momentum_;
    double weight_decay_;
};

template <class S>
double global_grad_norm(const std::vector<NamedParam<S>>& params) {
    double s = 0.0;
    for (const auto& p : params) {
        if (!p.node->grad.numel()) continue;
        for (int64_t j = 0; j < p.node->grad.numel(); ++j) {
            const double g = static_cast<double>(p.node->grad[j]);
            s += g * g;
        }
    }
    return std::sqrt(s);
}

// Scales all gradients so the global L2 norm is at most max_norm.
template <class S>
double clip_global_norm(const std::vector<NamedParam<S>>& params, double max_norm) {
    const double norm = global_grad_norm(params);
    if (norm > max_norm && norm > 0.0) {
        const double scale = max_norm / norm;
        for (const auto& p : params) {
            if (!p.node->grad.numel()) continue;
            for (int64_t j = 0; j < p.node->grad.numel(); ++j)
                p.node->grad[j] = static_cast<S>(static_cast<double>(p.node->grad[j]) * scale);
        }
    }
    return norm;
}

struct LayerScaleLog {
    std::string layer;
    double s_w = 0.0;
    double s_f = 0.0;
};

struct EpochMetrics {
    int64_t epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double test_acc = 0.0;
    double max_pre_clip_norm = 0.0;
    std::vector<LayerScaleLog> scales;
};

struct TrainResult {
    std::vector<EpochMetrics> epochs;
    double final_test_acc = 0.0;
    int64_t steps = 0;
};

template <class S>
double evaluate_accuracy(Network<S>& net, const Dataset& data, int64_t batch_size = 200) {
    int64_t correct = 0;
    const int64_t n = data.size();
    for (int64_t from = 0; from < n; from += batch_size) {
        const int64_t count = std::min(batch_size, n - from);
        Dataset b = subset(data, from, count);
        Tensor<S> x = b.images.template cast<S>();
        auto out = net.forward(make_leaf(std::move(x)), Phase::eval);
        const int64_t classes = out->value.dim(1);
        for (int64_t i = 0; i < count; ++i) {
            int best = 0;
            for (int64_t c = 1; c < classes; ++c)
                if (out->value[i * classes + c] > out->value[i * classes + best])
                    best = static_cast<int>(c);
            if (best == b.labels[static_cast<size_t>(i)]) ++correct;
        }
    }
    return n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0;
}

// One training run: shuffle, augment, forward, cross-entropy, backward
// (table-cell gradient re-scaling happens inside the lookup layers), global
// norm clip, SGD step, per-iteration hit-count reset.
template <class S>
TrainResult train(Network<S>& net, const Dataset& train_data, const Dataset& test_data,
                  const TrainConfig& cfg,
                  const std::function<void(const EpochMetrics&)>& on_epoch = {}) {
    Rng rng(cfg.seed);
    Sgd<S> opt(net.params(), cfg.momentum, cfg.weight_decay);
    TrainResult result;

    const int64_t n = train_data.size();
    std::vector<int64_t> order(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

    double lr = cfg.lr;
    for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (std::find(cfg.lr_decay_epochs.begin(), cfg.lr_decay_epochs.end(), epoch) !=
            cfg.lr_decay_epochs.end())
            lr *= cfg.lr_decay_factor;

        rng.shuffle(order);
        double loss_sum = 0.0;
        int64_t loss_count = 0, correct = 0;
        double max_norm = 0.0;

        for (int64_t from = 0; from < n; from += cfg.batch_size) {
            const int64_t count = std::min(cfg.batch_size, n - from);
            Tensor<float> xb(Shape{count, train_data.images.dim(1), train_data.images.dim(2),
                                   train_data.images.dim(3)});
            std::vector<int> yb(static_cast<size_t>(count));
            const int64_t px = train_data.images.numel() / n;
            for (int64_t i = 0; i < count; ++i) {
                const int64_t src = order[static_cast<size_t>(from + i)];
                std::copy(train_data.images.data() + src * px,
                          train_data.images.data() + (src + 1) * px, xb.data() + i * px);
                yb[static_cast<size_t>(i)] = train_data.labels[static_cast<size_t>(src)];
            }
            if (cfg.augment && xb.dim(2) >= 8) xb = augment_batch(xb, rng);

            Tensor<S> xs = xb.template cast<S>();
            auto logits = net.forward(make_leaf(std::move(xs)), Phase::train);
            auto loss = ops::softmax_cross_entropy(logits, yb);
            if (!std::isfinite(static_cast<double>(loss->value[0])))
                throw numeric_error("training aborted: non-finite loss at epoch " +
                                    std::to_string(epoch) + " step " +
                                    std::to_string(result.steps));
            backward(loss);

            max_norm = std::max(max_norm, clip_global_norm(opt.params(), cfg.clip_norm));
            opt.step(lr);
            opt.zero_grad();
            net.reset_counts();
            ++result.steps;

            loss_sum += static_cast<double>(loss->value[0]) * static_cast<double>(count);
            loss_count += count;
            const int64_t classes = logits->value.dim(1);
            for (int64_t i = 0; i < count; ++i) {
                int best = 0;
                for (int64_t c = 1; c < classes; ++c)
                    if (logits->value[i * classes + c] > logits->value[i * classes + best])
                        best = static_cast<int>(c);
                if (best == yb[static_cast<size_t>(i)]) ++correct;
            }
        }

        EpochMetrics m;
        m.epoch = epoch;
        m.lr = lr;
        m.train_loss = loss_sum / static_cast<double>(std::max<int64_t>(1, loss_count));
        m.train_acc = static_cast<double>(correct) / static_cast<double>(std::max<int64_t>(1, n));
        m.test_acc = evaluate_accuracy(net, test_data);
        m.max_pre_clip_norm = max_norm;
        for (auto* lk : net.lookup_layers())
            m.scales.push_back({lk->name, lk->current_sw(), lk->current_sf()});
        result.epochs.push_back(m);
        result.final_test_acc = m.test_acc;
        if (on_epoch) on_epoch(m);
    }
    return result;
}

inline std::string metrics_csv(const TrainResult& r) {
    std::ostringstream os;
    os << "epoch, lr, train_loss, train_acc, test_acc, max_pre_clip_norm";
    if (!r.epochs.empty())
        for (const auto& s : r.epochs.front().scales)
            os << ", sw_" << s.layer << ", sf_" << s.layer;
    os << "\n";
    os.precision(8);
    for (const auto& m : r.epochs) {
        os << m.epoch << ", " << m.lr << ", " << m.train_loss << ", " << m.train_acc << ", "
           << m.test_acc << ", " << m.max_pre_clip_norm;
        for (const auto& s : m.scales) os << ", " << s.s_w << ", " << s.s_f;
        os << "\n";
    }
    return os.str();
}

} // namespace lut
