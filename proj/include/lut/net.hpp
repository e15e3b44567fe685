#pragma once

#include "lut/autodiff.hpp"
#include "lut/lookup_layer.hpp"
#include "lut/rng.hpp"

#include <memory>
#include <string>
#include <vector>

namespace lut {

enum class Phase { train, eval };

template <class S>
struct NamedParam {
    std::string name;
    NodePtr<S> node;
    bool decay = false; // weight decay applies only to kernel/linear weights
};

template <class S>
struct NamedBuffer {
    std::string name;
    Tensor<S>* tensor;
};

// Per-layer shape/MAC info for the cost model.
struct LayerShapeInfo {
    std::string name;
    std::string kind;
    int64_t macs_per_image = 0; // H_out*W_out*C_out*C_in*k*k for conv-like layers
    bool countable = false;     // conv/lookup/linear layers
    Shape out_shape;
};

template <class S>
class Layer {
public:
    virtual ~Layer() = default;
    virtual NodePtr<S> forward(const NodePtr<S>& x, Phase phase) = 0;
    virtual void collect_params(std::vector<NamedParam<S>>& out) { (void)out; }
    virtual void collect_buffers(std::vector<NamedBuffer<S>>& out) { (void)out; }
    virtual std::string kind() const = 0;
    virtual Shape infer(const Shape& in) const = 0;
    virtual int64_t macs_per_image(const Shape& in) const {
        (void)in;
        return 0;
    }
    std::string name;
};

template <class S>
Tensor<S> he_normal(const Shape& shape, int64_t fan_in, Rng& rng) {
    Tensor<S> t(shape);
    const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<S>(rng.normal(0.0, std));
    return t;
}

template <class S>
class Conv2dLayer : public Layer<S> {
public:
    kernels::Conv2dGeom geom;
    NodePtr<S> weight, bias;

    Conv2dLayer(std::string name_, kernels::Conv2dGeom g, bool with_bias, Rng& rng) : geom(g) {
        this->name = std::move(name_);
        weight = make_leaf<S>(he_normal<S>(Shape{g.c_out, g.c_in, g.k, g.k}, g.c_in * g.k * g.k, rng),
                              true, this->name + ".weight");
        if (with_bias)
            bias = make_leaf<S>(Tensor<S>(Shape{g.c_out}), true, this->name + ".bias");
    }

    NodePtr<S> forward(const NodePtr<S>& x, Phase) override {
        kernels::Conv2dGeom g = geom;
        g.n = x->value.dim(0);
        g.h = x->value.dim(2);
        g.w = x->value.dim(3);
        return ops::conv2d(x, weight, bias, g);
    }

    void collect_params(std::vector<NamedParam<S>>& out) override {
        out.push_back({weight->name, weight, true});
        if (bias) out.push_back({bias->name, bias, false});
    }

    std::string kind() const override { return "conv2d"; }

    Shape infer(const Shape& in) const override {
        kernels::Conv2dGeom g = geom;
        g.n = in[0];
        g.h = in[2];
        g.w = in[3];
        return {g.n, g.c_out, g.h_out(), g.w_out()};
    }

    int64_t macs_per_image(const Shape& in) const override {
        kernels::Conv2dGeom g = geom;
        g.n = 1;
        g.h = in[2];
        g.w = in[3];
        return g.macs_per_image();
    }
};

template <class S>
class BatchNorm2dLayer : public Layer<S> {
public:
    NodePtr<S> gamma, beta;
    Tensor<S> running_mean, running_var;
    double eps = 1e-5;
    double momentum = 0.1;

    BatchNorm2dLayer(std::string name_, int64_t channels) {
        this->name = std::move(name_);
        gamma = make_leaf<S>(Tensor<S>(Shape{channels}, S(1)), true, this->name + ".gamma");
        beta = make_leaf<S>(Tensor<S>(Shape{channels}), true, this->name + ".beta");
        running_mean.reset(Shape{channels});
        running_var.reset(Shape{channels}, S(1));
    }

    NodePtr<S> forward(const NodePtr<S>& x, Phase phase) override {
        return ops::batchnorm2d(x, gamma, beta, &running_mean, &running_var, eps, momentum,
                                phase == Phase::train);
    }

    void collect_params(std::vector<NamedParam<S>>& out) override {
        out.push_back({gamma->name, gamma, false});
        out.push_back({beta->name, beta, false});
    }

    void collect_buffers(std::vector<NamedBuffer<S>>& out) override {
        out.push_back({this->name + ".running_mean", &running_mean});
        out.push_back({this->name + ".running_var", &running_var});
    }

    std::string kind() const override { return "batchnorm2d"; }
    Shape infer(const Shape& in) const override { return in; }
};

template <class S>
class ReluLayer : public Layer<S> {
public:
    explicit ReluLayer(std::string name_) { this->name = std::move(name_); }
    NodePtr<S> forward(const NodePtr<S>& x, Phase) override { return ops::relu(x); }
    std::string kind() const override { return "relu"; }
    Shape infer(const Shape& in) const override { return in; }
};

template <class S>
class MaxPool2Layer : public Layer<S> {
public:
    explicit MaxPool2Layer(std::string name_) { this->name = std::move(name_); }
    NodePtr<S> forward(const NodePtr<S>& x, Phase) override { return ops::maxpool2(x); }
    std::string kind() const override { return "maxpool2"; }
    Shape infer(const Shape& in) const override { return {in[0], in[1], in[2] / 2, in[3] / 2}; }
};

template <class S>
class GlobalAvgPoolLayer : public Layer<S> {
public:
    explicit GlobalAvgPoolLayer(std::string name_) { this->name = std::move(name_); }
    NodePtr<S> forward(const NodePtr<S>& x, Phase) override { return ops::global_avgpool(x); }
    std::string kind() const override { return "global_avgpool"; }
    Shape infer(const Shape& in) const override { return {in[0], in[1]}; }
};

template <class S>
class FlattenLayer : public Layer<S> {
public:
    explicit FlattenLayer(std::string name_) { this->name = std::move(name_); }
    NodePtr<S> forward(const NodePtr<S>& x, Phase) override { return ops::flatten2d(x); }
    std::string kind() const override { return "flatten"; }
    Shape infer(const Shape& in) const override {
        int64_t d = 1;
        for (size_t i = 1; i < in.size(); ++i) d *= in[i];
        return {in[0], d};
    }
};

template <class S>
class LinearLayer : public Layer<S> {
public:
    NodePtr<S> weight, bias;

    LinearLayer(std::string name_, int64_t in_dim, int64_t out_dim, Rng& rng) {
        this->name = std::move(name_);
        weight = make_leaf<S>(he_normal<S>(Shape{out_dim, in_dim}, in_dim, rng), true,
                              this->name + ".weight");
        bias = make_leaf<S>(Tensor<S>(Shape{out_dim}), true, this->name + ".bias");
    }

    NodePtr<S> forward(const NodePtr<S>& x, Phase) override {
        return ops::linear(x, weight, bias);
    }

    void collect_params(std::vector<NamedParam<S>>& out) override {
        out.push_back({weight->name, weight, true});
        out.push_back({bias->name, bias, false});
    }

    std::string kind() const override { return "linear"; }
    Shape infer(const Shape& in) const override { return {in[0], weight->value.dim(0)}; }
    int64_t macs_per_image(const Shape&) const override {
        return weight->value.dim(0) * weight->value.dim(1);
    }
};

// Strategy toggles of a lookup layer. With exponential parameterization the
// leaf parameters are e_w/e_f and s = exp(e); otherwise s_w/s_f are raw
// leaves that the optimizer can drive negative (the instability the
// exponential form exists to prevent).
template <class S>
class LookupConv2dLayer : public Layer<S> {
public:
    kernels::Conv2dGeom geom;
    NodePtr<S> weight, bias;
    NodePtr<S> e_w, e_f; // exponential mode
    NodePtr<S> s_w_raw, s_f_raw;
    TableParams<S> table;
    CellCounts counts;
    bool exponential_scales = true;
    bool grad_rescale = true;
    bool scales_initialized = false;

    LookupConv2dLayer(std::string name_, kernels::Conv2dGeom g, bool with_bias, TableMode mode,
                      int64_t nf, int64_t nw, bool exp_scales, bool rescale, Rng& rng)
        : geom(g), exponential_scales(exp_scales), grad_rescale(rescale) {
        this->name = std::move(name_);
        weight = make_leaf<S>(he_normal<S>(Shape{g.c_out, g.c_in, g.k, g.k}, g.c_in * g.k * g.k, rng),
                              true, this->name + ".weight");
        if (with_bias)
            bias = make_leaf<S>(Tensor<S>(Shape{g.c_out}), true, this->name + ".bias");
        if (exponential_scales) {
            e_w = make_leaf<S>(Tensor<S>(Shape{1}), true, this->name + ".e_w");
            e_f = make_leaf<S>(Tensor<S>(Shape{1}), true, this->name + ".e_f");
        } else {
            s_w_raw = make_leaf<S>(Tensor<S>(Shape{1}, S(1)), true, this->name + ".s_w");
            s_f_raw = make_leaf<S>(Tensor<S>(Shape{1}, S(1)), true, this->name + ".s_f");
        }
        table = TableParams<S>::make(mode, nf, nw, rng, this->name);
    }

    // e_w from the layer's weights, e_f from the features of the first
    // training batch that reaches the layer.
    void maybe_init_scales(const Tensor<S>& features) {
        if (scales_initialized) return;
        const auto init = init_scales<S>(std::span<const S>(weight->value.vec()),
                                         std::span<const S>(features.vec()));
        if (exponential_scales) {
            e_w->value[0] = static_cast<S>(init.e_w);
            e_f->value[0] = static_cast<S>(init.e_f);
        } else {
            s_w_raw->value[0] = static_cast<S>(std::exp(init.e_w));
            s_f_raw->value[0] = static_cast<S>(std::exp(init.e_f));
        }
        scales_initialized = true;
    }

    std::pair<NodePtr<S>, NodePtr<S>> scale_nodes() {
        if (exponential_scales) return {ops::exp_scalar(e_w), ops::exp_scalar(e_f)};
        return {s_w_raw, s_f_raw};
    }

    // Scales exactly as the forward pass sees them: the exp node stores its
    // result at S precision, so the round-trip through S is intentional.
    double current_sw() const {
        return exponential_scales
                   ? static_cast<double>(static_cast<S>(std::exp(static_cast<double>(e_w->value[0]))))
                   : static_cast<double>(s_w_raw->value[0]);
    }
    double current_sf() const {
        return exponential_scales
                   ? static_cast<double>(static_cast<S>(std::exp(static_cast<double>(e_f->value[0]))))
                   : static_cast<double>(s_f_raw->value[0]);
    }

    NodePtr<S> forward(const NodePtr<S>& x, Phase phase) override {
        if (phase == Phase::train) maybe_init_scales(x->value);
        auto [sw, sf] = scale_nodes();
        kernels::Conv2dGeom g = geom;
        g.n = x->value.dim(0);
        g.h = x->value.dim(2);
        g.w = x->value.dim(3);
        return lookup_conv2d(x, weight, bias, sw, sf, table, g, &counts, phase == Phase::train,
                             grad_rescale);
    }

    void collect_params(std::vector<NamedParam<S>>& out) override {
        out.push_back({weight->name, weight, true});
        if (bias) out.push_back({bias->name, bias, false});
        if (exponential_scales) {
            out.push_back({e_w->name, e_w, false});
            out.push_back({e_f->name, e_f, false});
        } else {
            out.push_back({s_w_raw->name, s_w_raw, false});
            out.push_back({s_f_raw->name, s_f_raw, false});
        }
        if (table.mode == TableMode::cumulative) {
            out.push_back({table.g->name, table.g, false});
            out.push_back({table.q_neg->name, table.q_neg, false});
            out.push_back({table.q_pos->name, table.q_pos, false});
        } else if (!table.separable()) {
            out.push_back({table.t2d->name, table.t2d, false});
        }
    }

    std::string kind() const override { return "lookup_conv2d"; }

    Shape infer(const Shape& in) const override {
        kernels::Conv2dGeom g = geom;
        g.n = in[0];
        g.h = in[2];
        g.w = in[3];
        return {g.n, g.c_out, g.h_out(), g.w_out()};
    }

    int64_t macs_per_image(const Shape& in) const override {
        kernels::Conv2dGeom g = geom;
        g.n = 1;
        g.h = in[2];
        g.w = in[3];
        return g.macs_per_image();
    }
};

// Basic residual block of two 3x3 lookup layers. With `scaled_skip` the
// identity path is quantized on the entry layer's feature grid and multiplied
// by exp(e_f_next - e_f_entry); conversion to the multiplication-free form
// requires that treatment. Blocks that change shape use a 1x1 lookup
// projection instead (no skip scaling needed; the projection absorbs it).
template <class S>
class ResidualBlockLayer : public Layer<S> {
public:
    std::unique_ptr<LookupConv2dLayer<S>> lk1, lk2, proj;
    std::unique_ptr<BatchNorm2dLayer<S>> bn1, bn2, bnp;
    bool scaled_skip = true;
    // e_f of the next lookup layer's entry (or this block's own entry when the
    // block output feeds a non-lookup consumer)
    NodePtr<S> next_entry_ef;

    ResidualBlockLayer(std::string name_, int64_t c_in, int64_t c_out, int64_t stride,
                       TableMode mode, int64_t nf, int64_t nw, bool exp_scales, bool rescale,
                       bool scaled_skip_, Rng& rng) {
        this->name = std::move(name_);
        scaled_skip = scaled_skip_;
        if (scaled_skip && !exp_scales)
            throw std::invalid_argument(
                "residual block: the scaled-skip treatment requires exponential scales");
        kernels::Conv2dGeom g1{};
        g1.c_in = c_in;
        g1.c_out = c_out;
        g1.k = 3;
        g1.stride = stride;
        g1.pad = 1;
        lk1 = std::make_unique<LookupConv2dLayer<S>>(this->name + ".lk1", g1, false, mode, nf, nw,
                                                     exp_scales, rescale, rng);
        bn1 = std::make_unique<BatchNorm2dLayer<S>>(this->name + ".bn1", c_out);
        kernels::Conv2dGeom g2{};
        g2.c_in = c_out;
        g2.c_out = c_out;
        g2.k = 3;
        g2.stride = 1;
        g2.pad = 1;
        lk2 = std::make_unique<LookupConv2dLayer<S>>(this->name + ".lk2", g2, false, mode, nf, nw,
                                                     exp_scales, rescale, rng);
        bn2 = std::make_unique<BatchNorm2dLayer<S>>(this->name + ".bn2", c_out);
        if (c_in != c_out || stride != 1) {
            kernels::Conv2dGeom gp{};
            gp.c_in = c_in;
            gp.c_out = c_out;
            gp.k = 1;
            gp.stride = stride;
            gp.pad = 0;
            proj = std::make_unique<LookupConv2dLayer<S>>(this->name + ".proj", gp, false, mode,
                                                          nf, nw, exp_scales, rescale, rng);
            bnp = std::make_unique<BatchNorm2dLayer<S>>(this->name + ".bnp", c_out);
        }
    }

    NodePtr<S> forward(const NodePtr<S>& x, Phase phase) override {
        auto h = ops::relu(bn1->forward(lk1->forward(x, phase), phase));
        auto y = bn2->forward(lk2->forward(h, phase), phase);
        NodePtr<S> z;
        if (proj) {
            z = ops::add(y, bnp->forward(proj->forward(x, phase), phase));
        } else if (scaled_skip) {
            if (!next_entry_ef)
                throw std::runtime_error("residual block " + this->name +
                                         ": next-entry scale not wired");
            auto s_entry = ops::exp_scalar(lk1->e_f);
            auto xq = quantize_feature_ste(x, s_entry, lk1->table.nf);
            auto kappa = ops::exp_diff(next_entry_ef, lk1->e_f);
            z = ops::add_scaled(y, xq, kappa);
        } else {
            z = ops::add(y, x);
        }
        return ops::relu(z);
    }

    void collect_params(std::vector<NamedParam<S>>& out) override {
        lk1->collect_params(out);
        bn1->collect_params(out);
        lk2->collect_params(out);
        bn2->collect_params(out);
        if (proj) {
            proj->collect_params(out);
            bnp->collect_params(out);
        }
    }

    void collect_buffers(std::vector<NamedBuffer<S>>& out) override {
        bn1->collect_buffers(out);
        bn2->collect_buffers(out);
        if (bnp) bnp->collect_buffers(out);
    }

    std::string kind() const override { return "residual_block"; }

    Shape infer(const Shape& in) const override {
        return lk2->infer(lk1->infer(in));
    }

    int64_t macs_per_image(const Shape& in) const override {
        int64_t macs = lk1->macs_per_image(in);
        const Shape mid = lk1->infer(in);
        macs += lk2->macs_per_image(mid);
        if (proj) macs += proj->macs_per_image(in);
        return macs;
    }
};

// N x D -> N x D x 1 x 1
template <class S>
class UnflattenLayer : public Layer<S> {
public:
    explicit UnflattenLayer(std::string name_) { this->name = std::move(name_); }
    NodePtr<S> forward(const NodePtr<S>& x, Phase) override {
        Tensor<S> v(Shape{x->value.dim(0), x->value.dim(1), 1, 1}, x->value.vec());
        auto px = x;
        return make_op<S>(std::move(v), {x},
                          [px](Node<S>& n) {
                              Tensor<S> g(px->value.shape(), n.grad.vec());
                              px->accumulate_grad(g);
                          },
                          "unflatten");
    }
    std::string kind() const override { return "unflatten"; }
    Shape infer(const Shape& in) const override { return {in[0], in[1], 1, 1}; }
};

// ---------------------------------------------------------------------------

struct ArchConfig {
    std::string name = "tinycnn-lookup"; // tinycnn-lookup | tinycnn-conv |
                                         // toy-mlp-lookup | toyresnet-lookup
    int64_t granularity_f = 33;
    int64_t granularity_w = 33;
    TableMode table_mode = TableMode::cumulative;
    bool exponential_scales = true;
    bool grad_rescale = true;
    bool residual_scale_flag = true;
    int64_t classes = 10;
    int64_t in_channels = 3;
    int64_t in_hw = 32;
    int64_t width = 16;
    int64_t mlp_inputs = 16;
    int64_t mlp_hidden = 24;
};

template <class S>
class Network {
public:
    ArchConfig arch;
    std::vector<std::unique_ptr<Layer<S>>> layers;

    NodePtr<S> forward(const NodePtr<S>& x, Phase phase) {
        NodePtr<S> h = x;
        for (auto& l : layers) h = l->forward(h, phase);
        return h;
    }

    std::vector<NamedParam<S>> params() {
        std::vector<NamedParam<S>> out;
        for (auto& l : layers) l->collect_params(out);
        return out;
    }

    std::vector<NamedBuffer<S>> buffers() {
        std::vector<NamedBuffer<S>> out;
        for (auto& l : layers) l->collect_buffers(out);
        return out;
    }

    std::vector<LookupConv2dLayer<S>*> lookup_layers() {
        std::vector<LookupConv2dLayer<S>*> out;
        for (auto& l : layers) {
            if (auto* lk = dynamic_cast<LookupConv2dLayer<S>*>(l.get())) out.push_back(lk);
            if (auto* rb = dynamic_cast<ResidualBlockLayer<S>*>(l.get())) {
                out.push_back(rb->lk1.get());
                out.push_back(rb->lk2.get());
                if (rb->proj) out.push_back(rb->proj.get());
            }
        }
        return out;
    }

    void reset_counts() {
        for (auto* lk : lookup_layers()) lk->counts.reset();
    }

    void zero_grads() {
        for (auto& p : params()) p.node->zero_grad();
    }

    std::vector<LayerShapeInfo> shape_infos(Shape in) const {
        std::vector<LayerShapeInfo> out;
        for (const auto& l : layers) {
            LayerShapeInfo info;
            info.name = l->name;
            info.kind = l->kind();
            info.macs_per_image = l->macs_per_image(in);
            info.countable = info.macs_per_image > 0;
            info.out_shape = l->infer(in);
            in = info.out_shape;
            out.push_back(std::move(info));
        }
        return out;
    }
};

// Identical conv/lookup architectures so ablations compare like for like.
template <class S>
Network<S> build_network(const ArchConfig& a, Rng& rng) {
    Network<S> net;
    net.arch = a;
    auto geom = [](int64_t ci, int64_t co, int64_t k, int64_t stride, int64_t pad) {
        kernels::Conv2dGeom g{};
        g.c_in = ci;
        g.c_out = co;
        g.k = k;
        g.stride = stride;
        g.pad = pad;
        return g;
    };

    if (a.name == "tinycnn-lookup" || a.name == "tinycnn-conv") {
        const bool lookup = a.name == "tinycnn-lookup";
        const int64_t w = a.width;
        net.layers.push_back(std::make_unique<Conv2dLayer<S>>(
            "stem", geom(a.in_channels, w, 3, 1, 1), false, rng));
        net.layers.push_back(std::make_unique<BatchNorm2dLayer<S>>("stem_bn", w));
        net.layers.push_back(std::make_unique<ReluLayer<S>>("stem_relu"));
        net.layers.push_back(std::make_unique<MaxPool2Layer<S>>("pool0"));
        auto mid = [&](const std::string& nm, int64_t ci, int64_t co) {
            if (lookup)
                net.layers.push_back(std::make_unique<LookupConv2dLayer<S>>(
                    nm, geom(ci, co, 3, 1, 1), false, a.table_mode, a.granularity_f,
                    a.granularity_w, a.exponential_scales, a.grad_rescale, rng));
            else
                net.layers.push_back(
                    std::make_unique<Conv2dLayer<S>>(nm, geom(ci, co, 3, 1, 1), false, rng));
            net.layers.push_back(std::make_unique<BatchNorm2dLayer<S>>(nm + "_bn", co));
            net.layers.push_back(std::make_unique<ReluLayer<S>>(nm + "_relu"));
        };
        mid("l1", w, 2 * w);
        net.layers.push_back(std::make_unique<MaxPool2Layer<S>>("pool1"));
        mid("l2", 2 * w, 2 * w);
        net.layers.push_back(std::make_unique<GlobalAvgPoolLayer<S>>("gap"));
        net.layers.push_back(std::make_unique<LinearLayer<S>>("fc", 2 * w, a.classes, rng));
        return net;
    }

    if (a.name == "toy-mlp-lookup") {
        net.layers.push_back(std::make_unique<FlattenLayer<S>>("flatten_in"));
        net.layers.push_back(
            std::make_unique<LinearLayer<S>>("fc_in", a.mlp_inputs, a.mlp_hidden, rng));
        // back to NCHW with 1x1 spatial so the lookup layer applies as 1x1
        net.layers.push_back(std::make_unique<UnflattenLayer<S>>("unflatten"));
        net.layers.push_back(std::make_unique<BatchNorm2dLayer<S>>("bn_in", a.mlp_hidden));
        net.layers.push_back(std::make_unique<ReluLayer<S>>("relu_in"));
        net.layers.push_back(std::make_unique<LookupConv2dLayer<S>>(
            "lk", geom(a.mlp_hidden, a.mlp_hidden, 1, 1, 0), false, a.table_mode, a.granularity_f,
            a.granularity_w, a.exponential_scales, a.grad_rescale, rng));
        net.layers.push_back(std::make_unique<BatchNorm2dLayer<S>>("bn_lk", a.mlp_hidden));
        net.layers.push_back(std::make_unique<ReluLayer<S>>("relu_lk"));
        net.layers.push_back(std::make_unique<FlattenLayer<S>>("flatten_out"));
        net.layers.push_back(
            std::make_unique<LinearLayer<S>>("fc_out", a.mlp_hidden, a.classes, rng));
        return net;
    }

    if (a.name == "toyresnet-lookup") {
        const int64_t w = a.width;
        net.layers.push_back(std::make_unique<Conv2dLayer<S>>(
            "stem", geom(a.in_channels, w, 3, 1, 1), false, rng));
        net.layers.push_back(std::make_unique<BatchNorm2dLayer<S>>("stem_bn", w));
        net.layers.push_back(std::make_unique<ReluLayer<S>>("stem_relu"));
        auto rb1 = std::make_unique<ResidualBlockLayer<S>>(
            "rb1", w, w, 1, a.table_mode, a.granularity_f, a.granularity_w,
            a.exponential_scales, a.grad_rescale, a.residual_scale_flag, rng);
        auto rb2 = std::make_unique<ResidualBlockLayer<S>>(
            "rb2", w, w, 1, a.table_mode, a.granularity_f, a.granularity_w,
            a.exponential_scales, a.grad_rescale, a.residual_scale_flag, rng);
        if (a.residual_scale_flag) {
            rb1->next_entry_ef = rb2->lk1->e_f;
            rb2->next_entry_ef = rb2->lk1->e_f; // boundary block: own entry grid
        }
        net.layers.push_back(std::move(rb1));
        net.layers.push_back(std::move(rb2));
        net.layers.push_back(std::make_unique<GlobalAvgPoolLayer<S>>("gap"));
        net.layers.push_back(std::make_unique<LinearLayer<S>>("fc", w, a.classes, rng));
        return net;
    }

    throw std::invalid_argument("unknown architecture: " + a.name);
}

} // namespace lut
