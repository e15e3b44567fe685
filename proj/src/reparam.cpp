#include "lut/reparam.hpp"

#include "lut/quantize.hpp"

#include <cmath>
#include <sstream>

namespace lut {

// ---------------------------------------------------------------------------
// Fusion steps

FusedLookup fuse_rescale(const LookupConv2dLayer<float>& layer) {
    FusedLookup fl;
    fl.name = layer.name;
    fl.geom = layer.geom;
    fl.nf = layer.table.nf;
    fl.nw = layer.table.nw;
    fl.s_w = layer.current_sw();
    fl.s_f = layer.current_sf();

    const auto built = layer.table.build();
    const double m = fl.s_w * fl.s_f;
    std::vector<double> t(static_cast<size_t>(fl.nf * fl.nw));
    if (built.separable()) {
        for (int64_t i = 0; i < fl.nf; ++i)
            for (int64_t j = 0; j < fl.nw; ++j)
                t[static_cast<size_t>(i * fl.nw + j)] =
                    m * (static_cast<double>(built.tf[static_cast<size_t>(i)]) *
                         static_cast<double>(built.tw[static_cast<size_t>(j)]));
    } else {
        for (int64_t i = 0; i < fl.nf * fl.nw; ++i)
            t[static_cast<size_t>(i)] =
                m * static_cast<double>(built.t2d[static_cast<size_t>(i)]);
    }
    fl.tables.push_back(std::move(t));
    fl.per_channel = false;

    fl.bias.assign(static_cast<size_t>(fl.geom.c_out), 0.0);
    if (layer.bias)
        for (int64_t k = 0; k < fl.geom.c_out; ++k)
            fl.bias[static_cast<size_t>(k)] = static_cast<double>(layer.bias->value[k]);

    // the scaling step for weights runs offline
    const double inv_sw = 1.0 / fl.s_w;
    fl.idx_w.resize(static_cast<size_t>(layer.weight->value.numel()));
    for (int64_t i = 0; i < layer.weight->value.numel(); ++i)
        fl.idx_w[static_cast<size_t>(i)] = static_cast<uint8_t>(
            weight_index(static_cast<double>(layer.weight->value[i]), inv_sw, fl.nw));
    return fl;
}

void fuse_batchnorm(FusedLookup& fl, const BatchNorm2dLayer<float>& bn) {
    const int64_t c_out = fl.geom.c_out;
    if (bn.gamma->value.numel() != c_out)
        throw shape_error("fuse_batchnorm: channel mismatch on " + fl.name);
    std::vector<std::vector<double>> per(static_cast<size_t>(c_out));
    std::vector<double> bias(static_cast<size_t>(c_out));
    const std::vector<double>& base = fl.tables[0];
    for (int64_t k = 0; k < c_out; ++k) {
        const double var = static_cast<double>(bn.running_var[k]);
        const double s2 = var + bn.eps;
        if (s2 <= 0.0)
            throw numeric_error("fuse_batchnorm: non-positive variance + eps on channel " +
                                std::to_string(k));
        const double sigma = std::sqrt(s2);
        const double gamma = static_cast<double>(bn.gamma->value[k]);
        const double beta = static_cast<double>(bn.beta->value[k]);
        const double mu = static_cast<double>(bn.running_mean[k]);
        const double c = gamma / sigma;
        std::vector<double> t(base.size());
        const std::vector<double>& src = fl.per_channel ? fl.tables[static_cast<size_t>(k)] : base;
        for (size_t i = 0; i < src.size(); ++i) t[i] = c * src[i];
        per[static_cast<size_t>(k)] = std::move(t);
        bias[static_cast<size_t>(k)] =
            beta + (gamma * fl.bias[static_cast<size_t>(k)] - gamma * mu) / sigma;
    }
    fl.tables = std::move(per);
    fl.per_channel = true;
    fl.bias = std::move(bias);
}

void fuse_scaling(FusedLookup& producer, double consumer_s_f, int64_t consumer_nf) {
    const double factor = static_cast<double>(consumer_nf - 1) / consumer_s_f;
    for (auto& t : producer.tables)
        for (double& v : t) v *= factor;
    for (double& b : producer.bias) b *= factor;
    producer.grid_output = true;
}

Tensor<float> fused_forward(const FusedLookup& fl, const Tensor<float>& x) {
    kernels::Conv2dGeom g = fl.geom;
    g.n = x.dim(0);
    g.h = x.dim(2);
    g.w = x.dim(3);
    const double inv = static_cast<double>(fl.nf - 1) / fl.s_f;
    std::vector<uint16_t> idx_f(static_cast<size_t>(g.in_numel()));
    for (int64_t i = 0; i < g.in_numel(); ++i)
        idx_f[static_cast<size_t>(i)] =
            static_cast<uint16_t>(feature_index(static_cast<double>(x[i]), inv, fl.nf));

    const int64_t ho = g.h_out(), wo = g.w_out();
    Tensor<float> out(Shape{g.n, g.c_out, ho, wo});
    const int64_t plane = g.h * g.w;
    for (int64_t n = 0; n < g.n; ++n)
        for (int64_t co = 0; co < g.c_out; ++co) {
            const std::vector<double>& tab =
                fl.tables[fl.per_channel ? static_cast<size_t>(co) : 0];
            for (int64_t oh = 0; oh < ho; ++oh)
                for (int64_t ow = 0; ow < wo; ++ow) {
                    double acc = 0.0;
                    for (int64_t ci = 0; ci < g.c_in; ++ci) {
                        const uint16_t* fp = idx_f.data() + (n * g.c_in + ci) * plane;
                        const uint8_t* wp =
                            fl.idx_w.data() + ((co * g.c_in + ci) * g.k) * g.k;
                        for (int64_t ky = 0; ky < g.k; ++ky) {
                            const int64_t ih = oh * g.stride - g.pad + ky * g.dil;
                            const bool rp = ih < 0 || ih >= g.h;
                            for (int64_t kx = 0; kx < g.k; ++kx) {
                                const int64_t iw = ow * g.stride - g.pad + kx * g.dil;
                                const int64_t fi =
                                    (rp || iw < 0 || iw >= g.w) ? 0 : fp[ih * g.w + iw];
                                acc += tab[static_cast<size_t>(fi * fl.nw +
                                                               wp[ky * g.k + kx])];
                            }
                        }
                    }
                    out.at4(n, co, oh, ow) =
                        static_cast<float>(acc + fl.bias[static_cast<size_t>(co)]);
                }
        }
    return out;
}

// ---------------------------------------------------------------------------
// Interpreter layers

Tensor<float> RConv2d::forward(const Tensor<float>& x, OpCounters& b, OpCounters& c) {
    OpCounters& k = segment == Segment::boundary ? b : c;
    kernels::Conv2dGeom g = geom;
    g.n = x.dim(0);
    g.h = x.dim(2);
    g.w = x.dim(3);
    Tensor<float> out(Shape{g.n, g.c_out, g.h_out(), g.w_out()});
    kernels::conv2d_forward(g, x.data(), weight.data(), has_bias ? bias.data() : nullptr,
                            out.data());
    const int64_t macs = g.n * g.macs_per_image();
    k.mac_pairs += macs;
    k.mul += macs;
    k.adds += macs;
    if (has_bias) k.bias_adds += out.numel();
    return out;
}

Tensor<float> RBatchNormEval::forward(const Tensor<float>& x, OpCounters& b, OpCounters& c) {
    OpCounters& k = segment == Segment::boundary ? b : c;
    const int64_t N = x.dim(0), C = x.dim(1), plane = x.dim(2) * x.dim(3);
    Tensor<float> out(x.shape());
    for (int64_t ch = 0; ch < C; ++ch) {
        const double s2 = static_cast<double>(var[ch]) + eps;
        if (s2 <= 0.0) throw numeric_error("batchnorm: non-positive variance + eps");
        const double inv = 1.0 / std::sqrt(s2);
        const double gm = static_cast<double>(gamma[ch]);
        const double bt = static_cast<double>(beta[ch]);
        const double mu = static_cast<double>(mean[ch]);
        for (int64_t n = 0; n < N; ++n) {
            const float* xp = x.data() + (n * C + ch) * plane;
            float* op = out.data() + (n * C + ch) * plane;
            for (int64_t i = 0; i < plane; ++i)
                op[i] = static_cast<float>(gm * ((static_cast<double>(xp[i]) - mu) * inv) + bt);
        }
    }
    k.mul += 2 * x.numel();
    k.adds += 2 * x.numel();
    return out;
}

Tensor<float> RRelu::forward(const Tensor<float>& x, OpCounters& b, OpCounters& c) {
    OpCounters& k = segment == Segment::boundary ? b : c;
    Tensor<float> out(x.shape());
    for (int64_t i = 0; i < x.numel(); ++i) out[i] = x[i] > 0.f ? x[i] : 0.f;
    k.cmps += x.numel();
    return out;
}

Tensor<float> RMaxPool2::forward(const Tensor<float>& x, OpCounters& b, OpCounters& c) {
    OpCounters& k = segment == Segment::boundary ? b : c;
    const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor<float> out(Shape{N, C, H / 2, W / 2});
    for (int64_t n = 0; n < N; ++n)
        for (int64_t ch = 0; ch < C; ++ch) {
            const float* p = x.data() + (n * C + ch) * H * W;
            float* o = out.data() + (n * C + ch) * (H / 2) * (W / 2);
            for (int64_t oh = 0; oh < H / 2; ++oh)
                for (int64_t ow = 0; ow < W / 2; ++ow) {
                    float m0 = std::max(p[2 * oh * W + 2 * ow], p[2 * oh * W + 2 * ow + 1]);
                    float m1 =
                        std::max(p[(2 * oh + 1) * W + 2 * ow], p[(2 * oh + 1) * W + 2 * ow + 1]);
                    o[oh * (W / 2) + ow] = std::max(m0, m1);
                }
        }
    k.cmps += 3 * out.numel();
    return out;
}

Tensor<float> RQuantizeInput::forward(const Tensor<float>& x, OpCounters& b, OpCounters& c) {
    OpCounters& k = segment == Segment::boundary ? b : c;
    Tensor<float> out(x.shape());
    for (int64_t i = 0; i < x.numel(); ++i)
        out[i] = static_cast<float>(feature_index(static_cast<double>(x[i]), inv_grid, nf));
    k.mul += x.numel();
    k.cmps += x.numel();
    return out;
}

Tensor<float> RClipRound::forward(const Tensor<float>& x, OpCounters& b, OpCounters& c) {
    OpCounters& k = segment == Segment::boundary ? b : c;
    Tensor<float> out(x.shape());
    const double hi = static_cast<double>(nf - 1);
    for (int64_t i = 0; i < x.numel(); ++i) {
        const double v = std::clamp(static_cast<double>(x[i]), 0.0, hi);
        out[i] = static_cast<float>(round_half_away(v));
    }
    k.cmps += x.numel();
    return out;
}

Tensor<float> RClipLow::forward(const Tensor<float>& x, OpCounters& b, OpCounters& c) {
    OpCounters& k = segment == Segment::boundary ? b : c;
    Tensor<float> out(x.shape());
    for (int64_t i = 0; i < x.numel(); ++i) out[i] = x[i] > 0.f ? x[i] : 0.f;
    k.cmps += x.numel();
    return out;
}

Tensor<float> RLookup::forward(const Tensor<float>& x, OpCounters& b, OpCounters& c) {
    OpCounters& k = segment == Segment::boundary ? b : c;
    kernels::Conv2dGeom g = geom;
    g.n = x.dim(0);
    g.h = x.dim(2);
    g.w = x.dim(3);
    const int64_t ho = g.h_out(), wo = g.w_out(), plane = g.h * g.w;
    Tensor<float> out(Shape{g.n, g.c_out, ho, wo});
    const int64_t tab_sz = nf * nw;
    for (int64_t n = 0; n < g.n; ++n)
        for (int64_t co = 0; co < g.c_out; ++co) {
            const float* tab = tables.data() + co * tab_sz;
            for (int64_t oh = 0; oh < ho; ++oh)
                for (int64_t ow = 0; ow < wo; ++ow) {
                    double acc = 0.0;
                    for (int64_t ci = 0; ci < g.c_in; ++ci) {
                        const float* fp = x.data() + (n * g.c_in + ci) * plane;
                        const uint8_t* wp = idx_w.data() + ((co * g.c_in + ci) * g.k) * g.k;
                        for (int64_t ky = 0; ky < g.k; ++ky) {
                            const int64_t ih = oh * g.stride - g.pad + ky * g.dil;
                            const bool rp = ih < 0 || ih >= g.h;
                            for (int64_t kx = 0; kx < g.k; ++kx) {
                                const int64_t iw = ow * g.stride - g.pad + kx * g.dil;
                                const int64_t fi =
                                    (rp || iw < 0 || iw >= g.w)
                                        ? 0
                                        : static_cast<int64_t>(fp[ih * g.w + iw]);
                                acc += static_cast<double>(
                                    tab[fi * nw + wp[ky * g.k + kx]]);
                            }
                        }
                    }
                    out.at4(n, co, oh, ow) =
                        static_cast<float>(acc + static_cast<double>(bias[static_cast<size_t>(co)]));
                }
        }
    const int64_t slots = g.n * g.macs_per_image();
    k.mac_pairs += slots;
    k.lookups += slots;
    k.adds += slots;
    k.bias_adds += out.numel();
    return out;
}

Tensor<float> RResBlock::forward(const Tensor<float>& x, OpCounters& b, OpCounters& c) {
    Tensor<float> h = lk1->forward(x, b, c);
    {
        RClipRound cr;
        cr.nf = mid_nf;
        cr.segment = Segment::converted;
        h = cr.forward(h, b, c);
    }
    Tensor<float> y = lk2->forward(h, b, c);
    Tensor<float> skip = identity_skip ? x : proj->forward(x, b, c);
    if (!y.same_shape(skip)) throw shape_error("res_block: skip shape mismatch");
    for (int64_t i = 0; i < y.numel(); ++i) y[i] = y[i] + skip[i];
    c.adds += y.numel();
    if (tail_round) {
        RClipRound cr;
        cr.nf = out_nf;
        cr.segment = Segment::converted;
        return cr.forward(y, b, c);
    }
    RClipLow cl;
    cl.segment = Segment::converted;
    return cl.forward(y, b, c);
}

Tensor<float> RGlobalAvgPool::forward(const Tensor<float>& x, OpCounters& b, OpCounters& c) {
    OpCounters& k = segment == Segment::boundary ? b : c;
    const int64_t N = x.dim(0), C = x.dim(1), plane = x.dim(2) * x.dim(3);
    Tensor<float> out(Shape{N, C});
    for (int64_t n = 0; n < N; ++n)
        for (int64_t ch = 0; ch < C; ++ch) {
            const float* p = x.data() + (n * C + ch) * plane;
            double acc = 0.0;
            for (int64_t i = 0; i < plane; ++i) acc += static_cast<double>(p[i]);
            out[n * C + ch] = static_cast<float>(acc / static_cast<double>(plane));
        }
    k.adds += (plane - 1) * out.numel();
    k.mul += out.numel();
    return out;
}

Tensor<float> RSumPool::forward(const Tensor<float>& x, OpCounters& b, OpCounters& c) {
    OpCounters& k = segment == Segment::boundary ? b : c;
    const int64_t N = x.dim(0), C = x.dim(1), plane = x.dim(2) * x.dim(3);
    Tensor<float> out(Shape{N, C});
    for (int64_t n = 0; n < N; ++n)
        for (int64_t ch = 0; ch < C; ++ch) {
            const float* p = x.data() + (n * C + ch) * plane;
            double acc = 0.0;
            for (int64_t i = 0; i < plane; ++i) acc += static_cast<double>(p[i]);
            out[n * C + ch] = static_cast<float>(acc);
        }
    k.adds += (plane - 1) * out.numel();
    return out;
}

Tensor<float> RLinear::forward(const Tensor<float>& x, OpCounters& b, OpCounters& c) {
    OpCounters& k = segment == Segment::boundary ? b : c;
    const int64_t N = x.dim(0), D = x.dim(1), O = weight.dim(0);
    Tensor<float> out(Shape{N, O});
    for (int64_t n = 0; n < N; ++n)
        for (int64_t o = 0; o < O; ++o) {
            double acc = static_cast<double>(bias[o]);
            const float* xp = x.data() + n * D;
            const float* wp = weight.data() + o * D;
            for (int64_t d = 0; d < D; ++d)
                acc += static_cast<double>(xp[d]) * static_cast<double>(wp[d]);
            out[n * O + o] = static_cast<float>(acc);
        }
    const int64_t macs = N * D * O;
    k.mac_pairs += macs;
    k.mul += macs;
    k.adds += macs;
    k.bias_adds += out.numel();
    return out;
}

Tensor<float> ReparamNet::forward(const Tensor<float>& x, OpCounters& boundary,
                                  OpCounters& converted) {
    Tensor<float> h = x;
    for (auto& l : layers) h = l->forward(h, boundary, converted);
    return h;
}

std::string ConversionReport::text() const {
    std::ostringstream os;
    os << "conversion report\n";
    os << "layer, c_out, table, fused_bytes, shared_f32_bytes, shared_f16_bytes\n";
    for (const auto& l : layers)
        os << l.name << ", " << l.c_out << ", " << l.nf << "x" << l.nw << ", "
           << l.fused_table_bytes << ", " << l.shared_table_bytes_f32 << ", "
           << l.shared_table_bytes_f16 << "\n";
    os << "total fused (per-output-channel) table bytes: " << total_fused_table_bytes << " ("
       << static_cast<double>(total_fused_table_bytes) / 1024.0 << " KiB)\n";
    os << "total shared (one table per layer) bytes at f32: " << total_shared_table_bytes_f32
       << " (" << static_cast<double>(total_shared_table_bytes_f32) / 1024.0 << " KiB)\n";
    os << "total shared bytes at f16: " << total_shared_table_bytes_f16 << " ("
       << static_cast<double>(total_shared_table_bytes_f16) / 1024.0 << " KiB)\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Whole-network conversion

namespace {

std::unique_ptr<RLookup> finalize_lookup(FusedLookup&& fl, ConversionReport& report) {
    auto rl = std::make_unique<RLookup>();
    rl->name = fl.name;
    rl->segment = Segment::converted;
    rl->geom = fl.geom;
    rl->nf = fl.nf;
    rl->nw = fl.nw;
    rl->idx_w = std::move(fl.idx_w);
    const int64_t c_out = fl.geom.c_out;
    rl->tables.resize(static_cast<size_t>(c_out * fl.nf * fl.nw));
    for (int64_t k = 0; k < c_out; ++k) {
        const std::vector<double>& src = fl.tables[fl.per_channel ? static_cast<size_t>(k) : 0];
        for (size_t i = 0; i < src.size(); ++i)
            rl->tables[static_cast<size_t>(k) * src.size() + i] = static_cast<float>(src[i]);
    }
    rl->bias.resize(static_cast<size_t>(c_out));
    for (int64_t k = 0; k < c_out; ++k)
        rl->bias[static_cast<size_t>(k)] = static_cast<float>(fl.bias[static_cast<size_t>(k)]);

    ConversionLayerReport lr;
    lr.name = rl->name;
    lr.c_out = c_out;
    lr.nf = fl.nf;
    lr.nw = fl.nw;
    lr.fused_table_bytes = c_out * fl.nf * fl.nw * 4;
    lr.shared_table_bytes_f32 = fl.nf * fl.nw * 4;
    lr.shared_table_bytes_f16 = fl.nf * fl.nw * 2;
    report.layers.push_back(lr);
    report.total_fused_table_bytes += lr.fused_table_bytes;
    report.total_shared_table_bytes_f32 += lr.shared_table_bytes_f32;
    report.total_shared_table_bytes_f16 += lr.shared_table_bytes_f16;
    return rl;
}

// the next lookup consumer's (s_f, N_f), skipping pooling layers
struct Consumer {
    bool is_lookup = false;
    double s_f = 1.0;
    int64_t nf = 33;
    const LookupConv2dLayer<float>* entry = nullptr;
};

Consumer find_consumer(const std::vector<std::unique_ptr<Layer<float>>>& layers, size_t from) {
    for (size_t j = from; j < layers.size(); ++j) {
        const std::string k = layers[j]->kind();
        if (k == "maxpool2") continue;
        if (k == "lookup_conv2d") {
            const auto* lk = dynamic_cast<const LookupConv2dLayer<float>*>(layers[j].get());
            return {true, lk->current_sf(), lk->table.nf, lk};
        }
        if (k == "residual_block") {
            const auto* rb = dynamic_cast<const ResidualBlockLayer<float>*>(layers[j].get());
            return {true, rb->lk1->current_sf(), rb->lk1->table.nf, rb->lk1.get()};
        }
        break;
    }
    return {};
}

} // namespace

ReparamNet convert_network(Network<float>& net) {
    ReparamNet out;
    out.arch = net.arch;
    auto& L = net.layers;

    bool entered_lookup_segment = false;
    bool grid_tail = false;   // last converted output is in index-grid units
    double grid_tail_s = 1.0; // that grid's scale
    int64_t grid_tail_nf = 33;

    for (size_t i = 0; i < L.size(); ++i) {
        const std::string kind = L[i]->kind();

        if (kind == "conv2d") {
            const auto* cv = dynamic_cast<const Conv2dLayer<float>*>(L[i].get());
            auto rc = std::make_unique<RConv2d>();
            rc->name = cv->name;
            rc->segment = Segment::boundary;
            rc->geom = cv->geom;
            rc->weight = cv->weight->value;
            if (cv->bias) {
                rc->bias = cv->bias->value;
                rc->has_bias = true;
            }
            out.layers.push_back(std::move(rc));
            continue;
        }

        if (kind == "batchnorm2d") {
            // batch norms directly after a lookup layer are consumed by fusion
            const auto* bn = dynamic_cast<const BatchNorm2dLayer<float>*>(L[i].get());
            auto rb = std::make_unique<RBatchNormEval>();
            rb->name = bn->name;
            rb->segment = Segment::boundary;
            rb->gamma = bn->gamma->value;
            rb->beta = bn->beta->value;
            rb->mean = bn->running_mean;
            rb->var = bn->running_var;
            rb->eps = bn->eps;
            out.layers.push_back(std::move(rb));
            continue;
        }

        if (kind == "relu") {
            auto rr = std::make_unique<RRelu>();
            rr->name = L[i]->name;
            rr->segment = entered_lookup_segment ? Segment::converted : Segment::boundary;
            out.layers.push_back(std::move(rr));
            continue;
        }

        if (kind == "maxpool2") {
            auto rp = std::make_unique<RMaxPool2>();
            rp->name = L[i]->name;
            rp->segment = entered_lookup_segment ? Segment::converted : Segment::boundary;
            out.layers.push_back(std::move(rp));
            continue;
        }

        if (kind == "flatten" || kind == "unflatten") {
            // shape-only; the interpreter works on flat data, so reuse the
            // converted tensor directly via a pass-through
            continue;
        }

        if (kind == "lookup_conv2d" || kind == "residual_block") {
            const LookupConv2dLayer<float>* entry =
                kind == "lookup_conv2d"
                    ? dynamic_cast<const LookupConv2dLayer<float>*>(L[i].get())
                    : dynamic_cast<const ResidualBlockLayer<float>*>(L[i].get())->lk1.get();
            if (!entered_lookup_segment) {
                auto rq = std::make_unique<RQuantizeInput>();
                rq->name = entry->name + ".input_quantize";
                rq->segment = Segment::boundary;
                rq->nf = entry->table.nf;
                rq->inv_grid =
                    static_cast<double>(entry->table.nf - 1) / entry->current_sf();
                out.layers.push_back(std::move(rq));
                entered_lookup_segment = true;
            }
        }

        if (kind == "lookup_conv2d") {
            auto* lk = dynamic_cast<LookupConv2dLayer<float>*>(L[i].get());
            FusedLookup fl = fuse_rescale(*lk);
            size_t j = i + 1;
            if (j < L.size() && L[j]->kind() == "batchnorm2d") {
                fuse_batchnorm(fl, *dynamic_cast<const BatchNorm2dLayer<float>*>(L[j].get()));
                ++j;
            } else {
                // keep a per-channel layout even without BN
                std::vector<std::vector<double>> per(static_cast<size_t>(fl.geom.c_out),
                                                     fl.tables[0]);
                fl.tables = std::move(per);
                fl.per_channel = true;
            }
            bool had_relu = false;
            if (j < L.size() && L[j]->kind() == "relu") {
                had_relu = true;
                ++j;
            }
            const Consumer next = find_consumer(L, j);
            if (next.is_lookup) {
                if (!had_relu)
                    throw std::runtime_error("convert_network: unsupported topology at " +
                                             lk->name + " (lookup consumer without ReLU)");
                fuse_scaling(fl, next.s_f, next.nf);
                out.layers.push_back(finalize_lookup(std::move(fl), out.report));
                auto cr = std::make_unique<RClipRound>();
                cr->name = lk->name + ".clip_round";
                cr->segment = Segment::converted;
                cr->nf = next.nf;
                out.layers.push_back(std::move(cr));
                // pools between this layer and the consumer run on indices
                for (size_t p = j; p < L.size() && L[p]->kind() == "maxpool2"; ++p) {
                    auto rp = std::make_unique<RMaxPool2>();
                    rp->name = L[p]->name;
                    rp->segment = Segment::converted;
                    out.layers.push_back(std::move(rp));
                }
            } else {
                // boundary tail: stay in feature units, keep the ReLU explicit
                out.layers.push_back(finalize_lookup(std::move(fl), out.report));
                if (had_relu) {
                    auto rr = std::make_unique<RRelu>();
                    rr->name = lk->name + ".relu";
                    rr->segment = Segment::converted;
                    out.layers.push_back(std::move(rr));
                }
            }
            // skip the layers we fused or re-emitted
            i = j - 1;
            // skip pools we already emitted
            while (i + 1 < L.size() && L[i + 1]->kind() == "maxpool2" &&
                   find_consumer(L, i + 1).is_lookup)
                ++i;
            continue;
        }

        if (kind == "residual_block") {
            auto* rb = dynamic_cast<ResidualBlockLayer<float>*>(L[i].get());
            if (!rb->proj && !rb->scaled_skip)
                throw std::runtime_error(
                    "convert_network: conversion refused at " + rb->name +
                    ": identity skip was trained without the residual scale treatment, "
                    "converted outputs would diverge");
            const Consumer next = find_consumer(L, i + 1);
            const double out_s = next.is_lookup ? next.s_f : rb->lk1->current_sf();
            const int64_t out_nf = next.is_lookup ? next.nf : rb->lk1->table.nf;
            if (rb->scaled_skip && !rb->proj) {
                // verify the training graph scaled the skip into exactly this grid
                const NodePtr<float> expect =
                    next.is_lookup ? next.entry->e_f : rb->lk1->e_f;
                if (rb->next_entry_ef.get() != expect.get())
                    throw std::runtime_error(
                        "convert_network: conversion refused at " + rb->name +
                        ": residual scale flag does not match the consumer's feature grid");
            }

            auto rblk = std::make_unique<RResBlock>();
            rblk->name = rb->name;
            rblk->segment = Segment::converted;
            rblk->identity_skip = !rb->proj;
            rblk->mid_nf = rb->lk2->table.nf;
            rblk->out_nf = out_nf;
            rblk->tail_round = next.is_lookup;

            FusedLookup f1 = fuse_rescale(*rb->lk1);
            fuse_batchnorm(f1, *rb->bn1);
            fuse_scaling(f1, rb->lk2->current_sf(), rb->lk2->table.nf);
            rblk->lk1 = finalize_lookup(std::move(f1), out.report);

            FusedLookup f2 = fuse_rescale(*rb->lk2);
            fuse_batchnorm(f2, *rb->bn2);
            fuse_scaling(f2, out_s, out_nf);
            rblk->lk2 = finalize_lookup(std::move(f2), out.report);

            if (rb->proj) {
                FusedLookup fp = fuse_rescale(*rb->proj);
                fuse_batchnorm(fp, *rb->bnp);
                fuse_scaling(fp, out_s, out_nf);
                rblk->proj = finalize_lookup(std::move(fp), out.report);
            }

            if (!next.is_lookup) {
                grid_tail = true;
                grid_tail_s = rb->lk1->current_sf();
                grid_tail_nf = rb->lk1->table.nf;
            }
            out.layers.push_back(std::move(rblk));
            continue;
        }

        if (kind == "global_avgpool") {
            if (grid_tail) {
                auto sp = std::make_unique<RSumPool>();
                sp->name = L[i]->name;
                sp->segment = Segment::converted;
                out.layers.push_back(std::move(sp));
            } else {
                auto gp = std::make_unique<RGlobalAvgPool>();
                gp->name = L[i]->name;
                gp->segment = Segment::boundary;
                out.layers.push_back(std::move(gp));
            }
            continue;
        }

        if (kind == "linear") {
            const auto* ln = dynamic_cast<const LinearLayer<float>*>(L[i].get());
            auto rl = std::make_unique<RLinear>();
            rl->name = ln->name;
            rl->segment = Segment::boundary;
            rl->weight = ln->weight->value;
            rl->bias = ln->bias->value;
            if (grid_tail) {
                // fold the grid step and the average-pool divisor into the
                // classifier so the converted segment needs no multiplications
                const Shape in_probe{1, 3, net.arch.in_hw, net.arch.in_hw};
                // plane of the tensor entering global average pooling
                int64_t plane = 1;
                Shape cur = in_probe;
                for (const auto& lay : L) {
                    if (lay->kind() == "global_avgpool") {
                        plane = cur[2] * cur[3];
                        break;
                    }
                    cur = lay->infer(cur);
                }
                const double fold = grid_tail_s /
                                    (static_cast<double>(grid_tail_nf - 1) *
                                     static_cast<double>(plane));
                for (int64_t t = 0; t < rl->weight.numel(); ++t)
                    rl->weight[t] = static_cast<float>(static_cast<double>(rl->weight[t]) * fold);
                grid_tail = false;
            }
            out.layers.push_back(std::move(rl));
            continue;
        }

        throw std::runtime_error("convert_network: unsupported layer " + L[i]->name + " (" +
                                 kind + ")");
    }
    return out;
}

} // namespace lut
