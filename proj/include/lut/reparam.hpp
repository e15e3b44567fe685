#pragma once

#include "lut/net.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

// Post-training rewrite of a lookup network into the multiplication-free
// inference form: the re-scaling factor, the following batch norm, and the
// next layer's scaling step are folded into per-output-channel tables, kernel
// weights become stored integer indices, and ReLU + scaling + discretization
// collapse into a clip-and-round on integer-valued activation maps.
namespace lut {

// Operation counters, kept per segment so the audit can prove the converted
// part executes zero multiplications while preserved boundary layers (first
// conv, final classifier, input quantization) are reported separately.
struct OpCounters {
    int64_t mul = 0;
    int64_t mac_pairs = 0; // one lookup+add (converted) or mul+add (preserved)
    int64_t lookups = 0;
    int64_t adds = 0;
    int64_t bias_adds = 0;
    int64_t cmps = 0;

    void merge(const OpCounters& o) {
        mul += o.mul;
        mac_pairs += o.mac_pairs;
        lookups += o.lookups;
        adds += o.adds;
        bias_adds += o.bias_adds;
        cmps += o.cmps;
    }
};

enum class Segment { boundary, converted };

// Intermediate fused form of one lookup layer while the fusion steps run.
// Tables stay in double until the final interpreter/file quantizes to f32.
struct FusedLookup {
    std::string name;
    kernels::Conv2dGeom geom;
    int64_t nf = 0, nw = 0;
    std::vector<uint8_t> idx_w;         // precomputed offline from w, s_w
    std::vector<std::vector<double>> tables; // 1 entry pre-BN, C_out after BN fusion
    bool per_channel = false;
    std::vector<double> bias;           // per output channel
    bool grid_output = false;           // true once the consumer's scaling step is folded in
    double s_w = 1.0, s_f = 1.0;        // the layer's own scales (s_f defines its input grid)
};

// Step 1: merge the re-scaling step into the table (s_w s_f T), drop it from
// the graph, and freeze the weight indices.
FusedLookup fuse_rescale(const LookupConv2dLayer<float>& layer);

// Step 2: fold a frozen batch norm into per-output-channel tables and biases.
void fuse_batchnorm(FusedLookup& fl, const BatchNorm2dLayer<float>& bn);

// Step 3: fold the consumer's scaling step (N_f-1)/s_f into the producer's
// table; the producer's ReLU becomes clip[0, N_f-1] + round downstream.
void fuse_scaling(FusedLookup& producer, double consumer_s_f, int64_t consumer_nf);

// Evaluates a FusedLookup on raw feature inputs (quantizing on the layer's own
// grid), for the step-by-step fusion equivalence tests.
Tensor<float> fused_forward(const FusedLookup& fl, const Tensor<float>& x);

// ---------------------------------------------------------------------------
// Converted-network interpreter

class RLayer {
public:
    virtual ~RLayer() = default;
    virtual Tensor<float> forward(const Tensor<float>& x, OpCounters& boundary,
                                  OpCounters& converted) = 0;
    virtual std::string kind() const = 0;
    std::string name;
    Segment segment = Segment::converted;
};

struct RTensorRef {
    std::string name;
    const void* data;
    int64_t numel;
    bool is_u8; // else f32
};

class RConv2d : public RLayer {
public:
    kernels::Conv2dGeom geom;
    Tensor<float> weight, bias;
    bool has_bias = false;
    Tensor<float> forward(const Tensor<float>& x, OpCounters& b, OpCounters& c) override;
    std::string kind() const override { return "conv2d"; }
};

class RBatchNormEval : public RLayer {
public:
    Tensor<float> gamma, beta, mean, var;
    double eps = 1e-5;
    Tensor<float> forward(const Tensor<float>& x, OpCounters& b, OpCounters& c) override;
    std::string kind() const override { return "batchnorm"; }
};

class RRelu : public RLayer {
public:
    Tensor<float> forward(const Tensor<float>& x, OpCounters& b, OpCounters& c) override;
    std::string kind() const override { return "relu"; }
};

class RMaxPool2 : public RLayer {
public:
    Tensor<float> forward(const Tensor<float>& x, OpCounters& b, OpCounters& c) override;
    std::string kind() const override { return "maxpool2"; }
};

// boundary scaling step: idx = round(clip(f * (N-1)/s_f, 0, N-1))
class RQuantizeInput : public RLayer {
public:
    double inv_grid = 1.0;
    int64_t nf = 33;
    Tensor<float> forward(const Tensor<float>& x, OpCounters& b, OpCounters& c) override;
    std::string kind() const override { return "quantize_input"; }
};

// clip to [0, N-1] and round; replaces ReLU + scaling between lookup layers
class RClipRound : public RLayer {
public:
    int64_t nf = 33;
    Tensor<float> forward(const Tensor<float>& x, OpCounters& b, OpCounters& c) override;
    std::string kind() const override { return "clip_round"; }
};

// clip low at 0 only (boundary tail of a residual chain, stays continuous)
class RClipLow : public RLayer {
public:
    Tensor<float> forward(const Tensor<float>& x, OpCounters& b, OpCounters& c) override;
    std::string kind() const override { return "clip_low"; }
};

// the multiplication-free layer: per-channel fused table gathers + adds
class RLookup : public RLayer {
public:
    kernels::Conv2dGeom geom;
    int64_t nf = 0, nw = 0;
    std::vector<uint8_t> idx_w;
    std::vector<float> tables; // C_out * nf * nw (always stored per channel)
    std::vector<float> bias;
    Tensor<float> forward(const Tensor<float>& x, OpCounters& b, OpCounters& c) override;
    std::string kind() const override { return "lookup"; }
};

// residual block in index domain: lk1 -> clip_round -> lk2 -> +skip -> tail
class RResBlock : public RLayer {
public:
    std::unique_ptr<RLookup> lk1, lk2, proj;
    int64_t mid_nf = 33;   // grid between lk1 and lk2
    int64_t out_nf = 33;   // grid of the block output
    bool identity_skip = true;
    bool tail_round = true; // false for the boundary block (stays continuous)
    Tensor<float> forward(const Tensor<float>& x, OpCounters& b, OpCounters& c) override;
    std::string kind() const override { return "res_block"; }
};

class RGlobalAvgPool : public RLayer {
public:
    Tensor<float> forward(const Tensor<float>& x, OpCounters& b, OpCounters& c) override;
    std::string kind() const override { return "global_avgpool"; }
};

// spatial sum (the average divisor lives in the folded classifier weights)
class RSumPool : public RLayer {
public:
    Tensor<float> forward(const Tensor<float>& x, OpCounters& b, OpCounters& c) override;
    std::string kind() const override { return "sum_pool"; }
};

class RLinear : public RLayer {
public:
    Tensor<float> weight, bias;
    Tensor<float> forward(const Tensor<float>& x, OpCounters& b, OpCounters& c) override;
    std::string kind() const override { return "linear"; }
};

struct ConversionLayerReport {
    std::string name;
    int64_t c_out = 0;
    int64_t nf = 0, nw = 0;
    int64_t fused_table_bytes = 0;      // C_out * nf * nw * 4
    int64_t shared_table_bytes_f32 = 0; // nf * nw * 4
    int64_t shared_table_bytes_f16 = 0; // nf * nw * 2
};

struct ConversionReport {
    std::vector<ConversionLayerReport> layers;
    int64_t total_fused_table_bytes = 0;
    int64_t total_shared_table_bytes_f32 = 0;
    int64_t total_shared_table_bytes_f16 = 0;
    std::string text() const;
};

class ReparamNet {
public:
    std::vector<std::unique_ptr<RLayer>> layers;
    ArchConfig arch;
    ConversionReport report;

    Tensor<float> forward(const Tensor<float>& x, OpCounters& boundary, OpCounters& converted);
    Tensor<float> forward(const Tensor<float>& x) {
        OpCounters b, c;
        return forward(x, b, c);
    }
};

// Applies the three fusions across the supported topologies. Throws on
// unsupported layer sequences (naming the layer) and on residual blocks built
// without the scaled-skip training treatment.
ReparamNet convert_network(Network<float>& net);

} // namespace lut
