#pragma once

#include "lut/net.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

// Analytical per-operation energy/latency model for Cortex-A7/Cortex-A15.
// A MAC pair counts as two operations (one multiply-like, one add-like).
// Printed "M" op counts follow the reference-table convention: raw counts are
// mebi-quantized (round(raw / 2^20)) and the quantized value is then costed
// as a decimal million. That convention reproduces the reference energy and
// latency figures to their printed precision.
namespace lut::cost {

enum class Processor { cortex_a7, cortex_a15 };
enum class OpKind { float_add, float_mul, add_4bit, mul_4bit, xnor, shift, lookup };
enum class NetworkKind { baseline, lookup, lookup_4bit, adder, bnn, shift };

const char* processor_name(Processor p);
Processor parse_processor(const std::string& s);
NetworkKind parse_network_kind(const std::string& s);
const char* network_kind_name(NetworkKind k);

struct OpCost {
    double energy_pj = 0.0; // NaN-free; energy_known=false for shift
    int64_t latency_cycles = 0;
    bool energy_known = true;
};

class OpCostTable {
public:
    static const OpCostTable& defaults();
    OpCost get(Processor p, OpKind k) const;
    void set(Processor p, OpKind k, OpCost c);

private:
    OpCost table_[2][7] = {};
};

struct LayerCost {
    std::string name;
    std::string kind;
    int64_t macs = 0;      // per image
    bool included = true;  // first/last layers and BN are excluded
};

struct CostProfile {
    std::string network;
    std::vector<LayerCost> layers;

    int64_t included_macs() const;
    // mebi-quantized count in "M" units
    int64_t macs_m() const;
    int64_t ops_m() const { return 2 * macs_m(); }
};

struct CostEstimate {
    double energy_mj = 0.0;
    int64_t latency_cycles = 0;
    bool energy_known = true;
};

// energy = MACs * (e_op1 + e_op2), latency = MACs * (l_op1 + l_op2); serial,
// no pipelining. MACs enter as macs_m() * 1e6.
CostEstimate estimate(const CostProfile& profile, NetworkKind kind, Processor proc,
                      const OpCostTable& costs = OpCostTable::defaults());

// Profile from resolved layer shapes: conv/lookup/linear layers count
// H_out*W_out*C_out*C_in*k^2 per image, BN/activations are free, and the
// first and last countable layers are excluded.
CostProfile profile_from_shapes(const std::string& network,
                                const std::vector<LayerShapeInfo>& infos);

// Built-in reference topologies ("resnet20", "vggsmall") at 32x32 input.
CostProfile reference_profile(const std::string& arch);

struct TableMemory {
    int64_t per_layer_bytes = 0;     // N_f*N_w*bytes_per_entry
    int64_t shared_total_bytes = 0;  // per-layer tables summed over layers
    int64_t fused_total_bytes = 0;   // per-output-channel tables summed
};

TableMemory table_memory(int64_t nf, int64_t nw, int64_t bytes_per_entry,
                         const std::vector<int64_t>& c_out_per_layer);

// Table-5-style summary rows for a profile.
std::string cost_summary(const CostProfile& profile,
                         const std::vector<NetworkKind>& kinds);
std::string per_layer_csv(const CostProfile& profile);

} // namespace lut::cost
