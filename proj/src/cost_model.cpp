#include "lut/cost_model.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace lut::cost {

const char* processor_name(Processor p) {
    return p == Processor::cortex_a7 ? "Cortex-A7" : "Cortex-A15";
}

Processor parse_processor(const std::string& s) {
    if (s == "a7" || s == "A7" || s == "cortex-a7") return Processor::cortex_a7;
    if (s == "a15" || s == "A15" || s == "cortex-a15") return Processor::cortex_a15;
    throw std::invalid_argument("unknown processor: " + s);
}

NetworkKind parse_network_kind(const std::string& s) {
    if (s == "baseline") return NetworkKind::baseline;
    if (s == "lookup") return NetworkKind::lookup;
    if (s == "lookup-4bit" || s == "lookup4bit") return NetworkKind::lookup_4bit;
    if (s == "adder") return NetworkKind::adder;
    if (s == "bnn") return NetworkKind::bnn;
    if (s == "shift") return NetworkKind::shift;
    throw std::invalid_argument("unknown network kind: " + s);
}

const char* network_kind_name(NetworkKind k) {
    switch (k) {
        case NetworkKind::baseline: return "baseline";
        case NetworkKind::lookup: return "lookup";
        case NetworkKind::lookup_4bit: return "lookup-4bit";
        case NetworkKind::adder: return "adder";
        case NetworkKind::bnn: return "bnn";
        case NetworkKind::shift: return "shift";
    }
    return "?";
}

const OpCostTable& OpCostTable::defaults() {
    static const OpCostTable t = [] {
        OpCostTable t;
        // energies in pJ, latencies in cycles at 1 GHz
        auto set = [&](Processor p, OpKind k, double e, int64_t l, bool known = true) {
            t.set(p, k, OpCost{e, l, known});
        };
        set(Processor::cortex_a7, OpKind::float_add, 199, 4);
        set(Processor::cortex_a7, OpKind::float_mul, 203, 4);
        set(Processor::cortex_a7, OpKind::add_4bit, 82, 1);
        set(Processor::cortex_a7, OpKind::mul_4bit, 146, 3);
        set(Processor::cortex_a7, OpKind::xnor, 72, 1);
        set(Processor::cortex_a7, OpKind::shift, 0, 1, false);
        set(Processor::cortex_a7, OpKind::lookup, 150, 1);
        set(Processor::cortex_a15, OpKind::float_add, 1471, 5);
        set(Processor::cortex_a15, OpKind::float_mul, 1714, 5);
        set(Processor::cortex_a15, OpKind::add_4bit, 432, 1);
        set(Processor::cortex_a15, OpKind::mul_4bit, 846, 3);
        set(Processor::cortex_a15, OpKind::xnor, 394, 1);
        set(Processor::cortex_a15, OpKind::shift, 0, 1, false);
        set(Processor::cortex_a15, OpKind::lookup, 452, 1);
        return t;
    }();
    return t;
}

OpCost OpCostTable::get(Processor p, OpKind k) const {
    return table_[static_cast<int>(p)][static_cast<int>(k)];
}

void OpCostTable::set(Processor p, OpKind k, OpCost c) {
    if (c.energy_known && c.energy_pj <= 0.0)
        throw std::invalid_argument("op cost table: energies must be positive");
    if (c.latency_cycles <= 0)
        throw std::invalid_argument("op cost table: latencies must be positive");
    table_[static_cast<int>(p)][static_cast<int>(k)] = c;
}

int64_t CostProfile::included_macs() const {
    int64_t total = 0;
    for (const auto& l : layers)
        if (l.included) total += l.macs;
    return total;
}

int64_t CostProfile::macs_m() const {
    return static_cast<int64_t>(
        std::llround(static_cast<double>(included_macs()) / 1048576.0));
}

CostEstimate estimate(const CostProfile& profile, NetworkKind kind, Processor proc,
                      const OpCostTable& costs) {
    OpKind op1, op2;
    switch (kind) {
        case NetworkKind::baseline:
            op1 = OpKind::float_mul;
            op2 = OpKind::float_add;
            break;
        case NetworkKind::lookup:
            op1 = OpKind::lookup;
            op2 = OpKind::float_add;
            break;
        case NetworkKind::lookup_4bit:
            op1 = OpKind::lookup;
            op2 = OpKind::add_4bit;
            break;
        case NetworkKind::adder:
            op1 = OpKind::float_add;
            op2 = OpKind::float_add;
            break;
        case NetworkKind::bnn:
            op1 = OpKind::xnor;
            op2 = OpKind::float_add;
            break;
        case NetworkKind::shift:
            op1 = OpKind::shift;
            op2 = OpKind::float_add;
            break;
        default:
            throw std::invalid_argument("estimate: unknown network kind");
    }
    const OpCost c1 = costs.get(proc, op1);
    const OpCost c2 = costs.get(proc, op2);
    const double macs = static_cast<double>(profile.macs_m()) * 1e6;
    CostEstimate e;
    e.energy_known = c1.energy_known && c2.energy_known;
    e.energy_mj = e.energy_known ? macs * (c1.energy_pj + c2.energy_pj) * 1e-9 : 0.0;
    e.latency_cycles =
        static_cast<int64_t>(macs) * (c1.latency_cycles + c2.latency_cycles);
    return e;
}

CostProfile profile_from_shapes(const std::string& network,
                                const std::vector<LayerShapeInfo>& infos) {
    CostProfile p;
    p.network = network;
    int64_t first = -1, last = -1;
    for (size_t i = 0; i < infos.size(); ++i) {
        if (!infos[i].countable) continue;
        if (first < 0) first = static_cast<int64_t>(i);
        last = static_cast<int64_t>(i);
    }
    if (first < 0) return p;
    for (size_t i = 0; i < infos.size(); ++i) {
        if (!infos[i].countable) continue;
        LayerCost lc;
        lc.name = infos[i].name;
        lc.kind = infos[i].kind;
        lc.macs = infos[i].macs_per_image;
        lc.included = static_cast<int64_t>(i) != first && static_cast<int64_t>(i) != last;
        p.layers.push_back(std::move(lc));
    }
    return p;
}

CostProfile reference_profile(const std::string& arch) {
    CostProfile p;
    p.network = arch;
    auto add = [&](const std::string& name, int64_t hw_out, int64_t c_out, int64_t c_in,
                   int64_t k, bool included) {
        LayerCost lc;
        lc.name = name;
        lc.kind = "conv2d";
        lc.macs = hw_out * hw_out * c_out * c_in * k * k;
        lc.included = included;
        p.layers.push_back(std::move(lc));
    };
    if (arch == "resnet20") {
        add("conv1", 32, 16, 3, 3, false);
        for (int b = 0; b < 3; ++b) {
            add("s1.b" + std::to_string(b) + ".conv1", 32, 16, 16, 3, true);
            add("s1.b" + std::to_string(b) + ".conv2", 32, 16, 16, 3, true);
        }
        add("s2.b0.conv1", 16, 32, 16, 3, true);
        add("s2.b0.conv2", 16, 32, 32, 3, true);
        add("s2.b0.proj", 16, 32, 16, 1, true);
        for (int b = 1; b < 3; ++b) {
            add("s2.b" + std::to_string(b) + ".conv1", 16, 32, 32, 3, true);
            add("s2.b" + std::to_string(b) + ".conv2", 16, 32, 32, 3, true);
        }
        add("s3.b0.conv1", 8, 64, 32, 3, true);
        add("s3.b0.conv2", 8, 64, 64, 3, true);
        add("s3.b0.proj", 8, 64, 32, 1, true);
        for (int b = 1; b < 3; ++b) {
            add("s3.b" + std::to_string(b) + ".conv1", 8, 64, 64, 3, true);
            add("s3.b" + std::to_string(b) + ".conv2", 8, 64, 64, 3, true);
        }
        LayerCost fc;
        fc.name = "fc";
        fc.kind = "linear";
        fc.macs = 64 * 10;
        fc.included = false;
        p.layers.push_back(fc);
        return p;
    }
    if (arch == "vggsmall") {
        add("conv1", 32, 128, 3, 3, false);
        add("conv2", 32, 128, 128, 3, true);
        add("conv3", 16, 256, 128, 3, true);
        add("conv4", 16, 256, 256, 3, true);
        add("conv5", 8, 512, 256, 3, true);
        add("conv6", 8, 512, 512, 3, true);
        LayerCost fc;
        fc.name = "fc";
        fc.kind = "linear";
        fc.macs = 512 * 4 * 4 * 10;
        fc.included = false;
        p.layers.push_back(fc);
        return p;
    }
    throw std::invalid_argument("unknown reference architecture: " + arch);
}

TableMemory table_memory(int64_t nf, int64_t nw, int64_t bytes_per_entry,
                         const std::vector<int64_t>& c_out_per_layer) {
    if (bytes_per_entry < 1)
        throw std::invalid_argument("table_memory: bytes per entry must be >= 1");
    TableMemory m;
    m.per_layer_bytes = nf * nw * bytes_per_entry;
    for (int64_t c : c_out_per_layer) {
        m.shared_total_bytes += m.per_layer_bytes;
        m.fused_total_bytes += c * m.per_layer_bytes;
    }
    return m;
}

std::string cost_summary(const CostProfile& profile, const std::vector<NetworkKind>& kinds) {
    std::ostringstream os;
    os << "network, kind, #Ops, energy_a7_mj, energy_a15_mj, latency_a7_cycles, "
          "latency_a15_cycles\n";
    for (NetworkKind k : kinds) {
        const auto a7 = estimate(profile, k, Processor::cortex_a7);
        const auto a15 = estimate(profile, k, Processor::cortex_a15);
        os << profile.network << ", " << network_kind_name(k) << ", " << profile.ops_m() << "M, ";
        if (a7.energy_known)
            os << std::fixed << std::setprecision(1) << a7.energy_mj << ", " << a15.energy_mj;
        else
            os << "n/a, n/a";
        os << ", " << a7.latency_cycles / 1000000 << "M, " << a15.latency_cycles / 1000000
           << "M\n";
    }
    return os.str();
}

std::string per_layer_csv(const CostProfile& profile) {
    std::ostringstream os;
    os << "layer, kind, macs, included\n";
    for (const auto& l : profile.layers)
        os << l.name << ", " << l.kind << ", " << l.macs << ", " << (l.included ? 1 : 0) << "\n";
    return os.str();
}

} // namespace lut::cost
