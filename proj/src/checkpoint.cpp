#include "lut/checkpoint.hpp"

#include "lut/config.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>

// Payload arrays are raw little-endian bytes (this artifact targets
// little-endian hosts; the header records dtype and element counts).
namespace lut {

using nlohmann::json;

namespace {

constexpr uint8_t kFormatVersion = 1;

struct PayloadRef {
    std::string name;
    std::string dtype; // f32 | f64 | u8
    const void* data;
    int64_t numel;
};

int64_t dtype_size(const std::string& d) {
    if (d == "f32") return 4;
    if (d == "f64") return 8;
    if (d == "u8") return 1;
    throw std::runtime_error("model file: unknown dtype " + d);
}

void write_container(const std::string& path, json header,
                     const std::vector<PayloadRef>& payload) {
    json tensors = json::array();
    for (const auto& p : payload)
        tensors.push_back(json{{"name", p.name}, {"dtype", p.dtype}, {"numel", p.numel}});
    header["tensors"] = tensors;
    const std::string hs = header.dump();

    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("model file: cannot open " + tmp);
        f.put(static_cast<char>(kFormatVersion));
        const uint32_t len = static_cast<uint32_t>(hs.size());
        uint8_t lenb[4] = {static_cast<uint8_t>(len & 0xff), static_cast<uint8_t>((len >> 8) & 0xff),
                           static_cast<uint8_t>((len >> 16) & 0xff),
                           static_cast<uint8_t>((len >> 24) & 0xff)};
        f.write(reinterpret_cast<const char*>(lenb), 4);
        f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
        for (const auto& p : payload)
            f.write(reinterpret_cast<const char*>(p.data), p.numel * dtype_size(p.dtype));
        if (!f) throw std::runtime_error("model file: write failure on " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

struct Container {
    json header;
    std::vector<uint8_t> payload;
    std::map<std::string, std::pair<int64_t, int64_t>> offsets; // name -> (offset, bytes)
    std::map<std::string, std::string> dtypes;
};

Container read_container(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("model file: cannot open " + path);
    const int version = f.get();
    if (version != kFormatVersion)
        throw std::runtime_error("model file: unsupported format version " +
                                 std::to_string(version));
    uint8_t lenb[4];
    f.read(reinterpret_cast<char*>(lenb), 4);
    const uint32_t len = static_cast<uint32_t>(lenb[0]) | (static_cast<uint32_t>(lenb[1]) << 8) |
                         (static_cast<uint32_t>(lenb[2]) << 16) |
                         (static_cast<uint32_t>(lenb[3]) << 24);
    std::string hs(len, '\0');
    f.read(hs.data(), len);
    if (!f) throw std::runtime_error("model file: truncated header in " + path);
    Container c;
    c.header = json::parse(hs);
    int64_t off = 0;
    for (const auto& t : c.header.at("tensors")) {
        const std::string name = t.at("name");
        const std::string dtype = t.at("dtype");
        const int64_t numel = t.at("numel");
        c.offsets[name] = {off, numel * dtype_size(dtype)};
        c.dtypes[name] = dtype;
        off += numel * dtype_size(dtype);
    }
    c.payload.resize(static_cast<size_t>(off));
    if (off > 0) f.read(reinterpret_cast<char*>(c.payload.data()), off);
    if (!f) throw std::runtime_error("model file: truncated payload in " + path);
    return c;
}

void copy_f32(const Container& c, const std::string& name, Tensor<float>& dst) {
    auto it = c.offsets.find(name);
    if (it == c.offsets.end()) throw std::runtime_error("model file: missing tensor " + name);
    if (c.dtypes.at(name) != "f32" || it->second.second != dst.numel() * 4)
        throw std::runtime_error("model file: tensor " + name + " has unexpected size/dtype");
    std::memcpy(dst.data(), c.payload.data() + it->second.first,
                static_cast<size_t>(it->second.second));
}

} // namespace

// ---------------------------------------------------------------------------

void save_checkpoint(const std::string& path, Network<float>& net, int64_t step) {
    json header;
    header["format"] = "lutnet-checkpoint";
    header["arch"] = arch_to_json(net.arch);
    header["step"] = step;
    json scales = json::object();
    for (auto* lk : net.lookup_layers()) scales[lk->name] = lk->scales_initialized;
    header["scales_initialized"] = scales;

    std::vector<PayloadRef> payload;
    for (const auto& p : net.params())
        payload.push_back({p.name, "f32", p.node->value.data(), p.node->value.numel()});
    for (const auto& b : net.buffers())
        payload.push_back({b.name, "f32", b.tensor->data(), b.tensor->numel()});
    write_container(path, std::move(header), payload);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    Container c = read_container(path);
    if (c.header.at("format") != "lutnet-checkpoint")
        throw std::runtime_error("model file: " + path + " is not a training checkpoint (format " +
                                 c.header.at("format").get<std::string>() + ")");
    LoadedCheckpoint out;
    Rng rng(0);
    out.net = build_network<float>(arch_from_json(c.header.at("arch")), rng);
    out.step = c.header.at("step");
    for (const auto& p : out.net.params()) copy_f32(c, p.name, p.node->value);
    for (const auto& b : out.net.buffers()) copy_f32(c, b.name, *b.tensor);
    const json& scales = c.header.at("scales_initialized");
    for (auto* lk : out.net.lookup_layers())
        if (scales.contains(lk->name)) lk->scales_initialized = scales.at(lk->name);
    return out;
}

// ---------------------------------------------------------------------------

namespace {

json geom_to_json(const kernels::Conv2dGeom& g) {
    return json{{"c_in", g.c_in}, {"c_out", g.c_out}, {"k", g.k},
                {"stride", g.stride}, {"pad", g.pad}, {"dil", g.dil}};
}

kernels::Conv2dGeom geom_from_json(const json& j) {
    kernels::Conv2dGeom g{};
    g.c_in = j.at("c_in");
    g.c_out = j.at("c_out");
    g.k = j.at("k");
    g.stride = j.at("stride");
    g.pad = j.at("pad");
    g.dil = j.at("dil");
    return g;
}

json lookup_to_json(const RLookup& l, const std::string& prefix,
                    std::vector<PayloadRef>& payload) {
    payload.push_back({prefix + ".idx_w", "u8", l.idx_w.data(),
                       static_cast<int64_t>(l.idx_w.size())});
    payload.push_back({prefix + ".tables", "f32", l.tables.data(),
                       static_cast<int64_t>(l.tables.size())});
    payload.push_back({prefix + ".bias", "f32", l.bias.data(),
                       static_cast<int64_t>(l.bias.size())});
    return json{{"kind", "lookup"}, {"name", l.name}, {"geom", geom_to_json(l.geom)},
                {"nf", l.nf},       {"nw", l.nw},     {"prefix", prefix}};
}

std::unique_ptr<RLookup> lookup_from_json(const json& j, const Container& c) {
    auto l = std::make_unique<RLookup>();
    l->name = j.at("name");
    l->segment = Segment::converted;
    l->geom = geom_from_json(j.at("geom"));
    l->nf = j.at("nf");
    l->nw = j.at("nw");
    const std::string prefix = j.at("prefix");
    {
        const auto& [off, bytes] = c.offsets.at(prefix + ".idx_w");
        l->idx_w.resize(static_cast<size_t>(bytes));
        std::memcpy(l->idx_w.data(), c.payload.data() + off, static_cast<size_t>(bytes));
    }
    {
        const auto& [off, bytes] = c.offsets.at(prefix + ".tables");
        l->tables.resize(static_cast<size_t>(bytes / 4));
        std::memcpy(l->tables.data(), c.payload.data() + off, static_cast<size_t>(bytes));
    }
    {
        const auto& [off, bytes] = c.offsets.at(prefix + ".bias");
        l->bias.resize(static_cast<size_t>(bytes / 4));
        std::memcpy(l->bias.data(), c.payload.data() + off, static_cast<size_t>(bytes));
    }
    return l;
}

} // namespace

void save_converted(const std::string& path, const ReparamNet& net) {
    json header;
    header["format"] = "lutnet-converted";
    header["arch"] = arch_to_json(net.arch);
    json layers = json::array();
    std::vector<PayloadRef> payload;
    int idx = 0;
    for (const auto& l : net.layers) {
        const std::string prefix = "l" + std::to_string(idx++);
        const std::string kind = l->kind();
        json jl{{"kind", kind}, {"name", l->name},
                {"segment", l->segment == Segment::boundary ? "boundary" : "converted"}};
        if (kind == "conv2d") {
            const auto* cv = dynamic_cast<const RConv2d*>(l.get());
            jl["geom"] = geom_to_json(cv->geom);
            jl["has_bias"] = cv->has_bias;
            payload.push_back({prefix + ".weight", "f32", cv->weight.data(), cv->weight.numel()});
            if (cv->has_bias)
                payload.push_back({prefix + ".bias", "f32", cv->bias.data(), cv->bias.numel()});
        } else if (kind == "batchnorm") {
            const auto* bn = dynamic_cast<const RBatchNormEval*>(l.get());
            jl["eps"] = bn->eps;
            payload.push_back({prefix + ".gamma", "f32", bn->gamma.data(), bn->gamma.numel()});
            payload.push_back({prefix + ".beta", "f32", bn->beta.data(), bn->beta.numel()});
            payload.push_back({prefix + ".mean", "f32", bn->mean.data(), bn->mean.numel()});
            payload.push_back({prefix + ".var", "f32", bn->var.data(), bn->var.numel()});
        } else if (kind == "quantize_input") {
            const auto* q = dynamic_cast<const RQuantizeInput*>(l.get());
            jl["nf"] = q->nf;
            payload.push_back({prefix + ".inv_grid", "f64", &q->inv_grid, 1});
        } else if (kind == "clip_round") {
            jl["nf"] = dynamic_cast<const RClipRound*>(l.get())->nf;
        } else if (kind == "lookup") {
            const auto* lk = dynamic_cast<const RLookup*>(l.get());
            jl = lookup_to_json(*lk, prefix, payload);
            jl["segment"] = "converted";
        } else if (kind == "res_block") {
            const auto* rb = dynamic_cast<const RResBlock*>(l.get());
            jl["mid_nf"] = rb->mid_nf;
            jl["out_nf"] = rb->out_nf;
            jl["identity_skip"] = rb->identity_skip;
            jl["tail_round"] = rb->tail_round;
            jl["lk1"] = lookup_to_json(*rb->lk1, prefix + ".lk1", payload);
            jl["lk2"] = lookup_to_json(*rb->lk2, prefix + ".lk2", payload);
            if (rb->proj) jl["proj"] = lookup_to_json(*rb->proj, prefix + ".proj", payload);
        } else if (kind == "linear") {
            const auto* ln = dynamic_cast<const RLinear*>(l.get());
            payload.push_back({prefix + ".weight", "f32", ln->weight.data(), ln->weight.numel()});
            payload.push_back({prefix + ".bias", "f32", ln->bias.data(), ln->bias.numel()});
            jl["out_dim"] = ln->weight.dim(0);
            jl["in_dim"] = ln->weight.dim(1);
        }
        // relu / maxpool2 / clip_low / sum_pool / global_avgpool carry no data
        layers.push_back(std::move(jl));
    }
    header["layers"] = layers;
    write_container(path, std::move(header), payload);
}

ReparamNet load_converted(const std::string& path) {
    Container c = read_container(path);
    if (c.header.at("format") != "lutnet-converted")
        throw std::runtime_error("model file: " + path + " is not a converted model (format " +
                                 c.header.at("format").get<std::string>() + ")");
    ReparamNet net;
    net.arch = arch_from_json(c.header.at("arch"));
    int idx = 0;
    for (const auto& jl : c.header.at("layers")) {
        const std::string prefix = "l" + std::to_string(idx++);
        const std::string kind = jl.at("kind");
        const Segment seg =
            jl.at("segment") == "boundary" ? Segment::boundary : Segment::converted;
        if (kind == "conv2d") {
            auto cv = std::make_unique<RConv2d>();
            cv->geom = geom_from_json(jl.at("geom"));
            cv->has_bias = jl.at("has_bias");
            cv->weight.reset(
                Shape{cv->geom.c_out, cv->geom.c_in, cv->geom.k, cv->geom.k});
            copy_f32(c, prefix + ".weight", cv->weight);
            if (cv->has_bias) {
                cv->bias.reset(Shape{cv->geom.c_out});
                copy_f32(c, prefix + ".bias", cv->bias);
            }
            cv->name = jl.at("name");
            cv->segment = seg;
            net.layers.push_back(std::move(cv));
        } else if (kind == "batchnorm") {
            auto bn = std::make_unique<RBatchNormEval>();
            bn->eps = jl.at("eps");
            const auto& [off, bytes] = c.offsets.at(prefix + ".gamma");
            const int64_t ch = bytes / 4;
            (void)off;
            bn->gamma.reset(Shape{ch});
            bn->beta.reset(Shape{ch});
            bn->mean.reset(Shape{ch});
            bn->var.reset(Shape{ch});
            copy_f32(c, prefix + ".gamma", bn->gamma);
            copy_f32(c, prefix + ".beta", bn->beta);
            copy_f32(c, prefix + ".mean", bn->mean);
            copy_f32(c, prefix + ".var", bn->var);
            bn->name = jl.at("name");
            bn->segment = seg;
            net.layers.push_back(std::move(bn));
        } else if (kind == "relu") {
            auto r = std::make_unique<RRelu>();
            r->name = jl.at("name");
            r->segment = seg;
            net.layers.push_back(std::move(r));
        } else if (kind == "maxpool2") {
            auto r = std::make_unique<RMaxPool2>();
            r->name = jl.at("name");
            r->segment = seg;
            net.layers.push_back(std::move(r));
        } else if (kind == "quantize_input") {
            auto q = std::make_unique<RQuantizeInput>();
            q->nf = jl.at("nf");
            const auto& [off, bytes] = c.offsets.at(prefix + ".inv_grid");
            if (bytes != 8) throw std::runtime_error("model file: bad inv_grid payload");
            std::memcpy(&q->inv_grid, c.payload.data() + off, 8);
            q->name = jl.at("name");
            q->segment = seg;
            net.layers.push_back(std::move(q));
        } else if (kind == "clip_round") {
            auto r = std::make_unique<RClipRound>();
            r->nf = jl.at("nf");
            r->name = jl.at("name");
            r->segment = seg;
            net.layers.push_back(std::move(r));
        } else if (kind == "clip_low") {
            auto r = std::make_unique<RClipLow>();
            r->name = jl.at("name");
            r->segment = seg;
            net.layers.push_back(std::move(r));
        } else if (kind == "lookup") {
            auto l = lookup_from_json(jl, c);
            net.layers.push_back(std::move(l));
        } else if (kind == "res_block") {
            auto rb = std::make_unique<RResBlock>();
            rb->mid_nf = jl.at("mid_nf");
            rb->out_nf = jl.at("out_nf");
            rb->identity_skip = jl.at("identity_skip");
            rb->tail_round = jl.at("tail_round");
            rb->lk1 = lookup_from_json(jl.at("lk1"), c);
            rb->lk2 = lookup_from_json(jl.at("lk2"), c);
            if (jl.contains("proj")) rb->proj = lookup_from_json(jl.at("proj"), c);
            rb->name = jl.at("name");
            rb->segment = seg;
            net.layers.push_back(std::move(rb));
        } else if (kind == "sum_pool") {
            auto r = std::make_unique<RSumPool>();
            r->name = jl.at("name");
            r->segment = seg;
            net.layers.push_back(std::move(r));
        } else if (kind == "global_avgpool") {
            auto r = std::make_unique<RGlobalAvgPool>();
            r->name = jl.at("name");
            r->segment = seg;
            net.layers.push_back(std::move(r));
        } else if (kind == "linear") {
            auto ln = std::make_unique<RLinear>();
            const int64_t out_dim = jl.at("out_dim"), in_dim = jl.at("in_dim");
            ln->weight.reset(Shape{out_dim, in_dim});
            ln->bias.reset(Shape{out_dim});
            copy_f32(c, prefix + ".weight", ln->weight);
            copy_f32(c, prefix + ".bias", ln->bias);
            ln->name = jl.at("name");
            ln->segment = seg;
            net.layers.push_back(std::move(ln));
        } else {
            throw std::runtime_error("model file: unknown layer kind " + kind);
        }
    }
    return net;
}

std::string model_file_format(const std::string& path) {
    Container c = read_container(path);
    return c.header.at("format");
}

} // namespace lut
