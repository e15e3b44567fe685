#include "lut/commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace lut {

namespace fs = std::filesystem;

namespace {

void write_text_atomic(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open " + tmp);
        f << text;
    }
    fs::rename(tmp, path);
}

} // namespace

TrainResult cmd_train(const RunConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    DatasetPair data = make_datasets(cfg.dataset, cfg.seed);
    Rng rng(cfg.seed);
    Network<float> net = build_network<float>(cfg.arch, rng);
    TrainResult res = train(net, data.train, data.test, cfg.train);
    write_text_atomic(out_dir + "/metrics.csv", metrics_csv(res));
    save_checkpoint(out_dir + "/checkpoint.lut", net, res.steps);
    return res;
}

double cmd_eval(const RunConfig& cfg, const std::string& model_path) {
    LoadedCheckpoint ck = load_checkpoint(model_path);
    DatasetPair data = make_datasets(cfg.dataset, cfg.seed);
    return evaluate_accuracy(ck.net, data.test);
}

ReparamResult cmd_reparam(const std::string& model_path, const std::string& out_dir,
                          uint64_t seed) {
    if (model_file_format(model_path) == "lutnet-converted")
        throw std::runtime_error("reparam: " + model_path +
                                 " is already a converted model; conversion is not re-applied");
    LoadedCheckpoint ck = load_checkpoint(model_path);
    ReparamNet converted = convert_network(ck.net);

    // equivalence check on random inputs
    Rng rng(seed);
    const ArchConfig& a = ck.net.arch;
    double max_diff = 0.0;
    bool argmax_match = true;
    OpCounters boundary, conv_ops;
    for (int rep = 0; rep < 100; ++rep) {
        Tensor<float> x(Shape{1, a.in_channels, a.in_hw, a.in_hw});
        for (int64_t i = 0; i < x.numel(); ++i) x[i] = static_cast<float>(rng.uniform());
        auto ref = ck.net.forward(make_leaf(Tensor<float>(x)), Phase::eval);
        Tensor<float> got = converted.forward(x, boundary, conv_ops);
        if (got.numel() != ref->value.numel())
            throw std::runtime_error("reparam: converted output shape mismatch");
        int best_ref = 0, best_got = 0;
        for (int64_t i = 0; i < got.numel(); ++i) {
            max_diff = std::max(max_diff,
                                std::abs(static_cast<double>(got[i]) -
                                         static_cast<double>(ref->value[i])));
            if (ref->value[i] > ref->value[best_ref]) best_ref = static_cast<int>(i);
            if (got[i] > got[best_got]) best_got = static_cast<int>(i);
        }
        if (best_ref != best_got) argmax_match = false;
    }

    fs::create_directories(out_dir);
    ReparamResult out;
    out.converted_path = out_dir + "/converted.lut";
    out.report_path = out_dir + "/conversion_report.txt";
    out.equivalence_max_diff = max_diff;
    out.argmax_match = argmax_match;
    out.converted_muls = conv_ops.mul;
    out.report = converted.report;
    save_converted(out.converted_path, converted);

    std::ostringstream rep;
    rep << converted.report.text();
    rep << "equivalence max abs diff over 100 random inputs: " << max_diff << "\n";
    rep << "argmax agreement: " << (argmax_match ? "yes" : "no") << "\n";
    rep << "converted-segment multiplications: " << conv_ops.mul << "\n";
    rep << "converted-segment lookups: " << conv_ops.lookups << ", adds: " << conv_ops.adds
        << ", bias adds: " << conv_ops.bias_adds << "\n";
    rep << "boundary multiplications (preserved layers + input quantize): " << boundary.mul
        << "\n";
    write_text_atomic(out.report_path, rep.str());
    return out;
}

std::string cmd_cost(const std::string& arch, const std::string& model_path,
                     const std::string& processor, const std::string& out_dir) {
    (void)processor; // the summary covers both processors side by side
    cost::CostProfile profile;
    std::vector<cost::NetworkKind> kinds;
    if (!arch.empty()) {
        const auto dash = arch.find('-');
        if (dash == std::string::npos)
            throw std::invalid_argument("cost: arch must be <base>-<kind>, e.g. resnet20-lookup");
        profile = cost::reference_profile(arch.substr(0, dash));
        kinds.push_back(cost::parse_network_kind(arch.substr(dash + 1)));
    } else {
        const std::string fmt = model_file_format(model_path);
        ArchConfig a;
        if (fmt == "lutnet-checkpoint") {
            LoadedCheckpoint ck = load_checkpoint(model_path);
            a = ck.net.arch;
            profile = cost::profile_from_shapes(
                a.name, ck.net.shape_infos({1, a.in_channels, a.in_hw, a.in_hw}));
        } else {
            ReparamNet rn = load_converted(model_path);
            a = rn.arch;
            Rng rng(0);
            Network<float> probe = build_network<float>(a, rng);
            profile = cost::profile_from_shapes(
                a.name, probe.shape_infos({1, a.in_channels, a.in_hw, a.in_hw}));
        }
        kinds.push_back(a.name.find("lookup") != std::string::npos
                            ? cost::NetworkKind::lookup
                            : cost::NetworkKind::baseline);
    }
    const std::string summary = cost::cost_summary(profile, kinds);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_text_atomic(out_dir + "/cost_summary.csv", summary);
        write_text_atomic(out_dir + "/cost_layers.csv", cost::per_layer_csv(profile));
    }
    return summary;
}

InspectResult cmd_inspect_table(const std::string& model_path, const std::string& layer,
                                const std::string& out_dir) {
    LoadedCheckpoint ck = load_checkpoint(model_path);
    LookupConv2dLayer<float>* target = nullptr;
    for (auto* lk : ck.net.lookup_layers())
        if (lk->name == layer) target = lk;
    if (!target)
        throw std::runtime_error("inspect-table: no lookup layer named \"" + layer +
                                 "\" in the checkpoint");

    const BuiltTable<float> t = target->table.build();
    std::ostringstream csv;
    csv << "kind, i, j, value\n";
    csv.precision(9);
    if (t.separable()) {
        for (int64_t i = 0; i < t.nf; ++i) csv << "tf, " << i << ", , " << t.tf[static_cast<size_t>(i)] << "\n";
        for (int64_t j = 0; j < t.nw; ++j) csv << "tw, , " << j << ", " << t.tw[static_cast<size_t>(j)] << "\n";
    }
    for (int64_t i = 0; i < t.nf; ++i)
        for (int64_t j = 0; j < t.nw; ++j)
            csv << "t2d, " << i << ", " << j << ", " << t.t2d[static_cast<size_t>(i * t.nw + j)]
                << "\n";

    // histogram of the stored weights' integer indices
    const double sw = target->current_sw();
    const auto idx = compute_indices<float>(std::span<const float>(target->weight->value.vec()),
                                            sw, AxisKind::weight, t.nw);
    std::vector<int64_t> hist(static_cast<size_t>(t.nw), 0);
    for (int64_t v : idx) ++hist[static_cast<size_t>(v)];
    for (int64_t j = 0; j < t.nw; ++j)
        csv << "weight_hist, , " << j << ", " << hist[static_cast<size_t>(j)] << "\n";

    // unimodality: merge plateaus, then expect a single rise-fall
    bool unimodal = true;
    {
        std::vector<int64_t> vals;
        for (int64_t v : hist)
            if (vals.empty() || vals.back() != v) vals.push_back(v);
        bool falling = false;
        for (size_t i = 1; i < vals.size(); ++i) {
            if (vals[i] < vals[i - 1]) falling = true;
            else if (vals[i] > vals[i - 1] && falling) {
                unimodal = false;
                break;
            }
        }
    }

    InspectResult out;
    out.histogram_unimodal = unimodal;
    for (int64_t h : hist) out.histogram_total += h;
    fs::create_directories(out_dir);
    out.csv_path = out_dir + "/table_" + layer + ".csv";
    write_text_atomic(out.csv_path, csv.str());
    if (!unimodal)
        std::cerr << "warning: weight-index histogram of layer " << layer
                  << " is not unimodal around the center\n";
    return out;
}

// ---------------------------------------------------------------------------

bool run_f64_gradcheck(uint64_t seed, std::ostream& log) {
    Rng rng(seed);
    const int64_t nf = 9, nw = 9;
    bool ok = true;
    double worst_logit = 0.0, worst_scale = 0.0;

    for (int rep = 0; rep < 10 && ok; ++rep) {
        kernels::Conv2dGeom g{};
        g.n = 2;
        g.c_in = 3;
        g.h = g.w = 5;
        g.c_out = 4;
        g.k = 3;
        g.stride = 1;
        g.pad = 1;

        TableParams<double> table = TableParams<double>::make(TableMode::cumulative, nf, nw, rng,
                                                              "gc");
        for (auto* n : {table.g.get(), table.q_neg.get(), table.q_pos.get()})
            for (int64_t i = 0; i < n->value.numel(); ++i)
                n->value[i] = rng.normal(0.0, 0.5);

        Tensor<double> x(Shape{g.n, g.c_in, g.h, g.w});
        for (int64_t i = 0; i < x.numel(); ++i) x[i] = rng.uniform(0.0, 1.2);
        Tensor<double> w(Shape{g.c_out, g.c_in, g.k, g.k});
        for (int64_t i = 0; i < w.numel(); ++i) w[i] = rng.normal(0.0, 0.4);
        Tensor<double> upstream(Shape{g.n, g.c_out, g.h_out(), g.w_out()});
        for (int64_t i = 0; i < upstream.numel(); ++i) upstream[i] = rng.normal();

        auto e_w = make_leaf<double>(Tensor<double>(Shape{1}, rng.normal(0.0, 0.3)), true, "e_w");
        auto e_f = make_leaf<double>(Tensor<double>(Shape{1}, rng.normal(0.0, 0.3)), true, "e_f");

        auto loss_value = [&](void) -> double {
            auto xn = make_leaf<double>(Tensor<double>(x));
            auto wn = make_leaf<double>(Tensor<double>(w));
            auto sw = ops::exp_scalar(e_w);
            auto sf = ops::exp_scalar(e_f);
            auto out = lookup_conv2d<double>(xn, wn, nullptr, sw, sf, table, g, nullptr, false,
                                             false);
            double acc = 0.0;
            for (int64_t i = 0; i < out->value.numel(); ++i)
                acc += static_cast<double>(out->value[i]) * upstream[i];
            return acc;
        };
        auto loss_node = [&](void) {
            auto xn = make_leaf<double>(Tensor<double>(x));
            auto wn = make_leaf<double>(Tensor<double>(w));
            auto sw = ops::exp_scalar(e_w);
            auto sf = ops::exp_scalar(e_f);
            auto out = lookup_conv2d<double>(xn, wn, nullptr, sw, sf, table, g, nullptr, false,
                                             false);
            auto un = make_leaf<double>(Tensor<double>(upstream));
            return ops::sum(ops::mul(out, un));
        };

        // analytic logit gradients (indices frozen by construction: they do
        // not depend on the logits)
        auto loss = loss_node();
        backward(loss);
        const double h = 1e-4;
        for (auto node : {table.g, table.q_neg, table.q_pos}) {
            for (int64_t i = 0; i < node->value.numel(); ++i) {
                const double keep = node->value[i];
                node->value[i] = keep + h;
                const double up = loss_value();
                node->value[i] = keep - h;
                const double dn = loss_value();
                node->value[i] = keep;
                const double fd = (up - dn) / (2 * h);
                const double an = node->grad.numel() ? node->grad[i] : 0.0;
                const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
                worst_logit = std::max(worst_logit, rel);
                if (rel > 1e-4) ok = false;
            }
        }

        // re-scaling path: saturate all inputs and weights so the index paths
        // carry no gradient, then check d loss / d e against finite differences
        Tensor<double> xs(x.shape());
        const double sfv = std::exp(e_f->value[0]);
        const double swv = std::exp(e_w->value[0]);
        for (int64_t i = 0; i < xs.numel(); ++i)
            xs[i] = (i % 3 == 0) ? -0.5 : sfv * (2.0 + rng.uniform());
        Tensor<double> wsat(w.shape());
        for (int64_t i = 0; i < wsat.numel(); ++i)
            wsat[i] = (rng.coin() ? 1.0 : -1.0) * swv * (2.0 + rng.uniform());
        x = xs;
        w = wsat;

        for (auto node : {e_w, e_f}) {
            node->zero_grad();
            for (auto p : {table.g, table.q_neg, table.q_pos}) p->zero_grad();
            auto l2 = loss_node();
            backward(l2);
            const double keep = node->value[0];
            node->value[0] = keep + h;
            const double up = loss_value();
            node->value[0] = keep - h;
            const double dn = loss_value();
            node->value[0] = keep;
            const double fd = (up - dn) / (2 * h);
            const double an = node->grad[0];
            const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
            worst_scale = std::max(worst_scale, rel);
            if (rel > 1e-4) ok = false;
        }
        e_w->zero_grad();
        e_f->zero_grad();
    }

    log << "f64 gradient verification: max rel error logits " << worst_logit
        << ", re-scaling path " << worst_scale << " -> " << (ok ? "PASS" : "FAIL") << "\n";
    return ok;
}

} // namespace lut
