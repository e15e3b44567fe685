#include "lut/config.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>

namespace lut {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw std::invalid_argument("config: unknown key \"" + it.key() + "\" in " + where);
}

TableMode parse_table_mode(const std::string& s) {
    if (s == "cumulative") return TableMode::cumulative;
    if (s == "fixed") return TableMode::fixed;
    if (s == "independent-random") return TableMode::independent_random;
    if (s == "independent-step") return TableMode::independent_step;
    throw std::invalid_argument("config: unknown table mode \"" + s + "\"");
}

} // namespace

json arch_to_json(const ArchConfig& a) {
    return json{{"name", a.name},
                {"granularity_f", a.granularity_f},
                {"granularity_w", a.granularity_w},
                {"table_mode", table_mode_name(a.table_mode)},
                {"exponential_scales", a.exponential_scales},
                {"grad_rescale", a.grad_rescale},
                {"residual_scale_flag", a.residual_scale_flag},
                {"classes", a.classes},
                {"in_channels", a.in_channels},
                {"in_hw", a.in_hw},
                {"width", a.width},
                {"mlp_inputs", a.mlp_inputs},
                {"mlp_hidden", a.mlp_hidden}};
}

ArchConfig arch_from_json(const json& j) {
    reject_unknown(j,
                   {"name", "granularity_f", "granularity_w", "table_mode", "exponential_scales",
                    "grad_rescale", "residual_scale_flag", "classes", "in_channels", "in_hw",
                    "width", "mlp_inputs", "mlp_hidden"},
                   "arch");
    ArchConfig a;
    if (j.contains("name")) a.name = j.at("name").get<std::string>();
    if (j.contains("granularity_f")) a.granularity_f = j.at("granularity_f").get<int64_t>();
    if (j.contains("granularity_w")) a.granularity_w = j.at("granularity_w").get<int64_t>();
    if (j.contains("table_mode")) a.table_mode = parse_table_mode(j.at("table_mode"));
    if (j.contains("exponential_scales"))
        a.exponential_scales = j.at("exponential_scales").get<bool>();
    if (j.contains("grad_rescale")) a.grad_rescale = j.at("grad_rescale").get<bool>();
    if (j.contains("residual_scale_flag"))
        a.residual_scale_flag = j.at("residual_scale_flag").get<bool>();
    if (j.contains("classes")) a.classes = j.at("classes").get<int64_t>();
    if (j.contains("in_channels")) a.in_channels = j.at("in_channels").get<int64_t>();
    if (j.contains("in_hw")) a.in_hw = j.at("in_hw").get<int64_t>();
    if (j.contains("width")) a.width = j.at("width").get<int64_t>();
    if (j.contains("mlp_inputs")) a.mlp_inputs = j.at("mlp_inputs").get<int64_t>();
    if (j.contains("mlp_hidden")) a.mlp_hidden = j.at("mlp_hidden").get<int64_t>();
    return a;
}

RunConfig parse_run_config(const json& j) {
    reject_unknown(j, {"dataset", "arch", "train", "seed"}, "config root");
    RunConfig c;
    if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
    if (j.contains("arch")) c.arch = arch_from_json(j.at("arch"));
    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        reject_unknown(
            d, {"source", "path", "train_count", "test_count", "classes", "dims", "separation"},
            "dataset");
        if (d.contains("source")) c.dataset.source = d.at("source").get<std::string>();
        if (d.contains("path")) c.dataset.path = d.at("path").get<std::string>();
        if (d.contains("train_count")) c.dataset.train_count = d.at("train_count").get<int64_t>();
        if (d.contains("test_count")) c.dataset.test_count = d.at("test_count").get<int64_t>();
        if (d.contains("classes")) c.dataset.classes = d.at("classes").get<int64_t>();
        if (d.contains("dims")) c.dataset.dims = d.at("dims").get<int64_t>();
        if (d.contains("separation")) c.dataset.separation = d.at("separation").get<double>();
        if (c.dataset.source != "cifar10-binary" && c.dataset.source != "synthetic-images" &&
            c.dataset.source != "synthetic-gaussian")
            throw std::invalid_argument("config: unknown dataset source \"" + c.dataset.source +
                                        "\"");
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        reject_unknown(t,
                       {"epochs", "batch_size", "lr", "momentum", "weight_decay", "clip_norm",
                        "lr_decay_epochs", "lr_decay_factor", "augment"},
                       "train");
        if (t.contains("epochs")) c.train.epochs = t.at("epochs").get<int64_t>();
        if (t.contains("batch_size")) c.train.batch_size = t.at("batch_size").get<int64_t>();
        if (t.contains("lr")) c.train.lr = t.at("lr").get<double>();
        if (t.contains("momentum")) c.train.momentum = t.at("momentum").get<double>();
        if (t.contains("weight_decay")) c.train.weight_decay = t.at("weight_decay").get<double>();
        if (t.contains("clip_norm")) c.train.clip_norm = t.at("clip_norm").get<double>();
        if (t.contains("lr_decay_epochs"))
            c.train.lr_decay_epochs = t.at("lr_decay_epochs").get<std::vector<int64_t>>();
        if (t.contains("lr_decay_factor"))
            c.train.lr_decay_factor = t.at("lr_decay_factor").get<double>();
        if (t.contains("augment")) c.train.augment = t.at("augment").get<bool>();
    }
    c.train.seed = c.seed;
    c.arch.classes = c.dataset.classes;
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    json j;
    f >> j;
    return parse_run_config(j);
}

json run_config_to_json(const RunConfig& c) {
    return json{{"dataset",
                 {{"source", c.dataset.source},
                  {"path", c.dataset.path},
                  {"train_count", c.dataset.train_count},
                  {"test_count", c.dataset.test_count},
                  {"classes", c.dataset.classes},
                  {"dims", c.dataset.dims},
                  {"separation", c.dataset.separation}}},
                {"arch", arch_to_json(c.arch)},
                {"train",
                 {{"epochs", c.train.epochs},
                  {"batch_size", c.train.batch_size},
                  {"lr", c.train.lr},
                  {"momentum", c.train.momentum},
                  {"weight_decay", c.train.weight_decay},
                  {"clip_norm", c.train.clip_norm},
                  {"lr_decay_epochs", c.train.lr_decay_epochs},
                  {"lr_decay_factor", c.train.lr_decay_factor},
                  {"augment", c.train.augment}}},
                {"seed", c.seed}};
}

DatasetPair make_datasets(const DatasetSpecCfg& spec, uint64_t seed) {
    DatasetPair out;
    if (spec.source == "cifar10-binary") {
        Dataset train = load_cifar10_dir(spec.path, true);
        Dataset test = load_cifar10_dir(spec.path, false);
        if (spec.train_count > train.size() || spec.test_count > test.size())
            throw std::runtime_error("dataset: requested subset larger than available records");
        out.train = subset(train, 0, spec.train_count);
        out.test = subset(test, 0, spec.test_count);
    } else if (spec.source == "synthetic-images") {
        Dataset all =
            synthetic_images(spec.train_count + spec.test_count, spec.classes, seed ^ 0x5a5a);
        out.train = subset(all, 0, spec.train_count);
        out.test = subset(all, spec.train_count, spec.test_count);
    } else if (spec.source == "synthetic-gaussian") {
        Dataset all = synthetic_gaussian(spec.train_count + spec.test_count, spec.dims,
                                         spec.classes, spec.separation, seed ^ 0x5a5a);
        out.train = subset(all, 0, spec.train_count);
        out.test = subset(all, spec.train_count, spec.test_count);
    } else {
        throw std::invalid_argument("dataset: unknown source " + spec.source);
    }
    return out;
}

} // namespace lut
