#pragma once

#include "lut/data.hpp"
#include "lut/net.hpp"
#include "lut/train.hpp"

#include <nlohmann/json_fwd.hpp>
#include <string>

namespace lut {

struct DatasetSpecCfg {
    std::string source = "synthetic-images"; // cifar10-binary | synthetic-images |
                                             // synthetic-gaussian
    std::string path = "data/cifar-10-batches-bin";
    int64_t train_count = 5000;
    int64_t test_count = 1000;
    int64_t classes = 10;
    int64_t dims = 16;        // synthetic-gaussian
    double separation = 3.0;  // synthetic-gaussian
};

struct RunConfig {
    DatasetSpecCfg dataset;
    ArchConfig arch;
    TrainConfig train;
    uint64_t seed = 1;
};

// Strict parsing: unknown keys anywhere are rejected by name.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

nlohmann::json arch_to_json(const ArchConfig& a);
ArchConfig arch_from_json(const nlohmann::json& j);
nlohmann::json run_config_to_json(const RunConfig& c);

struct DatasetPair {
    Dataset train;
    Dataset test;
};

// cifar10-binary loads from disk; the synthetic sources generate one stream
// and split it, so train/test stay disjoint.
DatasetPair make_datasets(const DatasetSpecCfg& spec, uint64_t seed);

} // namespace lut
