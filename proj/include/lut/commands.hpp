#pragma once

#include "lut/checkpoint.hpp"
#include "lut/config.hpp"
#include "lut/cost_model.hpp"
#include "lut/reparam.hpp"
#include "lut/train.hpp"

#include <iosfwd>
#include <string>

namespace lut {

// train: writes checkpoint.lut and metrics.csv under out_dir
TrainResult cmd_train(const RunConfig& cfg, const std::string& out_dir);

double cmd_eval(const RunConfig& cfg, const std::string& model_path);

struct ReparamResult {
    std::string converted_path;
    std::string report_path;
    double equivalence_max_diff = 0.0;
    bool argmax_match = true;
    int64_t converted_muls = -1;
    ConversionReport report;
};

ReparamResult cmd_reparam(const std::string& model_path, const std::string& out_dir,
                          uint64_t seed = 99);

// arch: resnet20-{baseline,lookup,lookup-4bit,...} / vggsmall-...; or a model
// file whose architecture provides the shapes.
std::string cmd_cost(const std::string& arch, const std::string& model_path,
                     const std::string& processor, const std::string& out_dir);

struct InspectResult {
    std::string csv_path;
    bool histogram_unimodal = true;
    int64_t histogram_total = 0;
};

InspectResult cmd_inspect_table(const std::string& model_path, const std::string& layer,
                                const std::string& out_dir);

// 64-bit gradient verification: finite differences on table logits and on the
// differentiable re-scaling path, plus closed-form substitution checks.
bool run_f64_gradcheck(uint64_t seed, std::ostream& log);

} // namespace lut
