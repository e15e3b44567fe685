#pragma once

#include "lut/net.hpp"
#include "lut/reparam.hpp"

#include <string>

// Binary model container. Layout: one format-version byte, a little-endian
// u32 header length, a JSON header describing the architecture and the named
// payload arrays, then the raw little-endian array bytes in header order.
// Save -> load -> save round-trips byte-identically; writes go through a
// temp-file rename.
namespace lut {

struct LoadedCheckpoint {
    Network<float> net;
    int64_t step = 0;
};

void save_checkpoint(const std::string& path, Network<float>& net, int64_t step);
LoadedCheckpoint load_checkpoint(const std::string& path);

void save_converted(const std::string& path, const ReparamNet& net);
ReparamNet load_converted(const std::string& path);

// "lutnet-checkpoint" or "lutnet-converted"
std::string model_file_format(const std::string& path);

} // namespace lut
