#pragma once

#include <string>

#include "arp/config.hpp"
#include "arp/nn.hpp"

namespace arp::nn {

// Checkpoint directory: params.bin (parameter blob), config.json (config
// snapshot + model descriptor), hash.txt (content hash of params.bin).
struct CheckpointInfo {
    std::string kind;
    Config config;
    std::string hash;
    std::string extra_json; // model-specific descriptor (layout, codec hash, ...)
};

void save_checkpoint(const fs::path& dir, const std::string& kind, Registry<float>& reg,
                     const Config& cfg, const std::string& extra_json = "{}");

// fills reg from params.bin; throws if kind or shapes mismatch
CheckpointInfo load_checkpoint(const fs::path& dir, const std::string& kind,
                               Registry<float>& reg);

// reads descriptor only (no parameters)
CheckpointInfo peek_checkpoint(const fs::path& dir);

} // namespace arp::nn
