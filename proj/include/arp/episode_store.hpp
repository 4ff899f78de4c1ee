#pragma once

#include <string>
#include <vector>

#include "arp/config.hpp"
#include "arp/types.hpp"

namespace arp {

// On-disk episode store:
//   <store>/manifest.json
//   <store>/ep_<id>/frame_000.png ... frame_00H.png
//   <store>/ep_<id>/episode.json
// Frames are stored losslessly at 8-bit depth; actions at full precision.
struct StoreEntry {
    std::string id;
    uint64_t seed = 0;
    int template_id = 0;
    bool success = false;
};

struct StoreManifest {
    int h = 0;
    int image_size = 0;
    std::vector<StoreEntry> episodes;
};

void init_store(const fs::path& store, const Config& cfg);
StoreManifest load_manifest(const fs::path& store);

// writes the episode under the next sequential id and returns it
std::string save_episode(const fs::path& store, const Episode& ep, const Config& cfg);
// writers targeting distinct explicit ids may run concurrently; the manifest
// must be rebuilt afterwards with rebuild_manifest
void save_episode_as(const fs::path& store, const std::string& id, const Episode& ep,
                     const Config& cfg);
void rebuild_manifest(const fs::path& store, const Config& cfg);

Episode load_episode(const fs::path& store, const std::string& id, const Config& cfg);

std::string episode_id_from_index(size_t index);

} // namespace arp
