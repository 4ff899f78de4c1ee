#pragma once

#include <string>
#include <utility>
#include <vector>

#include "arp/codec.hpp"
#include "arp/config.hpp"
#include "arp/tracking.hpp"
#include "arp/types.hpp"

namespace arp::region {

// promptable-segmenter tolerance (max per-channel distance to the seed colour)
inline constexpr float kFloodEps = 0.05f;
// component filtering: reserved-arm-colour tolerance and minimum area
inline constexpr float kArmColorEps = 0.05f;
inline constexpr int kMinArea = 4;

// union over prompts of the colour-connected region containing each prompt
PseudoMask segment_from_prompts(const Frame& frame, const std::vector<std::pair<double, double>>& prompts);

// drops 4-connected components whose mean colour matches the reserved arm
// colour and components smaller than kMinArea pixels
PseudoMask filter_components(const PseudoMask& mask, const Frame& frame);

// o = x0 * M + white * (1 - M), elementwise per channel
Frame compose_active_region(const Frame& x0, const PseudoMask& mask);

double mask_iou(const PseudoMask& a, const PseudoMask& b);

enum class MiningSource { correlation, oracle, gt };
MiningSource mining_source_from_string(const std::string& name);
std::string to_string(MiningSource src);

struct MinedMask {
    PseudoMask mask;
    bool flagged = false; // empty after filtering; record kept, all-white region
};

// full mask pipeline for one episode: track -> select -> prompt -> segment ->
// filter (gt bypasses tracking and uses the simulator's active mask; oracle
// and gt replay the episode from its seed)
MinedMask mine_mask(const Episode& ep, MiningSource src, double tau, const Config& cfg);

struct ActiveRegionRecord {
    std::string episode_id;
    bool flagged = false;
    TaskText task;
    std::string mask_file;
    std::string x0_latent_file;
    std::string o_latent_file;
    std::string codec_hash;
    std::string source;
    double tau = 0;
};

struct RegionManifest {
    std::vector<ActiveRegionRecord> records;
    std::string codec_hash;
    fs::path dir;
};

RegionManifest mine_dataset(const fs::path& store, const fs::path& codec_dir,
                            const fs::path& out_dir, MiningSource src, double tau,
                            const Config& cfg);

RegionManifest load_region_manifest(const fs::path& out_dir);

Latent record_x0_latent(const RegionManifest& m, const ActiveRegionRecord& r);
Latent record_o_latent(const RegionManifest& m, const ActiveRegionRecord& r);
PseudoMask record_mask(const RegionManifest& m, const ActiveRegionRecord& r);

} // namespace arp::region
