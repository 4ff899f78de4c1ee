#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "arp/common.hpp"

namespace arp {

std::vector<std::string> default_vocab();

// All knobs of the system. Loaded from a flat JSON document; unknown keys are
// rejected, missing keys take the defaults below.
struct Config {
    int image_size = 64;
    int latent_spatial = 16;
    int latent_channels = 4;
    int horizon_H = 6;
    int grid_M = 24;
    // moving-point threshold in pixels; resolved to 2 * image_size / 512 when
    // the config file does not set it
    double tau = 2.0 * 64 / 512;
    int action_dim = 4;
    std::vector<std::string> vocab = default_vocab();
    int max_tokens = 12;

    int diffusion_steps = 100;
    std::string noise_schedule_name = "cosine";
    double guidance_scale = 1.0;
    double cond_dropout = 0.1;

    double lr_codec = 2e-3;
    double lr_ar = 1e-3;
    double lr_planner = 1e-3;
    double lr_invdyn = 1e-3;
    int batch_codec = 16;
    int batch_ar = 16;
    int batch_planner = 4;
    int batch_invdyn = 32;
    uint64_t seed = 0;

    int unet_channels = 32;
    int cond_dim = 64;
    int text_embed_dim = 16;
    int invdyn_channels = 32;
    double kl_weight = 0.0;  // 0 = plain autoencoder, >0 = variational objective

    int latent_downsample() const { return image_size / latent_spatial; }
};

// Throws arp::error naming the offending key; never yields a partial Config.
void validate_config(const Config& cfg);

Config load_config(const fs::path& path);
Config parse_config_json(const std::string& text);
std::string config_to_json(const Config& cfg);

// stable content hash of the fully resolved configuration
uint64_t config_hash(const Config& cfg);

} // namespace arp
