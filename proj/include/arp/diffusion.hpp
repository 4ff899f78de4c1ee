#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "arp/codec.hpp"
#include "arp/config.hpp"
#include "arp/nn.hpp"
#include "arp/region.hpp"
#include "arp/types.hpp"

namespace arp::diff {

// ---- variance-preserving noise schedule ----
struct NoiseSchedule {
    int steps = 0;
    std::vector<double> alpha_bar; // cumulative signal^2, index t in [0, steps)
    std::vector<double> signal;    // sqrt(alpha_bar)
    std::vector<double> noise;     // sqrt(1 - alpha_bar)

    static NoiseSchedule make(const std::string& name, int steps);
};

// z_t = signal(t) * z0 + noise(t) * eps
template <typename T>
void forward_noise(const NoiseSchedule& sched, const TensorT<T>& z0, int t, const TensorT<T>& eps,
                   TensorT<T>& out);

// ---- conditioned U-Net denoiser ----
// Shared spatial denoising applied per frame, with learned temporal mixing
// across frames for the video model. Conditioning: timestep embedding plus a
// text projection (and a per-frame embedding for video), injected into every
// residual block as a per-channel scale/shift after group norm.
struct DenoiserSpec {
    int in_channels = 8;
    int out_channels = 4;
    int base = 24;
    int cond_dim = 64;
    int frames = 1;
    bool temporal = false;
    int vocab = 32;
    int token_len = 12;
    int text_embed_dim = 16;
    int spatial = 16;
    int groups = 4;
    // 2 = full U-Net (two downsamples); 1 = single-resolution variant, small
    // enough for exhaustive finite-difference checks
    int depth = 2;
};

template <typename T>
class DenoiserT {
public:
    DenoiserT(const DenoiserSpec& spec, uint64_t init_seed);
    ~DenoiserT();

    // x: [clips*frames, in_channels, S, S]; t and tokens per clip;
    // text_drop[b] != 0 zeroes the text conditioning of clip b
    TensorT<T> forward(const TensorT<T>& x, const std::vector<int>& t,
                       const std::vector<std::vector<int>>& tokens,
                       const std::vector<uint8_t>& text_drop);
    void backward(const TensorT<T>& gy);

    nn::Registry<T>& registry() { return reg_; }
    const DenoiserSpec& spec() const { return spec_; }

private:
    struct Impl;
    DenoiserSpec spec_;
    nn::Registry<T> reg_;
    std::unique_ptr<Impl> impl_;
};

using Denoiser = DenoiserT<float>;

// ---- conditioning channel layout ----
// active-region model:          [noised_o | x0]
// video model with regions:     [noised_x | o | x0 | o]   (dual concatenation:
//   the region latent rides next to each frame's noised latent and next to
//   the initial-frame conditioning slot)
// video model without regions:  [noised_x | x0]
std::string layout_string(bool video, bool active_region);
int packed_channels(const Config& cfg, bool video, bool active_region);

Tensor pack_ar_input(const Config& cfg, const Tensor& noised_o, const Tensor& x0);
Tensor pack_video_input(const Config& cfg, const Tensor& noised_frames, const Tensor& x0,
                        const Tensor* o, int frames);
// inverse of the packers over the noised slice (used by the layout round-trip test)
Tensor unpack_noised_slice(const Config& cfg, const Tensor& packed);

// ---- trained models ----
struct DiffusionStats {
    std::vector<double> losses;
    double initial_loss = 0;
    double final_loss = 0;
    int skipped_episodes = 0;
};

struct ArModel {
    Config cfg;
    DenoiserSpec spec;
    std::unique_ptr<Denoiser> net;
    double latent_mean = 0, latent_std = 1;
    std::string codec_hash;
    std::string layout;
};

struct VideoModel {
    Config cfg;
    DenoiserSpec spec;
    std::unique_ptr<Denoiser> net;
    double latent_mean = 0, latent_std = 1;
    std::string codec_hash;
    std::string layout;
    bool active_region = true;
};

DiffusionStats train_active_region_model(const region::RegionManifest& data, const Config& cfg,
                                         uint64_t seed, int steps, bool include_flagged,
                                         const fs::path& out_dir);

// episodes come from the store; active-region latents from the mined manifest
// (ignored when active_region_on is false)
DiffusionStats train_video_model(const fs::path& store, const region::RegionManifest* regions,
                                 const fs::path& codec_dir, const Config& cfg, uint64_t seed,
                                 int steps, bool active_region_on, const fs::path& out_dir);

ArModel load_ar_model(const fs::path& dir);
VideoModel load_video_model(const fs::path& dir);

// ancestral sampling; deterministic in (params, inputs, seed)
Latent sample_active_region(const ArModel& model, const Latent& x0, const TaskText& task,
                            uint64_t seed);
std::vector<Latent> sample_video(const VideoModel& model, const Latent& x0, const TaskText& task,
                                 const Latent* o, uint64_t seed);

// batched variants used by the evaluation harness (one clip per entry)
std::vector<Latent> sample_active_region_batch(const ArModel& model,
                                               const std::vector<Latent>& x0,
                                               const std::vector<TaskText>& tasks,
                                               const std::vector<uint64_t>& seeds);
std::vector<std::vector<Latent>> sample_video_batch(const VideoModel& model,
                                                    const std::vector<Latent>& x0,
                                                    const std::vector<TaskText>& tasks,
                                                    const std::vector<const Latent*>& o,
                                                    const std::vector<uint64_t>& seeds);

} // namespace arp::diff
