#pragma once

#include <memory>
#include <vector>

#include "arp/checkpoint.hpp"
#include "arp/config.hpp"
#include "arp/nn.hpp"
#include "arp/types.hpp"

namespace arp::codec {

// Convolutional frame codec: encoder E maps frames (and active-region frames)
// to latents, decoder R maps latents back for inspection. Plain autoencoder by
// default; kl_weight > 0 switches on the variational objective. Inference is
// deterministic either way (the variational head uses its mean).
class Codec {
public:
    explicit Codec(const Config& cfg, uint64_t init_seed = 0);

    Latent encode(const Frame& frame);
    Frame decode(const Latent& z);

    // batched training-path API, CHW tensors in [0,1]
    Tensor encode_batch(const Tensor& x, Tensor* logvar_out);
    Tensor decode_batch(const Tensor& z);
    // decoder half: returns the gradient w.r.t. the decoder input
    Tensor backward_decoder(const Tensor& gy);
    // encoder half: takes the gradient w.r.t. the full encoder head output
    // (2x latent channels when variational)
    void backward_encoder(const Tensor& g_head);

    nn::Registry<float>& registry() { return reg_; }
    const Config& config() const { return cfg_; }
    uint64_t content_hash() { return reg_.content_hash(); }

private:
    Config cfg_;
    nn::Registry<float> reg_;
    int n_down_ = 0;
    bool variational_ = false;

    std::vector<std::unique_ptr<nn::Conv2d<float>>> enc_;
    std::vector<std::unique_ptr<nn::SiLU<float>>> enc_act_;
    std::vector<std::unique_ptr<nn::Conv2d<float>>> dec_;
    std::vector<std::unique_ptr<nn::SiLU<float>>> dec_act_;
    std::vector<std::unique_ptr<nn::Upsample2<float>>> dec_up_;
    nn::Param<float> out_bias_; // learned per-pixel output map; the table
                                // texture is position-keyed, convs alone
                                // cannot reproduce it
    Tensor head_raw_, gate_;    // decoder head caches
};

struct TrainStats {
    std::vector<double> losses;
    double initial_loss = 0;
    double final_loss = 0;
};

// trains on the given images (episode frames plus mined active-region
// composites, assembled by the caller)
TrainStats train_codec_on_images(Codec& codec, const std::vector<Frame>& images, int steps,
                                 uint64_t seed);

void save_codec(const fs::path& dir, Codec& codec, const TrainStats& stats);
std::unique_ptr<Codec> load_codec(const fs::path& dir);

Tensor frames_to_tensor(const std::vector<const Frame*>& batch);
Frame tensor_to_frame(const Tensor& y, int index);

} // namespace arp::codec
