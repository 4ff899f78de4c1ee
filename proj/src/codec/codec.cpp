#include "arp/codec.hpp"

#include <json.hpp>

#include <cmath>

namespace arp::codec {

namespace {

// channel plan relative to the 16/24/32 base used at image_size 64
int enc_channels(int level) {
    static const int plan[] = {16, 24, 32, 40, 48};
    return plan[std::min(level, 4)];
}

} // namespace

Codec::Codec(const Config& cfg, uint64_t init_seed) : cfg_(cfg) {
    validate_config(cfg);
    variational_ = cfg.kl_weight > 0.0;
    n_down_ = 0;
    for (int r = cfg.latent_downsample(); r > 1; r /= 2) ++n_down_;

    Rng rng(derive_seed(init_seed, "codec-init"));
    int ch = enc_channels(0);
    enc_.push_back(std::make_unique<nn::Conv2d<float>>(reg_, "enc.in", 3, ch, 3, 1, 1, rng));
    enc_act_.push_back(std::make_unique<nn::SiLU<float>>());
    for (int d = 0; d < n_down_; ++d) {
        const int next = enc_channels(d + 1);
        enc_.push_back(std::make_unique<nn::Conv2d<float>>(
            reg_, "enc.down" + std::to_string(d), ch, next, 3, 2, 1, rng));
        enc_act_.push_back(std::make_unique<nn::SiLU<float>>());
        ch = next;
    }
    enc_.push_back(std::make_unique<nn::Conv2d<float>>(reg_, "enc.mid", ch, ch, 3, 1, 1, rng));
    enc_act_.push_back(std::make_unique<nn::SiLU<float>>());
    const int head_out = variational_ ? 2 * cfg.latent_channels : cfg.latent_channels;
    enc_.push_back(std::make_unique<nn::Conv2d<float>>(reg_, "enc.head", ch, head_out, 3, 1, 1, rng));

    dec_.push_back(std::make_unique<nn::Conv2d<float>>(reg_, "dec.in", cfg.latent_channels, ch, 3,
                                                       1, 1, rng));
    dec_act_.push_back(std::make_unique<nn::SiLU<float>>());
    dec_.push_back(std::make_unique<nn::Conv2d<float>>(reg_, "dec.mid", ch, ch, 3, 1, 1, rng));
    dec_act_.push_back(std::make_unique<nn::SiLU<float>>());
    for (int d = n_down_ - 1; d >= 0; --d) {
        dec_up_.push_back(std::make_unique<nn::Upsample2<float>>());
        const int next = enc_channels(d);
        dec_.push_back(std::make_unique<nn::Conv2d<float>>(
            reg_, "dec.up" + std::to_string(d), ch, next, 3, 1, 1, rng));
        dec_act_.push_back(std::make_unique<nn::SiLU<float>>());
        ch = next;
    }
    // 3 colour channels + 1 gate logit for the positional bias map
    dec_.push_back(std::make_unique<nn::Conv2d<float>>(reg_, "dec.out", ch, 4, 3, 1, 1, rng, 0.5));
    out_bias_.name = "dec.bias_map";
    out_bias_.init({3, cfg.image_size, cfg.image_size});
    reg_.add(&out_bias_);
}

Tensor Codec::encode_batch(const Tensor& x, Tensor* logvar_out) {
    if (x.shape.size() != 4 || x.shape[1] != 3 || x.shape[2] != cfg_.image_size ||
        x.shape[3] != cfg_.image_size) {
        fail("codec: encode input shape mismatch (expected NxCx" +
             std::to_string(cfg_.image_size) + "x" + std::to_string(cfg_.image_size) + ")");
    }
    Tensor h = x;
    for (size_t i = 0; i < enc_.size(); ++i) {
        h = enc_[i]->forward(h);
        if (i < enc_act_.size()) h = enc_act_[i]->forward(h);
    }
    if (!variational_) {
        if (logvar_out) *logvar_out = Tensor();
        return h;
    }
    Tensor mean({h.shape[0], cfg_.latent_channels, h.shape[2], h.shape[3]});
    Tensor logvar(mean.shape);
    nn::split_channels(h, cfg_.latent_channels, mean, logvar);
    if (logvar_out) *logvar_out = logvar;
    return mean;
}

Tensor Codec::decode_batch(const Tensor& z) {
    if (z.shape.size() != 4 || z.shape[1] != cfg_.latent_channels ||
        z.shape[2] != cfg_.latent_spatial || z.shape[3] != cfg_.latent_spatial) {
        fail("codec: decode input shape mismatch (expected Nx" +
             std::to_string(cfg_.latent_channels) + "x" + std::to_string(cfg_.latent_spatial) +
             "x" + std::to_string(cfg_.latent_spatial) + ")");
    }
    Tensor h = z;
    size_t up = 0, act = 0;
    for (size_t i = 0; i < dec_.size(); ++i) {
        if (i >= 2 && i + 1 < dec_.size()) h = dec_up_[up++]->forward(h);
        h = dec_[i]->forward(h);
        if (i + 1 < dec_.size()) h = dec_act_[act++]->forward(h);
    }
    // head: colour channels plus a per-pixel gate over the positional bias
    // map (the fixed table texture is position-keyed; plain convs cannot emit
    // it, and ungated addition would have to be cancelled on objects and
    // white backgrounds)
    head_raw_ = h;
    const int s = h.shape[2];
    const size_t plane = static_cast<size_t>(3) * s * s;
    const size_t gate_plane = static_cast<size_t>(s) * s;
    Tensor y({h.shape[0], 3, s, s});
    gate_ = Tensor({h.shape[0], 1, s, s});
    for (int n = 0; n < h.shape[0]; ++n) {
        const float* hc = &h.v[static_cast<size_t>(n) * 4 * gate_plane];
        for (size_t i = 0; i < gate_plane; ++i) {
            const float g = 1.0f / (1.0f + std::exp(-hc[3 * gate_plane + i]));
            gate_.v[n * gate_plane + i] = g;
            for (int c = 0; c < 3; ++c) {
                y.v[n * plane + c * gate_plane + i] =
                    hc[c * gate_plane + i] + g * out_bias_.w.v[c * gate_plane + i];
            }
        }
    }
    return y;
}

Tensor Codec::backward_decoder(const Tensor& gy) {
    const int s = gy.shape[2];
    const size_t gate_plane = static_cast<size_t>(s) * s;
    Tensor g({gy.shape[0], 4, s, s});
    for (int n = 0; n < gy.shape[0]; ++n) {
        for (size_t i = 0; i < gate_plane; ++i) {
            const float gt = gate_.v[n * gate_plane + i];
            float glogit = 0.0f;
            for (int c = 0; c < 3; ++c) {
                const float gyv = gy.v[(static_cast<size_t>(n) * 3 + c) * gate_plane + i];
                g.v[(static_cast<size_t>(n) * 4 + c) * gate_plane + i] = gyv;
                out_bias_.g.v[c * gate_plane + i] += gyv * gt;
                glogit += gyv * out_bias_.w.v[c * gate_plane + i];
            }
            g.v[(static_cast<size_t>(n) * 4 + 3) * gate_plane + i] =
                glogit * gt * (1.0f - gt);
        }
    }
    size_t up = dec_up_.size(), act = dec_act_.size();
    for (size_t i = dec_.size(); i-- > 0;) {
        if (i + 1 < dec_.size()) g = dec_act_[--act]->backward(g);
        g = dec_[i]->backward(g);
        if (i >= 2 && i + 1 < dec_.size()) g = dec_up_[--up]->backward(g);
    }
    return g;
}

void Codec::backward_encoder(const Tensor& g_head) {
    Tensor g = g_head;
    for (size_t i = enc_.size(); i-- > 0;) {
        if (i < enc_act_.size()) g = enc_act_[i]->backward(g);
        g = enc_[i]->backward(g);
    }
}

Latent Codec::encode(const Frame& frame) {
    if (frame.size != cfg_.image_size) fail("codec: frame size mismatch");
    Tensor x = frames_to_tensor({&frame});
    const Tensor z = encode_batch(x, nullptr);
    Latent out(cfg_.latent_spatial, cfg_.latent_channels);
    std::copy(z.v.begin(), z.v.end(), out.v.begin());
    return out;
}

Frame Codec::decode(const Latent& z) {
    if (z.spatial != cfg_.latent_spatial || z.channels != cfg_.latent_channels) {
        fail("codec: latent shape mismatch");
    }
    Tensor zt({1, cfg_.latent_channels, cfg_.latent_spatial, cfg_.latent_spatial});
    std::copy(z.v.begin(), z.v.end(), zt.v.begin());
    const Tensor y = decode_batch(zt);
    Frame f = tensor_to_frame(y, 0);
    for (auto& v : f.px) v = std::clamp(v, 0.0f, 1.0f);
    return f;
}

Tensor frames_to_tensor(const std::vector<const Frame*>& batch) {
    const int n = static_cast<int>(batch.size());
    const int s = batch[0]->size;
    Tensor x({n, 3, s, s});
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) {
            for (int y = 0; y < s; ++y) {
                for (int xx = 0; xx < s; ++xx) {
                    x.v[(((static_cast<size_t>(i) * 3 + c) * s) + y) * s + xx] =
                        batch[i]->at(y, xx, c);
                }
            }
        }
    }
    return x;
}

Frame tensor_to_frame(const Tensor& y, int index) {
    const int s = y.shape[2];
    Frame f(s);
    for (int c = 0; c < 3; ++c) {
        for (int yy = 0; yy < s; ++yy) {
            for (int xx = 0; xx < s; ++xx) {
                f.at(yy, xx, c) = y.v[(((static_cast<size_t>(index) * 3 + c) * s) + yy) * s + xx];
            }
        }
    }
    return f;
}

TrainStats train_codec_on_images(Codec& codec, const std::vector<Frame>& images, int steps,
                                 uint64_t seed) {
    if (images.empty()) fail("train_codec: no training images");
    const Config& cfg = codec.config();
    Rng rng(derive_seed(seed, "codec-train"));
    TrainStats stats;
    const int batch = std::min<int>(cfg.batch_codec, static_cast<int>(images.size()));
    const bool variational = cfg.kl_weight > 0.0;

    for (int step = 0; step < steps; ++step) {
        std::vector<const Frame*> picks;
        for (int b = 0; b < batch; ++b) {
            picks.push_back(&images[rng.below(images.size())]);
        }
        const Tensor x = frames_to_tensor(picks);
        codec.registry().zero_grads();

        Tensor logvar;
        Tensor mean = codec.encode_batch(x, &logvar);
        Tensor z = mean;
        Tensor eps;
        double kl = 0.0;
        if (variational) {
            eps = Tensor(mean.shape);
            for (size_t i = 0; i < z.numel(); ++i) {
                eps.v[i] = static_cast<float>(rng.normal());
                z.v[i] = mean.v[i] + std::exp(0.5f * logvar.v[i]) * eps.v[i];
                kl += 0.5 * (std::exp(logvar.v[i]) + mean.v[i] * mean.v[i] - 1.0 - logvar.v[i]);
            }
            kl /= static_cast<double>(z.numel());
        }

        const Tensor y = codec.decode_batch(z);
        Tensor gy(y.shape);
        double mse = 0.0;
        for (size_t i = 0; i < y.numel(); ++i) {
            const float d = y.v[i] - x.v[i];
            mse += static_cast<double>(d) * d;
            gy.v[i] = 2.0f * d / static_cast<float>(y.numel());
        }
        mse /= static_cast<double>(y.numel());

        const Tensor gz = codec.backward_decoder(gy);
        if (variational) {
            Tensor g_head({gz.shape[0], 2 * cfg.latent_channels, gz.shape[2], gz.shape[3]});
            const size_t half = gz.numel() / gz.shape[0];
            const float w = static_cast<float>(cfg.kl_weight) / static_cast<float>(gz.numel());
            for (int n = 0; n < gz.shape[0]; ++n) {
                for (size_t i = 0; i < half; ++i) {
                    const size_t src = n * half + i;
                    const float std_ = std::exp(0.5f * logvar.v[src]);
                    g_head.v[n * 2 * half + i] = gz.v[src] + w * mean.v[src];
                    g_head.v[n * 2 * half + half + i] =
                        gz.v[src] * eps.v[src] * 0.5f * std_ +
                        w * 0.5f * (std::exp(logvar.v[src]) - 1.0f);
                }
            }
            codec.backward_encoder(g_head);
        } else {
            codec.backward_encoder(gz);
        }
        codec.registry().adam_step(nn::cosine_decay_lr(cfg.lr_codec, step, steps));

        const double loss = mse + cfg.kl_weight * kl;
        stats.losses.push_back(loss);
    }
    stats.initial_loss = stats.losses.front();
    stats.final_loss = stats.losses.back();
    return stats;
}

void save_codec(const fs::path& dir, Codec& codec, const TrainStats& stats) {
    nlohmann::json extra;
    extra["initial_loss"] = stats.initial_loss;
    extra["final_loss"] = stats.final_loss;
    extra["loss_curve"] = stats.losses;
    nn::save_checkpoint(dir, "codec", codec.registry(), codec.config(), extra.dump());
}

std::unique_ptr<Codec> load_codec(const fs::path& dir) {
    const nn::CheckpointInfo info = nn::peek_checkpoint(dir);
    auto codec = std::make_unique<Codec>(info.config);
    nn::load_checkpoint(dir, "codec", codec->registry());
    return codec;
}

} // namespace arp::codec
