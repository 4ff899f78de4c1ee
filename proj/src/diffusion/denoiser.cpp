#include "arp/diffusion.hpp"

#include <cmath>

namespace arp::diff {

namespace {

// per-channel scale/shift from the conditioning vector, applied after a norm
template <typename T>
struct Film {
    nn::Linear<T> lin;
    int channels;
    TensorT<T> h_, scale_; // caches

    Film(nn::Registry<T>& reg, const std::string& name, int cond_dim, int channels_, Rng& rng)
        : lin(reg, name, cond_dim, 2 * channels_, rng, 0.1), channels(channels_) {}

    TensorT<T> forward(const TensorT<T>& h, const TensorT<T>& cond) {
        h_ = h;
        scale_ = lin.forward(cond); // [N, 2C]
        const int n = h.shape[0];
        const size_t hw = static_cast<size_t>(h.shape[2]) * h.shape[3];
        TensorT<T> y(h.shape);
        for (int i = 0; i < n; ++i) {
            for (int c = 0; c < channels; ++c) {
                const T s = T(1) + scale_.v[static_cast<size_t>(i) * 2 * channels + c];
                const T b = scale_.v[static_cast<size_t>(i) * 2 * channels + channels + c];
                const size_t base = (static_cast<size_t>(i) * channels + c) * hw;
                for (size_t k = 0; k < hw; ++k) y.v[base + k] = h.v[base + k] * s + b;
            }
        }
        return y;
    }

    // returns gh; adds this block's contribution into gcond
    TensorT<T> backward(const TensorT<T>& gy, TensorT<T>& gcond) {
        const int n = h_.shape[0];
        const size_t hw = static_cast<size_t>(h_.shape[2]) * h_.shape[3];
        TensorT<T> gh(h_.shape);
        TensorT<T> gsc({n, 2 * channels});
        for (int i = 0; i < n; ++i) {
            for (int c = 0; c < channels; ++c) {
                const T s = T(1) + scale_.v[static_cast<size_t>(i) * 2 * channels + c];
                const size_t base = (static_cast<size_t>(i) * channels + c) * hw;
                T gs = T(0), gb = T(0);
                for (size_t k = 0; k < hw; ++k) {
                    gh.v[base + k] = gy.v[base + k] * s;
                    gs += gy.v[base + k] * h_.v[base + k];
                    gb += gy.v[base + k];
                }
                gsc.v[static_cast<size_t>(i) * 2 * channels + c] = gs;
                gsc.v[static_cast<size_t>(i) * 2 * channels + channels + c] = gb;
            }
        }
        nn::add_inplace(gcond, lin.backward(gsc));
        return gh;
    }
};

template <typename T>
struct CondResBlock {
    nn::GroupNorm<T> gn1, gn2;
    Film<T> film1, film2;
    nn::SiLU<T> act1, act2;
    nn::Conv2d<T> conv1, conv2;
    std::unique_ptr<nn::Conv2d<T>> skip;

    CondResBlock(nn::Registry<T>& reg, const std::string& name, int cin, int cout, int cond_dim,
                 int groups, Rng& rng)
        : gn1(reg, name + ".gn1", cin, groups),
          gn2(reg, name + ".gn2", cout, groups),
          film1(reg, name + ".film1", cond_dim, cin, rng),
          film2(reg, name + ".film2", cond_dim, cout, rng),
          conv1(reg, name + ".conv1", cin, cout, 3, 1, 1, rng),
          conv2(reg, name + ".conv2", cout, cout, 3, 1, 1, rng) {
        if (cin != cout) {
            skip = std::make_unique<nn::Conv2d<T>>(reg, name + ".skip", cin, cout, 1, 1, 0, rng);
        }
    }

    TensorT<T> forward(const TensorT<T>& x, const TensorT<T>& cond) {
        TensorT<T> h = conv1.forward(act1.forward(film1.forward(gn1.forward(x), cond)));
        h = conv2.forward(act2.forward(film2.forward(gn2.forward(h), cond)));
        const TensorT<T> s = skip ? skip->forward(x) : x;
        nn::add_inplace(h, s);
        return h;
    }

    TensorT<T> backward(const TensorT<T>& gy, TensorT<T>& gcond) {
        TensorT<T> g = conv2.backward(gy);
        g = act2.backward(g);
        g = film2.backward(g, gcond);
        g = gn2.backward(g);
        g = conv1.backward(g);
        g = act1.backward(g);
        g = film1.backward(g, gcond);
        g = gn1.backward(g);
        if (skip) {
            nn::add_inplace(g, skip->backward(gy));
        } else {
            nn::add_inplace(g, gy);
        }
        return g;
    }
};

} // namespace

template <typename T>
struct DenoiserT<T>::Impl {
    DenoiserSpec spec;

    nn::Embedding<T> tok_embed;
    nn::Linear<T> text_proj;
    nn::Linear<T> time_l1, time_l2;
    nn::SiLU<T> time_act;
    nn::Param<T> frame_emb;
    bool use_frame_emb;

    nn::Conv2d<T> conv_in;
    CondResBlock<T> rb1;
    std::unique_ptr<nn::Conv2d<T>> down1, down2, upconv1, upconv2;
    std::unique_ptr<CondResBlock<T>> rb2, rbm, rb3, rb4;
    nn::Upsample2<T> up1, up2;
    nn::GroupNorm<T> gn_out;
    nn::SiLU<T> act_out;
    nn::Conv2d<T> conv_out;

    std::unique_ptr<nn::TemporalMix<T>> tm1, tm2, tmm, tm3, tm4;

    // caches
    TensorT<T> cond_;
    TensorT<T> time_feat_in_;
    std::vector<uint8_t> drop_;
    int clips_ = 0;
    TensorT<T> a1t_, b1t_;

    static constexpr int kTimeFeat = 32;

    Impl(const DenoiserSpec& s, nn::Registry<T>& reg, Rng& rng)
        : spec(s),
          tok_embed(reg, "cond.tok", s.vocab, s.text_embed_dim, rng),
          text_proj(reg, "cond.text", s.token_len * s.text_embed_dim, s.cond_dim, rng, 0.5),
          time_l1(reg, "cond.time1", kTimeFeat, s.cond_dim, rng),
          time_l2(reg, "cond.time2", s.cond_dim, s.cond_dim, rng),
          use_frame_emb(s.frames > 1),
          conv_in(reg, "unet.in", s.in_channels, s.base, 3, 1, 1, rng),
          rb1(reg, "unet.rb1", s.base, s.base, s.cond_dim, s.groups, rng),
          gn_out(reg, "unet.gn_out", s.base, s.groups),
          act_out(),
          conv_out(reg, "unet.out", s.base, s.out_channels, 3, 1, 1, rng, 0.0) {
        if (use_frame_emb) {
            frame_emb.name = "cond.frame";
            frame_emb.init({s.frames, s.cond_dim});
            frame_emb.w.fill_normal(rng, 0.1);
            reg.add(&frame_emb);
        }
        if (s.depth >= 2) {
            down1 = std::make_unique<nn::Conv2d<T>>(reg, "unet.down1", s.base, 2 * s.base, 3, 2, 1,
                                                    rng);
            rb2 = std::make_unique<CondResBlock<T>>(reg, "unet.rb2", 2 * s.base, 2 * s.base,
                                                    s.cond_dim, s.groups, rng);
            down2 = std::make_unique<nn::Conv2d<T>>(reg, "unet.down2", 2 * s.base, 2 * s.base, 3,
                                                    2, 1, rng);
            rbm = std::make_unique<CondResBlock<T>>(reg, "unet.rbm", 2 * s.base, 2 * s.base,
                                                    s.cond_dim, s.groups, rng);
            upconv1 = std::make_unique<nn::Conv2d<T>>(reg, "unet.upconv1", 4 * s.base, 2 * s.base,
                                                      3, 1, 1, rng);
            rb3 = std::make_unique<CondResBlock<T>>(reg, "unet.rb3", 2 * s.base, 2 * s.base,
                                                    s.cond_dim, s.groups, rng);
            upconv2 = std::make_unique<nn::Conv2d<T>>(reg, "unet.upconv2", 3 * s.base, s.base, 3,
                                                      1, 1, rng);
            rb4 = std::make_unique<CondResBlock<T>>(reg, "unet.rb4", s.base, s.base, s.cond_dim,
                                                    s.groups, rng);
        }
        if (s.temporal && s.frames > 1) {
            tm1 = std::make_unique<nn::TemporalMix<T>>(reg, "unet.tm1", s.frames);
            if (s.depth >= 2) {
                tm2 = std::make_unique<nn::TemporalMix<T>>(reg, "unet.tm2", s.frames);
                tmm = std::make_unique<nn::TemporalMix<T>>(reg, "unet.tmm", s.frames);
                tm3 = std::make_unique<nn::TemporalMix<T>>(reg, "unet.tm3", s.frames);
                tm4 = std::make_unique<nn::TemporalMix<T>>(reg, "unet.tm4", s.frames);
            }
        }
    }

    TensorT<T> build_cond(const std::vector<int>& t, const std::vector<std::vector<int>>& tokens,
                          const std::vector<uint8_t>& drop) {
        const int b = static_cast<int>(t.size());
        clips_ = b;
        drop_ = drop;
        time_feat_in_ = nn::sinusoidal_embed<T>(t, kTimeFeat);
        TensorT<T> time_feat = time_l2.forward(time_act.forward(time_l1.forward(time_feat_in_)));
        TensorT<T> text_feat = text_proj.forward(tok_embed.forward(tokens));
        for (int i = 0; i < b; ++i) {
            if (drop[i]) {
                for (int d = 0; d < spec.cond_dim; ++d) {
                    text_feat.v[static_cast<size_t>(i) * spec.cond_dim + d] = T(0);
                }
            }
        }
        TensorT<T> cond({b * spec.frames, spec.cond_dim});
        for (int i = 0; i < b; ++i) {
            for (int f = 0; f < spec.frames; ++f) {
                for (int d = 0; d < spec.cond_dim; ++d) {
                    T v = time_feat.v[static_cast<size_t>(i) * spec.cond_dim + d] +
                          text_feat.v[static_cast<size_t>(i) * spec.cond_dim + d];
                    if (use_frame_emb) {
                        v += frame_emb.w.v[static_cast<size_t>(f) * spec.cond_dim + d];
                    }
                    cond.v[(static_cast<size_t>(i) * spec.frames + f) * spec.cond_dim + d] = v;
                }
            }
        }
        return cond;
    }

    void backward_cond(const TensorT<T>& gcond) {
        const int b = clips_;
        TensorT<T> gclip({b, spec.cond_dim});
        for (int i = 0; i < b; ++i) {
            for (int f = 0; f < spec.frames; ++f) {
                for (int d = 0; d < spec.cond_dim; ++d) {
                    const T g =
                        gcond.v[(static_cast<size_t>(i) * spec.frames + f) * spec.cond_dim + d];
                    gclip.v[static_cast<size_t>(i) * spec.cond_dim + d] += g;
                    if (use_frame_emb) {
                        frame_emb.g.v[static_cast<size_t>(f) * spec.cond_dim + d] += g;
                    }
                }
            }
        }
        time_l1.backward(time_act.backward(time_l2.backward(gclip)));
        TensorT<T> gtext = gclip;
        for (int i = 0; i < b; ++i) {
            if (drop_[i]) {
                for (int d = 0; d < spec.cond_dim; ++d) {
                    gtext.v[static_cast<size_t>(i) * spec.cond_dim + d] = T(0);
                }
            }
        }
        tok_embed.backward(text_proj.backward(gtext));
    }

    TensorT<T> forward(const TensorT<T>& x, const TensorT<T>& cond) {
        cond_ = cond;
        TensorT<T> h = conv_in.forward(x);
        h = rb1.forward(h, cond);
        if (tm1) h = tm1->forward(h);
        if (spec.depth >= 2) {
            a1t_ = h;
            h = down1->forward(h);
            h = rb2->forward(h, cond);
            if (tm2) h = tm2->forward(h);
            b1t_ = h;
            h = down2->forward(h);
            h = rbm->forward(h, cond);
            if (tmm) h = tmm->forward(h);
            h = up1.forward(h);
            h = nn::concat_channels(h, b1t_);
            h = upconv1->forward(h);
            h = rb3->forward(h, cond);
            if (tm3) h = tm3->forward(h);
            h = up2.forward(h);
            h = nn::concat_channels(h, a1t_);
            h = upconv2->forward(h);
            h = rb4->forward(h, cond);
            if (tm4) h = tm4->forward(h);
        }
        h = gn_out.forward(h);
        h = act_out.forward(h);
        return conv_out.forward(h);
    }

    void backward(const TensorT<T>& gy) {
        TensorT<T> gcond(cond_.shape);
        TensorT<T> g = conv_out.backward(gy);
        g = act_out.backward(g);
        g = gn_out.backward(g);
        if (spec.depth >= 2) {
            if (tm4) g = tm4->backward(g);
            g = rb4->backward(g, gcond);
            g = upconv2->backward(g);
            TensorT<T> g_up2, g_a1t_cc;
            nn::split_channels(g, 2 * spec.base, g_up2, g_a1t_cc);
            g = up2.backward(g_up2);
            if (tm3) g = tm3->backward(g);
            g = rb3->backward(g, gcond);
            g = upconv1->backward(g);
            TensorT<T> g_up1, g_b1t_cc;
            nn::split_channels(g, 2 * spec.base, g_up1, g_b1t_cc);
            g = up1.backward(g_up1);
            if (tmm) g = tmm->backward(g);
            g = rbm->backward(g, gcond);
            g = down2->backward(g);
            nn::add_inplace(g, g_b1t_cc);
            if (tm2) g = tm2->backward(g);
            g = rb2->backward(g, gcond);
            g = down1->backward(g);
            nn::add_inplace(g, g_a1t_cc);
        }
        if (tm1) g = tm1->backward(g);
        g = rb1.backward(g, gcond);
        conv_in.backward(g);
        backward_cond(gcond);
    }
};

template <typename T>
DenoiserT<T>::DenoiserT(const DenoiserSpec& spec, uint64_t init_seed) : spec_(spec) {
    if (spec.depth >= 2 && spec.spatial % 4 != 0) {
        fail("denoiser: spatial size must be divisible by 4");
    }
    if (spec.depth < 1 || spec.depth > 2) fail("denoiser: depth must be 1 or 2");
    Rng rng(derive_seed(init_seed, "denoiser-init"));
    impl_ = std::make_unique<Impl>(spec, reg_, rng);
}

template <typename T>
DenoiserT<T>::~DenoiserT() = default;

template <typename T>
TensorT<T> DenoiserT<T>::forward(const TensorT<T>& x, const std::vector<int>& t,
                                 const std::vector<std::vector<int>>& tokens,
                                 const std::vector<uint8_t>& text_drop) {
    if (x.shape.size() != 4 || x.shape[1] != spec_.in_channels || x.shape[2] != spec_.spatial ||
        x.shape[3] != spec_.spatial) {
        fail("denoiser: input shape mismatch");
    }
    const int clips = static_cast<int>(t.size());
    if (x.shape[0] != clips * spec_.frames) fail("denoiser: clip count mismatch");
    if (tokens.size() != t.size() || text_drop.size() != t.size()) {
        fail("denoiser: conditioning size mismatch");
    }
    const TensorT<T> cond = impl_->build_cond(t, tokens, text_drop);
    return impl_->forward(x, cond);
}

template <typename T>
void DenoiserT<T>::backward(const TensorT<T>& gy) {
    impl_->backward(gy);
}

template class DenoiserT<float>;
template class DenoiserT<double>;

// ---- channel packing ----

std::string layout_string(bool video, bool active_region) {
    if (!video) return "o_t,x0";
    return active_region ? "x_t,o,x0,o" : "x_t,x0";
}

int packed_channels(const Config& cfg, bool video, bool active_region) {
    const int c = cfg.latent_channels;
    if (!video) return 2 * c;
    return active_region ? 4 * c : 2 * c;
}

Tensor pack_ar_input(const Config& cfg, const Tensor& noised_o, const Tensor& x0) {
    (void)cfg;
    return nn::concat_channels(noised_o, x0);
}

Tensor pack_video_input(const Config& cfg, const Tensor& noised_frames, const Tensor& x0,
                        const Tensor* o, int frames) {
    const int clips = noised_frames.shape[0] / frames;
    const int c = cfg.latent_channels;
    const int s = cfg.latent_spatial;
    const int out_c = packed_channels(cfg, true, o != nullptr);
    Tensor packed({noised_frames.shape[0], out_c, s, s});
    const size_t plane = static_cast<size_t>(c) * s * s;
    const size_t row_stride = static_cast<size_t>(out_c) * s * s;
    for (int b = 0; b < clips; ++b) {
        for (int f = 0; f < frames; ++f) {
            const size_t row = static_cast<size_t>(b) * frames + f;
            float* dst = &packed.v[row * row_stride];
            const float* noised = &noised_frames.v[row * plane];
            std::memcpy(dst, noised, plane * sizeof(float));
            size_t off = plane;
            if (o) {
                std::memcpy(dst + off, &o->v[static_cast<size_t>(b) * plane],
                            plane * sizeof(float));
                off += plane;
            }
            std::memcpy(dst + off, &x0.v[static_cast<size_t>(b) * plane], plane * sizeof(float));
            off += plane;
            if (o) {
                std::memcpy(dst + off, &o->v[static_cast<size_t>(b) * plane],
                            plane * sizeof(float));
            }
        }
    }
    return packed;
}

Tensor unpack_noised_slice(const Config& cfg, const Tensor& packed) {
    const int c = cfg.latent_channels;
    Tensor out({packed.shape[0], c, packed.shape[2], packed.shape[3]});
    const size_t plane = static_cast<size_t>(c) * packed.shape[2] * packed.shape[3];
    const size_t stride = static_cast<size_t>(packed.shape[1]) * packed.shape[2] * packed.shape[3];
    for (int n = 0; n < packed.shape[0]; ++n) {
        std::memcpy(&out.v[n * plane], &packed.v[n * stride], plane * sizeof(float));
    }
    return out;
}

} // namespace arp::diff
