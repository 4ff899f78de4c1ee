#include "arp/invdyn.hpp"

#include <json.hpp>

#include <cmath>

namespace arp::invdyn {

using nlohmann::json;

namespace {

struct PlainResBlock {
    nn::GroupNorm<float> gn1, gn2;
    nn::SiLU<float> act1, act2;
    nn::Conv2d<float> conv1, conv2;

    PlainResBlock(nn::Registry<float>& reg, const std::string& name, int ch, int groups, Rng& rng)
        : gn1(reg, name + ".gn1", ch, groups),
          gn2(reg, name + ".gn2", ch, groups),
          conv1(reg, name + ".conv1", ch, ch, 3, 1, 1, rng),
          conv2(reg, name + ".conv2", ch, ch, 3, 1, 1, rng) {}

    Tensor forward(const Tensor& x) {
        Tensor h = conv1.forward(act1.forward(gn1.forward(x)));
        h = conv2.forward(act2.forward(gn2.forward(h)));
        nn::add_inplace(h, x);
        return h;
    }

    Tensor backward(const Tensor& gy) {
        Tensor g = conv2.backward(gy);
        g = act2.backward(g);
        g = gn2.backward(g);
        g = conv1.backward(g);
        g = act1.backward(g);
        g = gn1.backward(g);
        nn::add_inplace(g, gy);
        return g;
    }
};

} // namespace

struct InvDyn::Impl {
    nn::Registry<float> reg;
    nn::Conv2d<float> conv_in;
    PlainResBlock rb1;
    nn::Conv2d<float> down1;
    nn::SiLU<float> act_d1;
    PlainResBlock rb2;
    nn::Conv2d<float> down2;
    nn::SiLU<float> act_d2;
    PlainResBlock rb3;
    nn::Linear<float> head;
    int flat_dim;
    std::vector<int> pre_flat_shape;

    Impl(const Config& cfg, Rng& rng)
        : conv_in(reg, "in", 2 * cfg.latent_channels, cfg.invdyn_channels, 3, 1, 1, rng),
          rb1(reg, "rb1", cfg.invdyn_channels, 4, rng),
          down1(reg, "down1", cfg.invdyn_channels, 2 * cfg.invdyn_channels, 3, 2, 1, rng),
          rb2(reg, "rb2", 2 * cfg.invdyn_channels, 4, rng),
          down2(reg, "down2", 2 * cfg.invdyn_channels, 2 * cfg.invdyn_channels, 3, 2, 1, rng),
          rb3(reg, "rb3", 2 * cfg.invdyn_channels, 4, rng),
          head(reg, "head",
               2 * cfg.invdyn_channels * (cfg.latent_spatial / 4) * (cfg.latent_spatial / 4),
               cfg.action_dim, rng, 0.5),
          flat_dim(2 * cfg.invdyn_channels * (cfg.latent_spatial / 4) * (cfg.latent_spatial / 4)) {}

    Tensor forward(const Tensor& x) {
        Tensor h = conv_in.forward(x);
        h = rb1.forward(h);
        h = act_d1.forward(down1.forward(h));
        h = rb2.forward(h);
        h = act_d2.forward(down2.forward(h));
        h = rb3.forward(h);
        pre_flat_shape = h.shape;
        Tensor flat({h.shape[0], flat_dim});
        flat.v = h.v;
        return head.forward(flat);
    }

    void backward(const Tensor& gy) {
        Tensor g = head.backward(gy);
        Tensor unflat(pre_flat_shape);
        unflat.v = g.v;
        g = rb3.backward(unflat);
        g = down2.backward(act_d2.backward(g));
        g = rb2.backward(g);
        g = down1.backward(act_d1.backward(g));
        g = rb1.backward(g);
        conv_in.backward(g);
    }
};

InvDyn::InvDyn(const Config& cfg, uint64_t init_seed) : cfg_(cfg) {
    validate_config(cfg);
    if (cfg.latent_spatial % 4 != 0) fail("invdyn: latent_spatial must be divisible by 4");
    Rng rng(derive_seed(init_seed, "invdyn-init"));
    impl_ = std::make_unique<Impl>(cfg, rng);
}

InvDyn::~InvDyn() = default;

Tensor InvDyn::forward(const Tensor& x) {
    if (x.shape.size() != 4 || x.shape[1] != 2 * cfg_.latent_channels ||
        x.shape[2] != cfg_.latent_spatial || x.shape[3] != cfg_.latent_spatial) {
        fail("invdyn: input shape mismatch");
    }
    return impl_->forward(x);
}

void InvDyn::backward(const Tensor& gy) { impl_->backward(gy); }

nn::Registry<float>& InvDyn::registry() { return impl_->reg; }

namespace {

Tensor pairs_to_tensor(const InvDyn& model, const std::vector<const LatentPair*>& batch,
                       double mean, double stddev) {
    const Config& cfg = model.config();
    const int s = cfg.latent_spatial, c = cfg.latent_channels;
    const size_t plane = static_cast<size_t>(c) * s * s;
    Tensor x({static_cast<int>(batch.size()), 2 * c, s, s});
    for (size_t i = 0; i < batch.size(); ++i) {
        for (size_t k = 0; k < plane; ++k) {
            x.v[i * 2 * plane + k] =
                static_cast<float>((batch[i]->before.v[k] - mean) / stddev);
            x.v[i * 2 * plane + plane + k] =
                static_cast<float>((batch[i]->after.v[k] - mean) / stddev);
        }
    }
    return x;
}

} // namespace

InvDynStats train_invdyn(InvDyn& model, const std::vector<LatentPair>& pairs, int steps,
                         uint64_t seed) {
    if (pairs.empty()) fail("train_invdyn: no training pairs");
    const Config& cfg = model.config();
    for (const auto& p : pairs) {
        if (static_cast<int>(p.action.values.size()) != cfg.action_dim) {
            fail("train_invdyn: action dimensionality mismatch");
        }
    }

    // scalar latent normalization, recorded in the checkpoint
    double sum = 0.0;
    size_t n = 0;
    for (const auto& p : pairs) {
        for (float v : p.before.v) sum += v;
        for (float v : p.after.v) sum += v;
        n += p.before.v.size() + p.after.v.size();
    }
    const double mean = sum / static_cast<double>(n);
    double var = 0.0;
    for (const auto& p : pairs) {
        for (float v : p.before.v) var += (v - mean) * (v - mean);
        for (float v : p.after.v) var += (v - mean) * (v - mean);
    }
    model.latent_mean = mean;
    model.latent_std = std::sqrt(std::max(var / static_cast<double>(n), 1e-8));

    Rng rng(derive_seed(seed, "invdyn-train"));
    InvDynStats stats;
    const int batch = std::min<int>(cfg.batch_invdyn, static_cast<int>(pairs.size()));
    for (int step = 0; step < steps; ++step) {
        std::vector<const LatentPair*> picks;
        for (int b = 0; b < batch; ++b) picks.push_back(&pairs[rng.below(pairs.size())]);
        const Tensor x = pairs_to_tensor(model, picks, model.latent_mean, model.latent_std);
        model.registry().zero_grads();
        const Tensor y = model.forward(x);
        Tensor gy(y.shape);
        double loss = 0.0;
        for (int b = 0; b < batch; ++b) {
            for (int d = 0; d < cfg.action_dim; ++d) {
                const float target = static_cast<float>(picks[b]->action.values[d]);
                const float diff = y.v[static_cast<size_t>(b) * cfg.action_dim + d] - target;
                loss += std::abs(diff);
                gy.v[static_cast<size_t>(b) * cfg.action_dim + d] =
                    (diff > 0 ? 1.0f : (diff < 0 ? -1.0f : 0.0f)) /
                    static_cast<float>(batch * cfg.action_dim);
            }
        }
        loss /= static_cast<double>(batch * cfg.action_dim);
        model.backward(gy);
        model.registry().adam_step(nn::cosine_decay_lr(cfg.lr_invdyn, step, steps));
        stats.losses.push_back(loss);
    }
    stats.initial_loss = stats.losses.front();
    stats.final_loss = stats.losses.back();
    return stats;
}

Action decode_action(InvDyn& model, const Latent& before, const Latent& after) {
    const Config& cfg = model.config();
    if (before.spatial != cfg.latent_spatial || before.channels != cfg.latent_channels ||
        after.spatial != cfg.latent_spatial || after.channels != cfg.latent_channels) {
        fail("decode_action: latent shape mismatch");
    }
    LatentPair p{before, after, Action(cfg.action_dim)};
    const Tensor x = pairs_to_tensor(model, {&p}, model.latent_mean, model.latent_std);
    const Tensor y = const_cast<InvDyn&>(model).forward(x);
    Action a(cfg.action_dim);
    for (int d = 0; d < cfg.action_dim; ++d) {
        a.values[d] = std::clamp(static_cast<double>(y.v[d]), -1.0, 1.0);
    }
    return a;
}

std::vector<Action> decode_sequence(InvDyn& model, const std::vector<Latent>& latents) {
    if (latents.size() < 2) fail("decode_sequence: need at least 2 latents");
    std::vector<Action> actions;
    actions.reserve(latents.size() - 1);
    for (size_t h = 0; h + 1 < latents.size(); ++h) {
        actions.push_back(decode_action(model, latents[h], latents[h + 1]));
    }
    return actions;
}

void save_invdyn(const fs::path& dir, InvDyn& model, const InvDynStats& stats,
                 const std::string& codec_hash) {
    json extra;
    extra["initial_loss"] = stats.initial_loss;
    extra["final_loss"] = stats.final_loss;
    extra["loss_curve"] = stats.losses;
    extra["latent_mean"] = model.latent_mean;
    extra["latent_std"] = model.latent_std;
    extra["codec_hash"] = codec_hash;
    nn::save_checkpoint(dir, "invdyn", model.registry(), model.config(), extra.dump());
}

std::unique_ptr<InvDyn> load_invdyn(const fs::path& dir, std::string* codec_hash_out) {
    const nn::CheckpointInfo info = nn::peek_checkpoint(dir);
    auto model = std::make_unique<InvDyn>(info.config);
    nn::load_checkpoint(dir, "invdyn", model->registry());
    const json extra = json::parse(info.extra_json);
    model->latent_mean = extra.at("latent_mean").get<double>();
    model->latent_std = extra.at("latent_std").get<double>();
    if (codec_hash_out) *codec_hash_out = extra.at("codec_hash").get<std::string>();
    return model;
}

double action_l1(const Action& predicted, const Action& truth) {
    if (predicted.values.size() != truth.values.size()) fail("action_l1: dimension mismatch");
    double sum = 0.0;
    for (size_t i = 0; i < predicted.values.size(); ++i) {
        sum += std::abs(predicted.values[i] - truth.values[i]);
    }
    return sum / static_cast<double>(predicted.values.size());
}

} // namespace arp::invdyn
