// Link-level proof that action decoding never reaches the frame decoder:
// this binary uses the full inverse dynamics API (training, pairwise and
// sequence decoding) and links against arp_invdyn, arp_sim and arp_core only.
// The frame codec library is absent, so any dependency from inverse dynamics
// on frame reconstruction would fail to link.

#include <cstdio>

#include "arp/invdyn.hpp"
#include "arp/rng.hpp"
#include "arp/sim.hpp"

using namespace arp;

int main() {
    Config cfg;
    cfg.image_size = 32;
    cfg.latent_spatial = 8;
    cfg.horizon_H = 3;
    cfg.invdyn_channels = 16;
    cfg.batch_invdyn = 4;
    validate_config(cfg);

    // synthetic latent pairs only; no encoder, no decoder
    Rng rng(1);
    std::vector<invdyn::LatentPair> pairs;
    for (int i = 0; i < 24; ++i) {
        invdyn::LatentPair p;
        p.before = Latent(cfg.latent_spatial, cfg.latent_channels);
        p.after = Latent(cfg.latent_spatial, cfg.latent_channels);
        for (auto& v : p.before.v) v = static_cast<float>(rng.normal());
        for (auto& v : p.after.v) v = static_cast<float>(rng.normal());
        p.action = Action(cfg.action_dim);
        for (auto& v : p.action.values) v = rng.uniform(-1, 1);
        pairs.push_back(std::move(p));
    }

    invdyn::InvDyn model(cfg, 0);
    const auto stats = invdyn::train_invdyn(model, pairs, 5, 0);
    if (!(stats.losses.size() == 5)) {
        std::fprintf(stderr, "unexpected loss curve length\n");
        return 1;
    }

    std::vector<Latent> seq(cfg.horizon_H + 1, Latent(cfg.latent_spatial, cfg.latent_channels));
    const auto actions = invdyn::decode_sequence(model, seq);
    if (actions.size() != static_cast<size_t>(cfg.horizon_H)) {
        std::fprintf(stderr, "unexpected action count\n");
        return 1;
    }
    for (const auto& a : actions) {
        for (double v : a.values) {
            if (v < -1.0 || v > 1.0) {
                std::fprintf(stderr, "clamp violated\n");
                return 1;
            }
        }
    }
    std::printf("inverse dynamics stands alone: %zu params, no frame decoder linked\n",
                model.registry().total_count());
    return 0;
}
