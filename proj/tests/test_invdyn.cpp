#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "arp/codec.hpp"
#include "arp/invdyn.hpp"
#include "arp/sim.hpp"

using namespace arp;
using namespace arp::invdyn;

namespace {

Config tiny_cfg() {
    Config cfg;
    cfg.image_size = 32;
    cfg.latent_spatial = 8;
    cfg.horizon_H = 3;
    cfg.invdyn_channels = 16;
    cfg.batch_invdyn = 8;
    validate_config(cfg);
    return cfg;
}

// latent pairs from expert episodes through a lightly trained codec
std::vector<LatentPair> make_pairs(const Config& cfg, int episodes, uint64_t seed0,
                                   codec::Codec& cdc) {
    std::vector<LatentPair> pairs;
    for (int i = 0; i < episodes; ++i) {
        const Episode ep = sim::rollout_expert(seed0 + i, static_cast<int>(i % kNumTemplates), cfg);
        std::vector<Latent> zs;
        for (const Frame& f : ep.frames) zs.push_back(cdc.encode(f));
        for (int h = 0; h < cfg.horizon_H; ++h) {
            pairs.push_back({zs[h], zs[h + 1], ep.actions[h]});
        }
    }
    return pairs;
}

} // namespace

TEST_CASE("invdyn: training reduces loss deterministically; outputs clamped") {
    const Config cfg = tiny_cfg();
    codec::Codec cdc(cfg, 0);
    auto pairs = make_pairs(cfg, 6, 700, cdc);

    InvDyn m1(cfg, 1);
    const auto s1 = train_invdyn(m1, pairs, 60, 1);
    CHECK(s1.final_loss < s1.initial_loss);

    InvDyn m2(cfg, 1);
    const auto s2 = train_invdyn(m2, pairs, 60, 1);
    CHECK(m1.registry().content_hash() == m2.registry().content_hash());
    CHECK(s1.final_loss == s2.final_loss);

    // clamp contract on arbitrary finite latents
    Rng rng(9);
    Latent a(cfg.latent_spatial, cfg.latent_channels), b = a;
    for (auto& v : a.v) v = static_cast<float>(rng.normal() * 50);
    for (auto& v : b.v) v = static_cast<float>(rng.normal() * 50);
    const Action act = decode_action(m1, a, b);
    for (double v : act.values) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("invdyn: decode_sequence is pairwise decode_action") {
    const Config cfg = tiny_cfg();
    codec::Codec cdc(cfg, 0);
    InvDyn model(cfg, 2);
    const Episode ep = sim::rollout_expert(800, 0, cfg);
    std::vector<Latent> zs;
    for (const Frame& f : ep.frames) zs.push_back(cdc.encode(f));

    const auto seq = decode_sequence(model, zs);
    REQUIRE(seq.size() == zs.size() - 1);
    for (size_t h = 0; h + 1 < zs.size(); ++h) {
        const Action single = decode_action(model, zs[h], zs[h + 1]);
        CHECK(seq[h].values == single.values);
    }

    // ordering matters
    std::vector<Latent> rev(zs.rbegin(), zs.rend());
    const auto seq_rev = decode_sequence(model, rev);
    bool any_diff = false;
    for (size_t h = 0; h < seq.size(); ++h) {
        if (seq[h].values != seq_rev[h].values) any_diff = true;
    }
    CHECK(any_diff);

    CHECK_THROWS_AS(decode_sequence(model, {zs[0]}), error);
}

TEST_CASE("invdyn: 7 latents give 6 actions") {
    Config cfg = tiny_cfg();
    cfg.horizon_H = 6;
    validate_config(cfg);
    InvDyn model(cfg, 3);
    std::vector<Latent> zs(7, Latent(cfg.latent_spatial, cfg.latent_channels));
    CHECK(decode_sequence(model, zs).size() == 6);
}

TEST_CASE("invdyn: shape mismatch rejected") {
    const Config cfg = tiny_cfg();
    InvDyn model(cfg, 4);
    Latent good(cfg.latent_spatial, cfg.latent_channels);
    Latent bad(cfg.latent_spatial / 2, cfg.latent_channels);
    CHECK_THROWS_AS(decode_action(model, good, bad), error);
    CHECK_THROWS_AS(train_invdyn(model, {}, 5, 0), error);
}

TEST_CASE("invdyn: checkpoint round trip") {
    const Config cfg = tiny_cfg();
    codec::Codec cdc(cfg, 0);
    auto pairs = make_pairs(cfg, 2, 820, cdc);
    InvDyn model(cfg, 5);
    const auto stats = train_invdyn(model, pairs, 10, 5);
    const fs::path dir = fs::temp_directory_path() / "arp_invdyn_ckpt";
    fs::remove_all(dir);
    save_invdyn(dir, model, stats, "deadbeef");

    std::string codec_hash;
    auto loaded = load_invdyn(dir, &codec_hash);
    CHECK(codec_hash == "deadbeef");
    CHECK(loaded->registry().content_hash() == model.registry().content_hash());
    CHECK(loaded->latent_mean == model.latent_mean);

    const Latent z(cfg.latent_spatial, cfg.latent_channels);
    CHECK(decode_action(*loaded, z, z).values == decode_action(model, z, z).values);
}
