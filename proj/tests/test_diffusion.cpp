#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "arp/diffusion.hpp"
#include "arp/episode_store.hpp"
#include "arp/sim.hpp"

using namespace arp;
using namespace arp::diff;

namespace {

Config tiny_cfg() {
    Config cfg;
    cfg.image_size = 32;
    cfg.latent_spatial = 8;
    cfg.horizon_H = 3;
    cfg.grid_M = 8;
    cfg.unet_channels = 8;
    cfg.cond_dim = 16;
    cfg.text_embed_dim = 4;
    cfg.diffusion_steps = 50;
    cfg.batch_ar = 4;
    cfg.batch_planner = 2;
    cfg.batch_codec = 4;
    cfg.tau = 2.0;
    validate_config(cfg);
    return cfg;
}

fs::path temp_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("arp_diff_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

struct MiniWorld {
    Config cfg = tiny_cfg();
    fs::path store = temp_dir("store");
    fs::path codec_dir = temp_dir("codec");
    fs::path regions_dir = temp_dir("do");
    region::RegionManifest regions;

    MiniWorld() {
        sim::generate_dataset(4, 60, store, 0, cfg);
        std::vector<Frame> images;
        for (int i = 0; i < 4; ++i) {
            const Episode ep = load_episode(store, episode_id_from_index(i), cfg);
            for (const Frame& f : ep.frames) images.push_back(f);
        }
        codec::Codec cdc(cfg, 0);
        const auto stats = codec::train_codec_on_images(cdc, images, 8, 0);
        codec::save_codec(codec_dir, cdc, stats);
        regions = region::mine_dataset(store, codec_dir, regions_dir, region::MiningSource::oracle,
                                       2.0, cfg);
    }
};

MiniWorld& mini_world() {
    static MiniWorld w;
    return w;
}

// exhaustive central-difference check of every parameter
template <typename Net>
double max_rel_grad_error(Net& net, const TensorT<double>& x, const std::vector<int>& ts,
                          const std::vector<std::vector<int>>& tokens,
                          const std::vector<uint8_t>& drop, const TensorT<double>& target) {
    auto loss_fn = [&]() {
        const auto pred = net.forward(x, ts, tokens, drop);
        double l = 0.0;
        for (size_t i = 0; i < pred.numel(); ++i) {
            const double d = pred.v[i] - target.v[i];
            l += d * d;
        }
        return l / static_cast<double>(pred.numel());
    };
    net.registry().zero_grads();
    const auto pred = net.forward(x, ts, tokens, drop);
    TensorT<double> gy(pred.shape);
    for (size_t i = 0; i < pred.numel(); ++i) {
        gy.v[i] = 2.0 * (pred.v[i] - target.v[i]) / static_cast<double>(pred.numel());
    }
    net.backward(gy);

    double max_rel = 0.0;
    const double eps = 1e-5;
    for (auto* p : net.registry().params()) {
        for (size_t i = 0; i < p->w.numel(); ++i) {
            const double keep = p->w.v[i];
            p->w.v[i] = keep + eps;
            const double lp = loss_fn();
            p->w.v[i] = keep - eps;
            const double lm = loss_fn();
            p->w.v[i] = keep;
            const double num = (lp - lm) / (2 * eps);
            const double ana = p->g.v[i];
            const double denom = std::max({std::abs(num), std::abs(ana), 1e-6});
            max_rel = std::max(max_rel, std::abs(num - ana) / denom);
        }
    }
    return max_rel;
}

} // namespace

TEST_CASE("noise schedule invariants (cosine and linear)") {
    for (const std::string name : {"cosine", "linear"}) {
        for (int steps : {60, 100}) {
            const NoiseSchedule s = NoiseSchedule::make(name, steps);
            CHECK(s.signal[0] >= 1.0 - 1e-3);
            for (int t = 0; t < steps; ++t) {
                CHECK(s.signal[t] > 0.0);
                CHECK(s.signal[t] <= 1.0);
                CHECK(std::abs(s.signal[t] * s.signal[t] + s.noise[t] * s.noise[t] - 1.0) < 1e-12);
                if (t > 0) CHECK(s.signal[t] < s.signal[t - 1]);
            }
        }
    }
    CHECK_THROWS_AS(NoiseSchedule::make("exotic", 10), error);
    // the t=0 signal invariant bounds the step count from below
    CHECK_THROWS_AS(NoiseSchedule::make("cosine", 20), error);
}

TEST_CASE("forward_noise: endpoint behaviour") {
    const NoiseSchedule s = NoiseSchedule::make("cosine", 50);
    Rng rng(1);
    TensorT<float> z0({1, 2, 4, 4}), eps(z0.shape), out;
    for (auto& v : z0.v) v = static_cast<float>(rng.normal());
    for (auto& v : eps.v) v = static_cast<float>(rng.normal());

    // t=0: nearly the clean latent
    forward_noise(s, z0, 0, eps, out);
    for (size_t i = 0; i < z0.numel(); ++i) {
        CHECK(out.v[i] == doctest::Approx(z0.v[i]).epsilon(0.15));
    }
    // eps=0: exactly signal * z0
    TensorT<float> zero(z0.shape);
    forward_noise(s, z0, 10, zero, out);
    for (size_t i = 0; i < z0.numel(); ++i) {
        CHECK(out.v[i] == static_cast<float>(s.signal[10]) * z0.v[i]);
    }
    // t=T-1 with z0=0: noise-scaled eps, nearly pure noise
    forward_noise(s, zero, s.steps - 1, eps, out);
    for (size_t i = 0; i < z0.numel(); ++i) {
        CHECK(out.v[i] == doctest::Approx(s.noise[s.steps - 1] * eps.v[i]).epsilon(1e-6));
    }
    CHECK_THROWS_AS(forward_noise(s, z0, 50, eps, out), error);
}

TEST_CASE("conditioning pack/unpack is the identity on the noised slice") {
    Config cfg = tiny_cfg();
    Rng rng(2);
    const int clips = 2, h = cfg.horizon_H;
    Tensor noised({clips * h, cfg.latent_channels, cfg.latent_spatial, cfg.latent_spatial});
    Tensor x0({clips, cfg.latent_channels, cfg.latent_spatial, cfg.latent_spatial});
    Tensor o(x0.shape);
    for (auto& v : noised.v) v = static_cast<float>(rng.normal());
    for (auto& v : x0.v) v = static_cast<float>(rng.normal());
    for (auto& v : o.v) v = static_cast<float>(rng.normal());

    const Tensor packed_on = pack_video_input(cfg, noised, x0, &o, h);
    CHECK(packed_on.shape[1] == 4 * cfg.latent_channels);
    CHECK(unpack_noised_slice(cfg, packed_on).v == noised.v);

    const Tensor packed_off = pack_video_input(cfg, noised, x0, nullptr, h);
    CHECK(packed_off.shape[1] == 2 * cfg.latent_channels);
    CHECK(unpack_noised_slice(cfg, packed_off).v == noised.v);

    // dual concatenation layout: [x_t | o | x0 | o] per frame
    const int c = cfg.latent_channels, s = cfg.latent_spatial;
    const size_t plane = static_cast<size_t>(c) * s * s;
    for (int b = 0; b < clips; ++b) {
        for (int f = 0; f < h; ++f) {
            const float* row = &packed_on.v[(static_cast<size_t>(b) * h + f) * 4 * plane];
            for (size_t i = 0; i < plane; ++i) {
                CHECK(row[plane + i] == o.v[b * plane + i]);
                CHECK(row[2 * plane + i] == x0.v[b * plane + i]);
                CHECK(row[3 * plane + i] == o.v[b * plane + i]);
            }
        }
    }
    CHECK(layout_string(true, true) == "x_t,o,x0,o");
    CHECK(layout_string(true, false) == "x_t,x0");
    CHECK(layout_string(false, false) == "o_t,x0");
}

TEST_CASE("denoiser gradients match finite differences (<=1k params, all checked)") {
    DenoiserSpec spec;
    spec.in_channels = 2;
    spec.out_channels = 1;
    spec.base = 4;
    spec.cond_dim = 8;
    spec.frames = 1;
    spec.temporal = false;
    spec.vocab = 4;
    spec.token_len = 4;
    spec.text_embed_dim = 2;
    spec.spatial = 4;
    spec.depth = 1;
    DenoiserT<double> net(spec, 11);
    REQUIRE(net.registry().total_count() <= 1000);

    Rng rng(3);
    TensorT<double> x({1, 2, 4, 4}), target({1, 1, 4, 4});
    for (auto& v : x.v) v = rng.normal();
    for (auto& v : target.v) v = rng.normal();
    const double rel = max_rel_grad_error(net, x, {7}, {{1, 2, 3, 0}}, {0}, target);
    MESSAGE("depth-1 max relative gradient error: ", rel);
    CHECK(rel <= 1e-3);
}

TEST_CASE("denoiser gradients: full U-Net with temporal mixing") {
    DenoiserSpec spec;
    spec.in_channels = 2;
    spec.out_channels = 1;
    spec.base = 4;
    spec.cond_dim = 8;
    spec.frames = 2;
    spec.temporal = true;
    spec.vocab = 4;
    spec.token_len = 4;
    spec.text_embed_dim = 2;
    spec.spatial = 8;
    spec.depth = 2;
    DenoiserT<double> net(spec, 12);

    Rng rng(4);
    TensorT<double> x({2, 2, 8, 8}), target({2, 1, 8, 8});
    for (auto& v : x.v) v = rng.normal();
    for (auto& v : target.v) v = rng.normal();
    const double rel = max_rel_grad_error(net, x, {3}, {{2, 1, 0, 0}}, {0}, target);
    MESSAGE("full U-Net max relative gradient error: ", rel);
    CHECK(rel <= 1e-3);
}

TEST_CASE("ablation parity: parameter count differs only by first-layer region channels") {
    const Config cfg = tiny_cfg();
    const DenoiserSpec* dummy = nullptr;
    (void)dummy;
    DenoiserSpec on, off;
    on.in_channels = packed_channels(cfg, true, true);
    off.in_channels = packed_channels(cfg, true, false);
    on.out_channels = off.out_channels = cfg.latent_channels;
    on.base = off.base = cfg.unet_channels;
    on.cond_dim = off.cond_dim = cfg.cond_dim;
    on.frames = off.frames = cfg.horizon_H;
    on.temporal = off.temporal = true;
    on.vocab = off.vocab = static_cast<int>(cfg.vocab.size());
    on.token_len = off.token_len = cfg.max_tokens;
    on.text_embed_dim = off.text_embed_dim = cfg.text_embed_dim;
    on.spatial = off.spatial = cfg.latent_spatial;
    Denoiser net_on(on, 0), net_off(off, 0);
    const size_t diff_params = net_on.registry().total_count() - net_off.registry().total_count();
    const size_t expected =
        static_cast<size_t>(on.in_channels - off.in_channels) * cfg.unet_channels * 9;
    CHECK(diff_params == expected);
}

TEST_CASE("active region model: trains, deterministic, samples reproducibly") {
    MiniWorld& w = mini_world();
    const fs::path dir1 = temp_dir("ar1");
    const fs::path dir2 = temp_dir("ar2");
    const auto s1 = train_active_region_model(w.regions, w.cfg, 5, 30, false, dir1);
    const auto s2 = train_active_region_model(w.regions, w.cfg, 5, 30, false, dir2);
    CHECK(s1.final_loss == s2.final_loss);
    CHECK(s1.final_loss < s1.initial_loss);

    ArModel m1 = load_ar_model(dir1);
    ArModel m2 = load_ar_model(dir2);
    CHECK(m1.net->registry().content_hash() == m2.net->registry().content_hash());

    auto cdc = codec::load_codec(w.codec_dir);
    const Episode ep = load_episode(w.store, "ep_000000", w.cfg);
    const Latent x0 = cdc->encode(ep.frames[0]);
    const Latent o1 = sample_active_region(m1, x0, ep.task, 99);
    const Latent o2 = sample_active_region(m1, x0, ep.task, 99);
    CHECK(o1.v == o2.v);
    CHECK(o1.all_finite());
    CHECK(o1.spatial == w.cfg.latent_spatial);
    const Latent o3 = sample_active_region(m1, x0, ep.task, 100);
    CHECK(o1.v != o3.v);
}

TEST_CASE("active region model: all records flagged plus exclusion is an error") {
    MiniWorld& w = mini_world();
    region::RegionManifest flagged = w.regions;
    for (auto& r : flagged.records) r.flagged = true;
    CHECK_THROWS_AS(train_active_region_model(flagged, w.cfg, 0, 5, false, temp_dir("arx")),
                    error);
    // but keeping flagged records is allowed
    const auto stats = train_active_region_model(flagged, w.cfg, 0, 3, true, temp_dir("arf"));
    CHECK(stats.losses.size() == 3);
}

TEST_CASE("video model: trains both arms, samples H latents deterministically") {
    MiniWorld& w = mini_world();
    const fs::path on_dir = temp_dir("vid_on");
    const fs::path off_dir = temp_dir("vid_off");
    const auto s_on = train_video_model(w.store, &w.regions, w.codec_dir, w.cfg, 7, 30, true,
                                        on_dir);
    const auto s_off = train_video_model(w.store, nullptr, w.codec_dir, w.cfg, 7, 30, false,
                                         off_dir);
    CHECK(s_on.final_loss < s_on.initial_loss);
    CHECK(s_off.final_loss < s_off.initial_loss);

    VideoModel on = load_video_model(on_dir);
    VideoModel off = load_video_model(off_dir);
    CHECK(on.active_region);
    CHECK(!off.active_region);

    auto cdc = codec::load_codec(w.codec_dir);
    const Episode ep = load_episode(w.store, "ep_000001", w.cfg);
    const Latent x0 = cdc->encode(ep.frames[0]);
    const Latent o = region::record_o_latent(w.regions, w.regions.records[1]);

    const auto plan1 = sample_video(on, x0, ep.task, &o, 5);
    const auto plan2 = sample_video(on, x0, ep.task, &o, 5);
    REQUIRE(plan1.size() == static_cast<size_t>(w.cfg.horizon_H));
    for (size_t f = 0; f < plan1.size(); ++f) {
        CHECK(plan1[f].v == plan2[f].v);
        CHECK(plan1[f].all_finite());
    }
    const auto plan_off = sample_video(off, x0, ep.task, nullptr, 5);
    CHECK(plan_off.size() == static_cast<size_t>(w.cfg.horizon_H));

    // batch composition does not change per-clip results
    const Episode ep2 = load_episode(w.store, "ep_000002", w.cfg);
    const Latent x0b = cdc->encode(ep2.frames[0]);
    const Latent ob = region::record_o_latent(w.regions, w.regions.records[2]);
    const auto batch = sample_video_batch(on, {x0, x0b}, {ep.task, ep2.task}, {&o, &ob}, {5, 6});
    for (int f = 0; f < w.cfg.horizon_H; ++f) CHECK(batch[0][f].v == plan1[f].v);

    // sampling from the untrained-off model without regions rejects region input shape issues
    CHECK_THROWS_AS(sample_video(on, x0, ep.task, nullptr, 3), error);
}

TEST_CASE("video model: mismatched codec rejected") {
    MiniWorld& w = mini_world();
    // train a second codec -> different hash
    std::vector<Frame> images;
    const Episode ep = load_episode(w.store, "ep_000000", w.cfg);
    for (const Frame& f : ep.frames) images.push_back(f);
    codec::Codec other(w.cfg, 321);
    const auto stats = codec::train_codec_on_images(other, images, 4, 321);
    const fs::path other_dir = temp_dir("codec2");
    codec::save_codec(other_dir, other, stats);
    CHECK_THROWS_AS(
        train_video_model(w.store, &w.regions, other_dir, w.cfg, 0, 3, true, temp_dir("vx")),
        error);
}
