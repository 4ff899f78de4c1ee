#include "arp/diffusion.hpp"

#include <json.hpp>

#include <cmath>
#include <iostream>
#include <unordered_map>

#include "arp/episode_store.hpp"

namespace arp::diff {

using nlohmann::json;

namespace {

Tensor latents_to_tensor(const std::vector<const Latent*>& batch) {
    const int n = static_cast<int>(batch.size());
    const int s = batch[0]->spatial, c = batch[0]->channels;
    Tensor x({n, c, s, s});
    for (int i = 0; i < n; ++i) {
        std::copy(batch[i]->v.begin(), batch[i]->v.end(),
                  x.v.begin() + static_cast<size_t>(i) * c * s * s);
    }
    return x;
}

Latent tensor_row_to_latent(const Tensor& x, int row, int spatial, int channels) {
    Latent z(spatial, channels);
    const size_t plane = static_cast<size_t>(channels) * spatial * spatial;
    std::copy(x.v.begin() + row * plane, x.v.begin() + (row + 1) * plane, z.v.begin());
    return z;
}

void normalize_stats(const std::vector<const Latent*>& all, double& mean, double& stddev) {
    double sum = 0.0;
    size_t n = 0;
    for (const Latent* z : all) {
        for (float v : z->v) sum += v;
        n += z->v.size();
    }
    mean = sum / static_cast<double>(n);
    double var = 0.0;
    for (const Latent* z : all) {
        for (float v : z->v) var += (v - mean) * (v - mean);
    }
    var /= static_cast<double>(n);
    stddev = std::sqrt(std::max(var, 1e-8));
}

void normalize_inplace(Latent& z, double mean, double stddev) {
    for (auto& v : z.v) v = static_cast<float>((v - mean) / stddev);
}

DenoiserSpec make_spec(const Config& cfg, bool video, bool active_region) {
    DenoiserSpec spec;
    spec.in_channels = packed_channels(cfg, video, active_region);
    spec.out_channels = cfg.latent_channels;
    spec.base = cfg.unet_channels;
    spec.cond_dim = cfg.cond_dim;
    spec.frames = video ? cfg.horizon_H : 1;
    spec.temporal = video;
    spec.vocab = static_cast<int>(cfg.vocab.size());
    spec.token_len = cfg.max_tokens;
    spec.text_embed_dim = cfg.text_embed_dim;
    spec.spatial = cfg.latent_spatial;
    return spec;
}

void fill_gaussian(Tensor& t, Rng& rng) {
    for (auto& v : t.v) v = static_cast<float>(rng.normal());
}

json stats_to_json(const DiffusionStats& stats) {
    return json{{"initial_loss", stats.initial_loss},
                {"final_loss", stats.final_loss},
                {"skipped_episodes", stats.skipped_episodes},
                {"loss_curve", stats.losses}};
}

} // namespace

// ---- active region generator ----

DiffusionStats train_active_region_model(const region::RegionManifest& data, const Config& cfg,
                                         uint64_t seed, int steps, bool include_flagged,
                                         const fs::path& out_dir) {
    std::vector<region::ActiveRegionRecord> records;
    for (const auto& r : data.records) {
        if (r.flagged && !include_flagged) continue;
        records.push_back(r);
    }
    if (records.empty()) fail("train_active_region_model: no usable records in the dataset");

    std::vector<Latent> x0s, os;
    x0s.reserve(records.size());
    os.reserve(records.size());
    std::vector<const Latent*> all;
    for (const auto& r : records) {
        x0s.push_back(region::record_x0_latent(data, r));
        os.push_back(region::record_o_latent(data, r));
        all.push_back(&x0s.back());
        all.push_back(&os.back());
    }
    double mean = 0, stddev = 1;
    normalize_stats(all, mean, stddev);
    for (auto& z : x0s) normalize_inplace(z, mean, stddev);
    for (auto& z : os) normalize_inplace(z, mean, stddev);

    const DenoiserSpec spec = make_spec(cfg, false, false);
    Denoiser net(spec, derive_seed(seed, "ar-init"));
    const NoiseSchedule sched = NoiseSchedule::make(cfg.noise_schedule_name, cfg.diffusion_steps);
    Rng rng(derive_seed(seed, "ar-train"));

    DiffusionStats stats;
    const int batch = std::min<int>(cfg.batch_ar, static_cast<int>(records.size()));
    for (int step = 0; step < steps; ++step) {
        std::vector<const Latent*> bo, bx;
        std::vector<int> ts;
        std::vector<std::vector<int>> tokens;
        std::vector<uint8_t> drop;
        for (int b = 0; b < batch; ++b) {
            const size_t idx = rng.below(records.size());
            bo.push_back(&os[idx]);
            bx.push_back(&x0s[idx]);
            ts.push_back(static_cast<int>(rng.below(static_cast<uint64_t>(sched.steps))));
            tokens.push_back(records[idx].task.token_ids);
            drop.push_back(rng.uniform() < cfg.cond_dropout ? 1 : 0);
        }
        const Tensor z0 = latents_to_tensor(bo);
        const Tensor x0 = latents_to_tensor(bx);
        Tensor eps(z0.shape);
        fill_gaussian(eps, rng);
        Tensor zt(z0.shape);
        for (int b = 0; b < batch; ++b) {
            const size_t plane = z0.numel() / batch;
            const float sg = static_cast<float>(sched.signal[ts[b]]);
            const float ns = static_cast<float>(sched.noise[ts[b]]);
            for (size_t i = 0; i < plane; ++i) {
                zt.v[b * plane + i] = sg * z0.v[b * plane + i] + ns * eps.v[b * plane + i];
            }
        }
        const Tensor packed = pack_ar_input(cfg, zt, x0);
        net.registry().zero_grads();
        const Tensor pred = net.forward(packed, ts, tokens, drop);
        Tensor gy(pred.shape);
        double loss = 0.0;
        for (size_t i = 0; i < pred.numel(); ++i) {
            const float d = pred.v[i] - eps.v[i];
            loss += static_cast<double>(d) * d;
            gy.v[i] = 2.0f * d / static_cast<float>(pred.numel());
        }
        loss /= static_cast<double>(pred.numel());
        net.backward(gy);
        net.registry().adam_step(nn::cosine_decay_lr(cfg.lr_ar, step, steps));
        stats.losses.push_back(loss);
    }
    stats.initial_loss = stats.losses.front();
    stats.final_loss = stats.losses.back();

    json extra = stats_to_json(stats);
    extra["codec_hash"] = data.codec_hash;
    extra["layout"] = layout_string(false, false);
    extra["latent_mean"] = mean;
    extra["latent_std"] = stddev;
    nn::save_checkpoint(out_dir, "ar_model", net.registry(), cfg, extra.dump());
    return stats;
}

ArModel load_ar_model(const fs::path& dir) {
    const nn::CheckpointInfo info = nn::peek_checkpoint(dir);
    if (info.kind != "ar_model") fail("load_ar_model: not an active region checkpoint: " + dir.string());
    ArModel m;
    m.cfg = info.config;
    m.spec = make_spec(m.cfg, false, false);
    m.net = std::make_unique<Denoiser>(m.spec, 0);
    nn::load_checkpoint(dir, "ar_model", m.net->registry());
    const json extra = json::parse(info.extra_json);
    m.latent_mean = extra.at("latent_mean").get<double>();
    m.latent_std = extra.at("latent_std").get<double>();
    m.codec_hash = extra.at("codec_hash").get<std::string>();
    m.layout = extra.at("layout").get<std::string>();
    if (m.layout != layout_string(false, false)) fail("load_ar_model: unexpected channel layout");
    return m;
}

// ---- video planner ----

DiffusionStats train_video_model(const fs::path& store, const region::RegionManifest* regions,
                                 const fs::path& codec_dir, const Config& cfg, uint64_t seed,
                                 int steps, bool active_region_on, const fs::path& out_dir) {
    if (active_region_on && regions == nullptr) {
        fail("train_video_model: active-region conditioning requested without a mined dataset");
    }
    const StoreManifest sm = load_manifest(store);
    if (sm.episodes.empty()) fail("train_video_model: empty episode store");
    auto cdc = codec::load_codec(codec_dir);
    const std::string codec_hash = to_hex(cdc->content_hash());
    if (regions && regions->codec_hash != codec_hash) {
        fail("train_video_model: mined dataset was encoded with a different codec");
    }

    std::unordered_map<std::string, const region::ActiveRegionRecord*> by_id;
    if (regions) {
        for (const auto& r : regions->records) by_id[r.episode_id] = &r;
    }

    struct Clip {
        std::vector<Latent> frames; // H+1 encoded frames
        Latent o;                   // mined region latent (if on)
        std::vector<int> tokens;
    };
    std::vector<Clip> clips;
    DiffusionStats stats;
    for (const auto& entry : sm.episodes) {
        if (active_region_on && by_id.find(entry.id) == by_id.end()) {
            std::cerr << "train_video_model: no mined region for " << entry.id << ", skipped\n";
            ++stats.skipped_episodes;
            continue;
        }
        const Episode ep = load_episode(store, entry.id, cfg);
        Clip clip;
        for (const Frame& f : ep.frames) clip.frames.push_back(cdc->encode(f));
        if (active_region_on) clip.o = region::record_o_latent(*regions, *by_id.at(entry.id));
        clip.tokens = ep.task.token_ids;
        clips.push_back(std::move(clip));
    }
    if (clips.empty()) fail("train_video_model: no usable episodes");

    std::vector<const Latent*> all;
    for (const auto& c : clips) {
        for (const auto& z : c.frames) all.push_back(&z);
        if (active_region_on) all.push_back(&c.o);
    }
    double mean = 0, stddev = 1;
    normalize_stats(all, mean, stddev);
    for (auto& c : clips) {
        for (auto& z : c.frames) normalize_inplace(z, mean, stddev);
        if (active_region_on) normalize_inplace(c.o, mean, stddev);
    }

    const DenoiserSpec spec = make_spec(cfg, true, active_region_on);
    Denoiser net(spec, derive_seed(seed, "video-init"));
    const NoiseSchedule sched = NoiseSchedule::make(cfg.noise_schedule_name, cfg.diffusion_steps);
    Rng rng(derive_seed(seed, "video-train"));

    const int h = cfg.horizon_H;
    const int batch = std::min<int>(cfg.batch_planner, static_cast<int>(clips.size()));
    const int s = cfg.latent_spatial, c = cfg.latent_channels;
    const size_t plane = static_cast<size_t>(c) * s * s;

    for (int step = 0; step < steps; ++step) {
        std::vector<int> ts;
        std::vector<std::vector<int>> tokens;
        std::vector<uint8_t> drop;
        Tensor z0({batch * h, c, s, s});
        Tensor x0({batch, c, s, s});
        Tensor o({batch, c, s, s});
        for (int b = 0; b < batch; ++b) {
            const Clip& clip = clips[rng.below(clips.size())];
            ts.push_back(static_cast<int>(rng.below(static_cast<uint64_t>(sched.steps))));
            tokens.push_back(clip.tokens);
            drop.push_back(rng.uniform() < cfg.cond_dropout ? 1 : 0);
            for (int f = 0; f < h; ++f) {
                std::copy(clip.frames[f + 1].v.begin(), clip.frames[f + 1].v.end(),
                          z0.v.begin() + (static_cast<size_t>(b) * h + f) * plane);
            }
            std::copy(clip.frames[0].v.begin(), clip.frames[0].v.end(),
                      x0.v.begin() + static_cast<size_t>(b) * plane);
            if (active_region_on) {
                std::copy(clip.o.v.begin(), clip.o.v.end(),
                          o.v.begin() + static_cast<size_t>(b) * plane);
            }
        }
        Tensor eps(z0.shape);
        fill_gaussian(eps, rng);
        Tensor zt(z0.shape);
        for (int b = 0; b < batch; ++b) {
            const float sg = static_cast<float>(sched.signal[ts[b]]);
            const float ns = static_cast<float>(sched.noise[ts[b]]);
            for (size_t i = 0; i < static_cast<size_t>(h) * plane; ++i) {
                const size_t k = static_cast<size_t>(b) * h * plane + i;
                zt.v[k] = sg * z0.v[k] + ns * eps.v[k];
            }
        }
        const Tensor packed =
            pack_video_input(cfg, zt, x0, active_region_on ? &o : nullptr, h);
        net.registry().zero_grads();
        const Tensor pred = net.forward(packed, ts, tokens, drop);
        Tensor gy(pred.shape);
        double loss = 0.0;
        for (size_t i = 0; i < pred.numel(); ++i) {
            const float d = pred.v[i] - eps.v[i];
            loss += static_cast<double>(d) * d;
            gy.v[i] = 2.0f * d / static_cast<float>(pred.numel());
        }
        loss /= static_cast<double>(pred.numel());
        net.backward(gy);
        net.registry().adam_step(nn::cosine_decay_lr(cfg.lr_planner, step, steps));
        stats.losses.push_back(loss);
    }
    stats.initial_loss = stats.losses.front();
    stats.final_loss = stats.losses.back();

    json extra = stats_to_json(stats);
    extra["codec_hash"] = codec_hash;
    extra["layout"] = layout_string(true, active_region_on);
    extra["latent_mean"] = mean;
    extra["latent_std"] = stddev;
    extra["active_region"] = active_region_on;
    nn::save_checkpoint(out_dir, "video_model", net.registry(), cfg, extra.dump());
    return stats;
}

VideoModel load_video_model(const fs::path& dir) {
    const nn::CheckpointInfo info = nn::peek_checkpoint(dir);
    if (info.kind != "video_model") fail("load_video_model: not a planner checkpoint: " + dir.string());
    VideoModel m;
    m.cfg = info.config;
    const json extra = json::parse(info.extra_json);
    m.active_region = extra.at("active_region").get<bool>();
    m.spec = make_spec(m.cfg, true, m.active_region);
    m.net = std::make_unique<Denoiser>(m.spec, 0);
    nn::load_checkpoint(dir, "video_model", m.net->registry());
    m.latent_mean = extra.at("latent_mean").get<double>();
    m.latent_std = extra.at("latent_std").get<double>();
    m.codec_hash = extra.at("codec_hash").get<std::string>();
    m.layout = extra.at("layout").get<std::string>();
    if (m.layout != layout_string(true, m.active_region)) {
        fail("load_video_model: unexpected channel layout");
    }
    return m;
}

// ---- sampling ----

namespace {

// one ancestral reverse pass over a batch of clips; per-clip noise streams so
// results do not depend on batch composition
std::vector<std::vector<Latent>> sample_batch(Denoiser& net, const Config& cfg, bool video,
                                              bool active_region, double latent_mean,
                                              double latent_std,
                                              const std::vector<Latent>& x0,
                                              const std::vector<TaskText>& tasks,
                                              const std::vector<const Latent*>& o,
                                              const std::vector<uint64_t>& seeds) {
    const int clips = static_cast<int>(x0.size());
    const int frames = video ? cfg.horizon_H : 1;
    const int s = cfg.latent_spatial, c = cfg.latent_channels;
    const size_t plane = static_cast<size_t>(c) * s * s;
    const NoiseSchedule sched = NoiseSchedule::make(cfg.noise_schedule_name, cfg.diffusion_steps);

    std::vector<Rng> rngs;
    rngs.reserve(clips);
    for (int b = 0; b < clips; ++b) rngs.emplace_back(derive_seed(seeds[b], "sample"));

    Tensor x0n({clips, c, s, s});
    Tensor on({clips, c, s, s});
    for (int b = 0; b < clips; ++b) {
        for (size_t i = 0; i < plane; ++i) {
            x0n.v[b * plane + i] =
                static_cast<float>((x0[b].v[i] - latent_mean) / latent_std);
            if (active_region) {
                on.v[b * plane + i] =
                    static_cast<float>((o[b]->v[i] - latent_mean) / latent_std);
            }
        }
    }

    Tensor x({clips * frames, c, s, s});
    for (int b = 0; b < clips; ++b) {
        for (size_t i = 0; i < static_cast<size_t>(frames) * plane; ++i) {
            x.v[b * frames * plane + i] = static_cast<float>(rngs[b].normal());
        }
    }

    std::vector<std::vector<int>> tokens;
    std::vector<uint8_t> no_drop(clips, 0), full_drop(clips, 1);
    for (int b = 0; b < clips; ++b) tokens.push_back(tasks[b].token_ids);

    const double guidance = cfg.guidance_scale;
    for (int t = sched.steps - 1; t >= 0; --t) {
        const std::vector<int> ts(clips, t);
        const Tensor packed = video ? pack_video_input(cfg, x, x0n, active_region ? &on : nullptr,
                                                       frames)
                                    : pack_ar_input(cfg, x, x0n);
        Tensor eps = net.forward(packed, ts, tokens, no_drop);
        if (guidance != 1.0) {
            const Tensor eps_u = net.forward(packed, ts, tokens, full_drop);
            for (size_t i = 0; i < eps.numel(); ++i) {
                eps.v[i] = static_cast<float>(eps_u.v[i] +
                                              guidance * (eps.v[i] - eps_u.v[i]));
            }
        }
        const double ab = sched.alpha_bar[t];
        const double ab_prev = t > 0 ? sched.alpha_bar[t - 1] : 1.0;
        const double alpha = ab / ab_prev;
        const double beta = 1.0 - alpha;
        const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
        const double eps_coef = beta / std::sqrt(1.0 - ab);
        const double sigma = t > 0 ? std::sqrt((1.0 - ab_prev) / (1.0 - ab) * beta) : 0.0;
        for (int b = 0; b < clips; ++b) {
            for (size_t i = 0; i < static_cast<size_t>(frames) * plane; ++i) {
                const size_t k = static_cast<size_t>(b) * frames * plane + i;
                double v = inv_sqrt_alpha * (x.v[k] - eps_coef * eps.v[k]);
                if (t > 0) v += sigma * rngs[b].normal();
                x.v[k] = static_cast<float>(v);
            }
        }
    }

    std::vector<std::vector<Latent>> out(clips);
    for (int b = 0; b < clips; ++b) {
        for (int f = 0; f < frames; ++f) {
            Latent z = tensor_row_to_latent(x, b * frames + f, s, c);
            for (auto& v : z.v) v = static_cast<float>(v * latent_std + latent_mean);
            if (!z.all_finite()) fail("sampling produced non-finite latent");
            out[b].push_back(std::move(z));
        }
    }
    return out;
}

} // namespace

std::vector<Latent> sample_active_region_batch(const ArModel& model,
                                               const std::vector<Latent>& x0,
                                               const std::vector<TaskText>& tasks,
                                               const std::vector<uint64_t>& seeds) {
    for (const Latent& z : x0) {
        if (z.spatial != model.cfg.latent_spatial || z.channels != model.cfg.latent_channels) {
            fail("sample_active_region: latent shape mismatch");
        }
    }
    auto out = sample_batch(*model.net, model.cfg, false, false, model.latent_mean,
                            model.latent_std, x0, tasks, {}, seeds);
    std::vector<Latent> regions;
    regions.reserve(out.size());
    for (auto& v : out) regions.push_back(std::move(v[0]));
    return regions;
}

Latent sample_active_region(const ArModel& model, const Latent& x0, const TaskText& task,
                            uint64_t seed) {
    return sample_active_region_batch(model, {x0}, {task}, {seed})[0];
}

std::vector<std::vector<Latent>> sample_video_batch(const VideoModel& model,
                                                    const std::vector<Latent>& x0,
                                                    const std::vector<TaskText>& tasks,
                                                    const std::vector<const Latent*>& o,
                                                    const std::vector<uint64_t>& seeds) {
    for (const Latent& z : x0) {
        if (z.spatial != model.cfg.latent_spatial || z.channels != model.cfg.latent_channels) {
            fail("sample_video: latent shape mismatch");
        }
    }
    if (model.active_region) {
        if (o.size() != x0.size()) fail("sample_video: active-region latents required");
        for (const Latent* z : o) {
            if (z == nullptr || z->spatial != model.cfg.latent_spatial) {
                fail("sample_video: active-region latent shape mismatch");
            }
        }
    }
    return sample_batch(*model.net, model.cfg, true, model.active_region, model.latent_mean,
                        model.latent_std, x0, tasks, o, seeds);
}

std::vector<Latent> sample_video(const VideoModel& model, const Latent& x0, const TaskText& task,
                                 const Latent* o, uint64_t seed) {
    std::vector<const Latent*> os;
    if (model.active_region) os.push_back(o);
    return sample_video_batch(model, {x0}, {task}, os, {seed})[0];
}

} // namespace arp::diff
