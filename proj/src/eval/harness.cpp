#include "arp/eval.hpp"

#include <json.hpp>

#include <cmath>

namespace arp::eval {

using nlohmann::json;

PlanMode mode_from_string(const std::string& name) {
    if (name == "none") return PlanMode::none;
    if (name == "pred") return PlanMode::pred;
    if (name == "pred-sup" || name == "pred_sup") return PlanMode::pred_sup;
    if (name == "gt") return PlanMode::gt;
    if (name == "gt-latents" || name == "gt_latents") return PlanMode::gt_latents;
    if (name == "random") return PlanMode::random;
    fail("unknown eval mode \"" + name + "\"");
}

std::string to_string(PlanMode mode) {
    switch (mode) {
        case PlanMode::none: return "none";
        case PlanMode::pred: return "pred";
        case PlanMode::pred_sup: return "pred-sup";
        case PlanMode::gt: return "gt";
        case PlanMode::gt_latents: return "gt-latents";
        case PlanMode::random: return "random";
    }
    return "?";
}

Models load_models(const CheckpointPaths& paths) {
    Models m;
    if (paths.codec.empty()) fail("load_models: codec checkpoint required");
    m.codec = codec::load_codec(paths.codec);
    m.cfg = m.codec->config();
    m.codec_hash = to_hex(m.codec->content_hash());
    m.hashes["codec"] = m.codec_hash;

    auto check = [&](const std::string& name, const std::string& trained_on) {
        if (trained_on != m.codec_hash) {
            fail("load_models: " + name + " was trained on codec " + trained_on +
                 " but the loaded codec is " + m.codec_hash + " (mixed latent spaces)");
        }
    };
    if (!paths.ar.empty()) {
        m.ar = diff::load_ar_model(paths.ar);
        check("region generator", m.ar->codec_hash);
        m.hashes["ar"] = to_hex(m.ar->net->registry().content_hash());
    }
    if (!paths.ar_sup.empty()) {
        m.ar_sup = diff::load_ar_model(paths.ar_sup);
        check("supervised region generator", m.ar_sup->codec_hash);
        m.hashes["ar_sup"] = to_hex(m.ar_sup->net->registry().content_hash());
    }
    if (!paths.planner_ar.empty()) {
        m.planner_ar = diff::load_video_model(paths.planner_ar);
        if (!m.planner_ar->active_region) {
            fail("load_models: planner_ar checkpoint was trained without region conditioning");
        }
        check("video planner", m.planner_ar->codec_hash);
        m.hashes["planner_ar"] = to_hex(m.planner_ar->net->registry().content_hash());
    }
    if (!paths.planner_noar.empty()) {
        m.planner_noar = diff::load_video_model(paths.planner_noar);
        if (m.planner_noar->active_region) {
            fail("load_models: planner_noar checkpoint has region conditioning");
        }
        check("no-region planner", m.planner_noar->codec_hash);
        m.hashes["planner_noar"] = to_hex(m.planner_noar->net->registry().content_hash());
    }
    if (!paths.invdyn.empty()) {
        std::string trained_on;
        m.invdyn = invdyn::load_invdyn(paths.invdyn, &trained_on);
        check("inverse dynamics", trained_on);
        m.hashes["invdyn"] = to_hex(m.invdyn->registry().content_hash());
    }
    return m;
}

double task_loss(const std::vector<Latent>& latents, const std::vector<Action>& gt_actions,
                 invdyn::InvDyn& model) {
    if (latents.size() != gt_actions.size() + 1) {
        fail("task_loss: need exactly one more latent than ground-truth actions");
    }
    const auto decoded = invdyn::decode_sequence(model, latents);
    double sum = 0.0;
    for (size_t h = 0; h < decoded.size(); ++h) {
        sum += invdyn::action_l1(decoded[h], gt_actions[h]);
    }
    return sum / static_cast<double>(decoded.size());
}

std::vector<uint64_t> eval_seeds(int count, int template_id) {
    std::vector<uint64_t> seeds;
    seeds.reserve(count);
    const uint64_t base = 1000000ull + static_cast<uint64_t>(template_id) * 100000ull;
    for (int i = 0; i < count; ++i) seeds.push_back(base + static_cast<uint64_t>(i));
    return seeds;
}

namespace {

struct PreparedEpisode {
    uint64_t seed = 0;
    sim::WorldState state0;
    sim::TaskInstance task;
    Latent x0;
    std::vector<Action> gt_actions;
    std::vector<Latent> gt_latents; // x0 + H expert frames
    Latent region; // conditioning latent for pred/pred-sup/gt arms
    std::vector<Latent> plan;       // H generated (or gt) latents
    std::vector<Action> actions;
};

void require(bool ok, const std::string& what) {
    if (!ok) fail("run_episode: missing checkpoint for " + what);
}

} // namespace

EvalReport run_success_rate(Models& models, const std::vector<uint64_t>& seeds, int template_id,
                            PlanMode mode) {
    if (seeds.empty()) fail("run_success_rate: need at least one seed");
    const Config& cfg = models.cfg;
    require(models.codec != nullptr, "codec");
    if (mode != PlanMode::random) require(models.invdyn != nullptr, "inverse dynamics");
    switch (mode) {
        case PlanMode::none: require(models.planner_noar.has_value(), "no-region planner"); break;
        case PlanMode::pred:
            require(models.ar.has_value(), "region generator");
            require(models.planner_ar.has_value(), "video planner");
            break;
        case PlanMode::pred_sup:
            require(models.ar_sup.has_value(), "supervised region generator");
            require(models.planner_ar.has_value(), "video planner");
            break;
        case PlanMode::gt: require(models.planner_ar.has_value(), "video planner"); break;
        default: break;
    }

    // stage 1: deterministic per-seed setup (scene, expert reference, region)
    std::vector<PreparedEpisode> eps(seeds.size());
    for (size_t i = 0; i < seeds.size(); ++i) {
        PreparedEpisode& p = eps[i];
        p.seed = seeds[i];
        auto [state, task] = sim::reset(p.seed, template_id, cfg);
        p.state0 = state;
        p.task = task;
        const Frame f0 = sim::render(state, cfg);
        p.x0 = models.codec->encode(f0);

        // expert reference for the task-loss metric and the gt-latents arm
        sim::WorldState cur = state;
        p.gt_latents.push_back(p.x0);
        for (int h = 0; h < cfg.horizon_H; ++h) {
            const Action a = sim::scripted_expert(cur, task, cfg);
            cur = sim::step(cur, a);
            p.gt_actions.push_back(a);
            p.gt_latents.push_back(models.codec->encode(sim::render(cur, cfg)));
        }

        if (mode == PlanMode::gt) {
            const PseudoMask mask = sim::ground_truth_active_mask(state, task, cfg);
            p.region = models.codec->encode(region::compose_active_region(f0, mask));
        }
    }

    // stage 2: plan latents per arm (diffusion sampling batched)
    const int chunk = 8;
    if (mode == PlanMode::pred || mode == PlanMode::pred_sup) {
        const diff::ArModel& gen = mode == PlanMode::pred ? *models.ar : *models.ar_sup;
        for (size_t start = 0; start < eps.size(); start += chunk) {
            const size_t end = std::min(eps.size(), start + chunk);
            std::vector<Latent> x0s;
            std::vector<TaskText> tasks;
            std::vector<uint64_t> ar_seeds;
            for (size_t i = start; i < end; ++i) {
                x0s.push_back(eps[i].x0);
                tasks.push_back(eps[i].task.task);
                ar_seeds.push_back(derive_seed(eps[i].seed, "ar-sample"));
            }
            auto regions = diff::sample_active_region_batch(gen, x0s, tasks, ar_seeds);
            for (size_t i = start; i < end; ++i) eps[i].region = std::move(regions[i - start]);
        }
    }
    if (mode == PlanMode::none || mode == PlanMode::pred || mode == PlanMode::pred_sup ||
        mode == PlanMode::gt) {
        const diff::VideoModel& planner =
            mode == PlanMode::none ? *models.planner_noar : *models.planner_ar;
        for (size_t start = 0; start < eps.size(); start += chunk) {
            const size_t end = std::min(eps.size(), start + chunk);
            std::vector<Latent> x0s;
            std::vector<TaskText> tasks;
            std::vector<const Latent*> regions;
            std::vector<uint64_t> plan_seeds;
            for (size_t i = start; i < end; ++i) {
                x0s.push_back(eps[i].x0);
                tasks.push_back(eps[i].task.task);
                if (planner.active_region) regions.push_back(&eps[i].region);
                plan_seeds.push_back(derive_seed(eps[i].seed, "plan-sample"));
            }
            auto plans = diff::sample_video_batch(planner, x0s, tasks, regions, plan_seeds);
            for (size_t i = start; i < end; ++i) eps[i].plan = std::move(plans[i - start]);
        }
    }

    // stage 3: decode actions and execute open loop
    EvalReport report;
    report.template_id = template_id;
    report.mode = to_string(mode);
    report.episodes = static_cast<int>(seeds.size());
    report.config_hash = to_hex(config_hash(cfg));
    report.checkpoint_hashes = models.hashes;

    int successes = 0;
    double loss_sum = 0.0;
    for (PreparedEpisode& p : eps) {
        if (mode == PlanMode::random) {
            Rng rng(derive_seed(p.seed, "random-actions"));
            for (int h = 0; h < cfg.horizon_H; ++h) {
                Action a(cfg.action_dim);
                for (auto& v : a.values) v = rng.uniform(-1.0, 1.0);
                p.actions.push_back(a);
            }
            double l = 0.0;
            for (int h = 0; h < cfg.horizon_H; ++h) {
                l += invdyn::action_l1(p.actions[h], p.gt_actions[h]);
            }
            loss_sum += l / cfg.horizon_H;
        } else {
            std::vector<Latent> latents;
            latents.push_back(p.x0);
            if (mode == PlanMode::gt_latents) {
                latents = p.gt_latents;
            } else {
                for (auto& z : p.plan) latents.push_back(z);
            }
            p.actions = invdyn::decode_sequence(*models.invdyn, latents);
            double l = 0.0;
            for (int h = 0; h < cfg.horizon_H; ++h) {
                l += invdyn::action_l1(p.actions[h], p.gt_actions[h]);
            }
            loss_sum += l / cfg.horizon_H;
        }

        // exactly H simulator steps, no replanning
        sim::WorldState cur = p.state0;
        for (int h = 0; h < cfg.horizon_H; ++h) cur = sim::step(cur, p.actions[h]);
        const bool success = sim::is_success(cur, p.task);
        successes += success ? 1 : 0;

        EpisodeRecord rec;
        rec.seed = p.seed;
        rec.template_id = template_id;
        rec.mode = to_string(mode);
        rec.success = success;
        double l = 0.0;
        for (int h = 0; h < cfg.horizon_H; ++h) {
            l += invdyn::action_l1(p.actions[h], p.gt_actions[h]);
        }
        rec.task_loss = l / cfg.horizon_H;
        rec.actions = p.actions;
        report.records.push_back(std::move(rec));
    }
    report.success_rate = static_cast<double>(successes) / static_cast<double>(seeds.size());
    report.mean_task_loss = loss_sum / static_cast<double>(seeds.size());
    return report;
}

EpisodeRecord run_episode(Models& models, uint64_t env_seed, int template_id, PlanMode mode) {
    return run_success_rate(models, {env_seed}, template_id, mode).records[0];
}

std::string report_to_json(const EvalReport& r) {
    json doc;
    doc["template_id"] = r.template_id;
    doc["mode"] = r.mode;
    doc["episodes"] = r.episodes;
    doc["success_rate"] = r.success_rate;
    doc["mean_task_loss"] = r.mean_task_loss;
    doc["config_hash"] = r.config_hash;
    doc["checkpoint_hashes"] = r.checkpoint_hashes;
    doc["records"] = json::array();
    for (const auto& rec : r.records) {
        json jr;
        jr["seed"] = rec.seed;
        jr["template_id"] = rec.template_id;
        jr["mode"] = rec.mode;
        jr["success"] = rec.success;
        jr["task_loss"] = rec.task_loss;
        jr["actions"] = json::array();
        for (const auto& a : rec.actions) jr["actions"].push_back(a.values);
        doc["records"].push_back(std::move(jr));
    }
    return doc.dump(2);
}

EvalReport report_from_json(const std::string& text) {
    const json doc = json::parse(text);
    EvalReport r;
    r.template_id = doc.at("template_id").get<int>();
    r.mode = doc.at("mode").get<std::string>();
    r.episodes = doc.at("episodes").get<int>();
    r.success_rate = doc.at("success_rate").get<double>();
    r.mean_task_loss = doc.at("mean_task_loss").get<double>();
    r.config_hash = doc.at("config_hash").get<std::string>();
    for (const auto& [k, v] : doc.at("checkpoint_hashes").items()) {
        r.checkpoint_hashes[k] = v.get<std::string>();
    }
    for (const auto& jr : doc.at("records")) {
        EpisodeRecord rec;
        rec.seed = jr.at("seed").get<uint64_t>();
        rec.template_id = jr.at("template_id").get<int>();
        rec.mode = jr.at("mode").get<std::string>();
        rec.success = jr.at("success").get<bool>();
        rec.task_loss = jr.at("task_loss").get<double>();
        for (const auto& av : jr.at("actions")) {
            Action a;
            a.values = av.get<std::vector<double>>();
            rec.actions.push_back(std::move(a));
        }
        r.records.push_back(std::move(rec));
    }
    return r;
}

} // namespace arp::eval
