#include "arp/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <iostream>

#include "arp/diffusion.hpp"
#include "arp/episode_store.hpp"
#include "arp/invdyn.hpp"
#include "arp/png_io.hpp"
#include "arp/region.hpp"
#include "arp/tracking.hpp"

namespace arp::cli {

using nlohmann::json;

fs::path resolve_store_path(const std::string& path) {
    fs::path p(path);
    if (p.is_absolute()) return p;
    const char* root = std::getenv("ARPLAN_STORE_ROOT");
    if (root && *root) return fs::path(root) / p;
    return p;
}

void write_plan_strip(const fs::path& out_png, const Frame& x0, const Frame* region,
                      const std::vector<Frame>& plan) {
    const int s = x0.size;
    const int cols = 2 + static_cast<int>(plan.size());
    std::vector<uint8_t> strip(static_cast<size_t>(s) * cols * s * 3);
    auto blit = [&](const Frame& f, int col) {
        const auto bytes = frame_to_u8(f);
        for (int y = 0; y < s; ++y) {
            std::memcpy(&strip[(static_cast<size_t>(y) * cols * s + col * s) * 3],
                        &bytes[static_cast<size_t>(y) * s * 3], static_cast<size_t>(s) * 3);
        }
    };
    blit(x0, 0);
    if (region) {
        blit(*region, 1);
    } else {
        Frame blank(s);
        std::fill(blank.px.begin(), blank.px.end(), 0.5f);
        blit(blank, 1);
    }
    for (size_t i = 0; i < plan.size(); ++i) blit(plan[i], 2 + static_cast<int>(i));
    write_png_rgb8(out_png, strip, cols * s, s);
}

namespace {

Config load_cfg_opt(const std::string& config_path) {
    if (config_path.empty()) return parse_config_json("");
    return load_config(resolve_store_path(config_path));
}

struct PlanOutputs {
    Frame x0;
    std::optional<Frame> region;
    std::vector<Latent> latents;
    std::vector<Frame> frames;
    std::vector<Action> actions;
};

PlanOutputs make_plan(const std::string& codec_dir, const std::string& ar_dir,
                      const std::string& planner_dir, const std::string& invdyn_dir,
                      uint64_t seed, int template_id, const std::string& mode_name) {
    auto cdc = codec::load_codec(resolve_store_path(codec_dir));
    const Config cfg = cdc->config();
    auto planner = diff::load_video_model(resolve_store_path(planner_dir));
    const std::string codec_hash = to_hex(cdc->content_hash());
    if (planner.codec_hash != codec_hash) fail("plan: planner/codec latent space mismatch");

    auto [state, task] = sim::reset(seed, template_id, cfg);
    const Frame f0 = sim::render(state, cfg);
    const Latent x0 = cdc->encode(f0);

    PlanOutputs out;
    out.x0 = f0;

    std::optional<Latent> region_latent;
    if (planner.active_region) {
        if (mode_name == "gt") {
            const PseudoMask mask = sim::ground_truth_active_mask(state, task, cfg);
            region_latent = cdc->encode(region::compose_active_region(f0, mask));
        } else {
            if (ar_dir.empty()) fail("plan: --ar-model required for predicted regions");
            auto ar = diff::load_ar_model(resolve_store_path(ar_dir));
            if (ar.codec_hash != codec_hash) fail("plan: region generator/codec mismatch");
            region_latent =
                diff::sample_active_region(ar, x0, task.task, derive_seed(seed, "ar-sample"));
        }
        out.region = cdc->decode(*region_latent);
    }

    out.latents = diff::sample_video(planner, x0, task.task,
                                     region_latent ? &*region_latent : nullptr,
                                     derive_seed(seed, "plan-sample"));
    for (const Latent& z : out.latents) out.frames.push_back(cdc->decode(z));

    if (!invdyn_dir.empty()) {
        std::string trained_on;
        auto inv = invdyn::load_invdyn(resolve_store_path(invdyn_dir), &trained_on);
        if (trained_on != codec_hash) fail("plan: inverse dynamics/codec mismatch");
        std::vector<Latent> seq;
        seq.push_back(x0);
        for (const Latent& z : out.latents) seq.push_back(z);
        out.actions = invdyn::decode_sequence(*inv, seq);
    }
    return out;
}

} // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"tabletop active-region video planner"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (defaults when omitted)");

    // ---- gen-data ----
    auto* gen = app.add_subcommand("gen-data", "generate expert demonstration episodes");
    int gen_n = 100;
    uint64_t gen_seed = 0;
    std::string gen_store = "store";
    int gen_template = -1;
    gen->add_option("--n", gen_n, "episode count")->required();
    gen->add_option("--seed", gen_seed, "base seed");
    gen->add_option("--store", gen_store, "episode store directory")->required();
    gen->add_option("--template", gen_template, "task template id (-1 cycles all)");
    gen->callback([&] {
        const Config cfg = load_cfg_opt(config_path);
        const auto summary =
            sim::generate_dataset(gen_n, gen_seed, resolve_store_path(gen_store), gen_template, cfg);
        std::cout << "wrote " << summary.episodes << " episodes (" << summary.successes
                  << " successful)\n";
    });

    // ---- track ----
    auto* track_cmd = app.add_subcommand("track", "grid point tracking over one episode");
    std::string tr_store, tr_episode, tr_tracker = "correlation", tr_out;
    int tr_grid = -1;
    double tr_tau = -1;
    track_cmd->add_option("--store", tr_store)->required();
    track_cmd->add_option("--episode", tr_episode, "episode id, e.g. ep_000000")->required();
    track_cmd->add_option("--grid-m", tr_grid, "grid side (default from config)");
    track_cmd->add_option("--tau", tr_tau, "selection threshold in pixels (default from config)");
    track_cmd->add_option("--tracker", tr_tracker, "oracle or correlation");
    track_cmd->add_option("--out", tr_out, "output JSON file (stdout when omitted)");
    track_cmd->callback([&] {
        const Config cfg = load_cfg_opt(config_path);
        const Episode ep = load_episode(resolve_store_path(tr_store), tr_episode, cfg);
        const int grid_m = tr_grid > 0 ? tr_grid : cfg.grid_M;
        const double tau = tr_tau > 0 ? tr_tau : cfg.tau;
        const auto kind = track::tracker_from_string(tr_tracker);
        track::TrajectorySet ts;
        if (kind == track::TrackerKind::oracle) {
            const auto states = sim::replay_states(ep, cfg);
            ts = track::track_grid(ep.frames, grid_m, kind, &states, cfg);
        } else {
            ts = track::track_grid(ep.frames, grid_m, kind, nullptr, cfg);
        }
        const std::string doc = track::trajectory_document(ts, tau, tr_tracker);
        if (tr_out.empty()) {
            std::cout << doc << "\n";
        } else {
            write_file_text(resolve_store_path(tr_out), doc);
        }
    });

    // ---- mine-regions ----
    auto* mine = app.add_subcommand("mine-regions", "mine pseudo active regions into a dataset");
    std::string mi_store, mi_codec, mi_out, mi_tracker = "correlation";
    double mi_tau = -1;
    mine->add_option("--store", mi_store)->required();
    mine->add_option("--codec", mi_codec)->required();
    mine->add_option("--out", mi_out)->required();
    mine->add_option("--tracker", mi_tracker, "correlation, oracle or gt");
    mine->add_option("--tau", mi_tau, "selection threshold (default from config)");
    mine->callback([&] {
        const Config cfg = load_cfg_opt(config_path);
        const auto manifest = region::mine_dataset(
            resolve_store_path(mi_store), resolve_store_path(mi_codec),
            resolve_store_path(mi_out), region::mining_source_from_string(mi_tracker),
            mi_tau > 0 ? mi_tau : cfg.tau, cfg);
        int flagged = 0;
        for (const auto& r : manifest.records) flagged += r.flagged ? 1 : 0;
        std::cout << "mined " << manifest.records.size() << " records (" << flagged
                  << " flagged)\n";
    });

    // ---- train-codec ----
    auto* tc = app.add_subcommand("train-codec", "train the frame codec");
    std::string tc_store, tc_out, tc_source = "correlation";
    int tc_steps = 1000;
    uint64_t tc_seed = 0;
    double tc_tau = -1;
    tc->add_option("--store", tc_store)->required();
    tc->add_option("--out", tc_out)->required();
    tc->add_option("--steps", tc_steps);
    tc->add_option("--seed", tc_seed);
    tc->add_option("--region-source", tc_source, "mask source for active-region composites");
    tc->add_option("--region-tau", tc_tau);
    tc->callback([&] {
        const Config cfg = load_cfg_opt(config_path);
        const fs::path store = resolve_store_path(tc_store);
        const StoreManifest sm = load_manifest(store);
        if (sm.episodes.empty()) fail("train-codec: empty episode store");
        std::vector<Frame> images;
        for (const auto& entry : sm.episodes) {
            const Episode ep = load_episode(store, entry.id, cfg);
            for (const Frame& f : ep.frames) images.push_back(f);
            const auto mined = region::mine_mask(
                ep, region::mining_source_from_string(tc_source), tc_tau > 0 ? tc_tau : cfg.tau,
                cfg);
            const Frame arf = region::compose_active_region(ep.frames[0], mined.mask);
            for (int rep = 0; rep < 3; ++rep) images.push_back(arf);
        }
        codec::Codec cdc(cfg, tc_seed);
        const auto stats = codec::train_codec_on_images(cdc, images, tc_steps, tc_seed);
        codec::save_codec(resolve_store_path(tc_out), cdc, stats);
        std::cout << "codec loss " << stats.initial_loss << " -> " << stats.final_loss << "\n";
    });

    // ---- train-ar ----
    auto* ta = app.add_subcommand("train-ar", "train the active region generator");
    std::string ta_do, ta_out;
    int ta_steps = 1000;
    uint64_t ta_seed = 0;
    bool ta_include_flagged = false;
    ta->add_option("--do", ta_do, "mined region dataset directory")->required();
    ta->add_option("--out", ta_out)->required();
    ta->add_option("--steps", ta_steps);
    ta->add_option("--seed", ta_seed);
    ta->add_flag("--include-flagged", ta_include_flagged, "keep all-white flagged records");
    ta->callback([&] {
        const Config cfg = load_cfg_opt(config_path);
        const auto manifest = region::load_region_manifest(resolve_store_path(ta_do));
        const auto stats = diff::train_active_region_model(manifest, cfg, ta_seed, ta_steps,
                                                           ta_include_flagged,
                                                           resolve_store_path(ta_out));
        std::cout << "region generator loss " << stats.initial_loss << " -> " << stats.final_loss
                  << "\n";
    });

    // ---- train-planner ----
    auto* tp = app.add_subcommand("train-planner", "train the video planner");
    std::string tp_store, tp_do, tp_codec, tp_out, tp_ar = "on";
    int tp_steps = 1000;
    uint64_t tp_seed = 0;
    tp->add_option("--store", tp_store)->required();
    tp->add_option("--codec", tp_codec)->required();
    tp->add_option("--do", tp_do, "mined region dataset (required with --active-region on)");
    tp->add_option("--out", tp_out)->required();
    tp->add_option("--steps", tp_steps);
    tp->add_option("--seed", tp_seed);
    tp->add_option("--active-region", tp_ar, "on or off");
    tp->callback([&] {
        const Config cfg = load_cfg_opt(config_path);
        const bool on = tp_ar == "on";
        if (!on && tp_ar != "off") fail("train-planner: --active-region must be on or off");
        diff::DiffusionStats stats;
        if (on) {
            if (tp_do.empty()) fail("train-planner: --do required with --active-region on");
            const auto manifest = region::load_region_manifest(resolve_store_path(tp_do));
            stats = diff::train_video_model(resolve_store_path(tp_store), &manifest,
                                            resolve_store_path(tp_codec), cfg, tp_seed, tp_steps,
                                            true, resolve_store_path(tp_out));
        } else {
            stats = diff::train_video_model(resolve_store_path(tp_store), nullptr,
                                            resolve_store_path(tp_codec), cfg, tp_seed, tp_steps,
                                            false, resolve_store_path(tp_out));
        }
        std::cout << "planner loss " << stats.initial_loss << " -> " << stats.final_loss << " ("
                  << stats.skipped_episodes << " episodes skipped)\n";
    });

    // ---- train-invdyn ----
    auto* ti = app.add_subcommand("train-invdyn", "train the latent inverse dynamics model");
    std::string ti_store, ti_codec, ti_out;
    int ti_steps = 1000;
    uint64_t ti_seed = 0;
    double ti_fraction = 1.0;
    ti->add_option("--store", ti_store)->required();
    ti->add_option("--codec", ti_codec)->required();
    ti->add_option("--out", ti_out)->required();
    ti->add_option("--steps", ti_steps);
    ti->add_option("--seed", ti_seed);
    ti->add_option("--fraction", ti_fraction, "fraction of episodes to train on");
    ti->callback([&] {
        const Config cfg = load_cfg_opt(config_path);
        auto cdc = codec::load_codec(resolve_store_path(ti_codec));
        const fs::path store = resolve_store_path(ti_store);
        const StoreManifest sm = load_manifest(store);
        if (sm.episodes.empty()) fail("train-invdyn: empty episode store");
        const size_t keep = std::max<size_t>(
            1, static_cast<size_t>(ti_fraction * static_cast<double>(sm.episodes.size())));
        std::vector<invdyn::LatentPair> pairs;
        for (size_t i = 0; i < keep && i < sm.episodes.size(); ++i) {
            const Episode ep = load_episode(store, sm.episodes[i].id, cfg);
            std::vector<Latent> zs;
            for (const Frame& f : ep.frames) zs.push_back(cdc->encode(f));
            for (int h = 0; h < cfg.horizon_H; ++h) {
                pairs.push_back({zs[h], zs[h + 1], ep.actions[h]});
            }
        }
        invdyn::InvDyn model(cfg, ti_seed);
        const auto stats = invdyn::train_invdyn(model, pairs, ti_steps, ti_seed);
        invdyn::save_invdyn(resolve_store_path(ti_out), model, stats,
                            to_hex(cdc->content_hash()));
        std::cout << "inverse dynamics loss " << stats.initial_loss << " -> " << stats.final_loss
                  << "\n";
    });

    // ---- plan / render-plan ----
    auto add_plan_cmd = [&](const char* name, const char* help, bool latents_too) {
        auto* cmd = app.add_subcommand(name, help);
        auto codec_dir = std::make_shared<std::string>();
        auto ar_dir = std::make_shared<std::string>();
        auto planner_dir = std::make_shared<std::string>();
        auto invdyn_dir = std::make_shared<std::string>();
        auto out_dir = std::make_shared<std::string>();
        auto seed = std::make_shared<uint64_t>(1000000);
        auto template_id = std::make_shared<int>(0);
        auto mode = std::make_shared<std::string>("pred");
        cmd->add_option("--codec", *codec_dir)->required();
        cmd->add_option("--ar-model", *ar_dir);
        cmd->add_option("--planner", *planner_dir)->required();
        cmd->add_option("--invdyn", *invdyn_dir);
        cmd->add_option("--seed", *seed, "environment seed");
        cmd->add_option("--template", *template_id);
        cmd->add_option("--mode", *mode, "pred or gt region at inference");
        cmd->add_option("--out", *out_dir)->required();
        cmd->callback([=] {
            const auto plan = make_plan(*codec_dir, *ar_dir, *planner_dir, *invdyn_dir, *seed,
                                        *template_id, *mode);
            const fs::path out = resolve_store_path(*out_dir);
            fs::create_directories(out);
            write_plan_strip(out / "strip.png", plan.x0,
                             plan.region ? &*plan.region : nullptr, plan.frames);
            if (latents_too) {
                for (size_t i = 0; i < plan.latents.size(); ++i) {
                    char buf[32];
                    std::snprintf(buf, sizeof(buf), "plan_%03zu.lat", i);
                    save_latent(out / buf, plan.latents[i]);
                }
                if (!plan.actions.empty()) {
                    json ja = json::array();
                    for (const auto& a : plan.actions) ja.push_back(a.values);
                    write_file_text(out / "actions.json", ja.dump(2));
                }
            }
            std::cout << "wrote " << (out / "strip.png") << "\n";
        });
    };
    add_plan_cmd("plan", "sample a plan and write latents plus a frame strip", true);
    add_plan_cmd("render-plan", "sample a plan and write the frame strip", false);

    // ---- eval ----
    auto* ev = app.add_subcommand("eval", "success rate and task loss for one planner arm");
    std::string ev_codec, ev_ar, ev_ar_sup, ev_planner_ar, ev_planner_noar, ev_invdyn;
    std::string ev_mode = "pred", ev_out;
    int ev_seeds = 100, ev_template = 0;
    ev->add_option("--codec", ev_codec)->required();
    ev->add_option("--ar", ev_ar);
    ev->add_option("--ar-sup", ev_ar_sup);
    ev->add_option("--planner-ar", ev_planner_ar);
    ev->add_option("--planner-noar", ev_planner_noar);
    ev->add_option("--invdyn", ev_invdyn);
    ev->add_option("--seeds", ev_seeds, "episode count");
    ev->add_option("--template", ev_template);
    ev->add_option("--mode", ev_mode, "none, pred, pred-sup, gt, gt-latents or random");
    ev->add_option("--out", ev_out, "report JSON path (stdout summary always printed)");
    ev->callback([&] {
        eval::CheckpointPaths paths;
        paths.codec = resolve_store_path(ev_codec);
        if (!ev_ar.empty()) paths.ar = resolve_store_path(ev_ar);
        if (!ev_ar_sup.empty()) paths.ar_sup = resolve_store_path(ev_ar_sup);
        if (!ev_planner_ar.empty()) paths.planner_ar = resolve_store_path(ev_planner_ar);
        if (!ev_planner_noar.empty()) paths.planner_noar = resolve_store_path(ev_planner_noar);
        if (!ev_invdyn.empty()) paths.invdyn = resolve_store_path(ev_invdyn);
        auto models = eval::load_models(paths);
        const auto report = eval::run_success_rate(models, eval::eval_seeds(ev_seeds, ev_template),
                                                   ev_template, eval::mode_from_string(ev_mode));
        std::cout << "mode " << report.mode << ": success rate " << report.success_rate
                  << ", mean task loss " << report.mean_task_loss << " over " << report.episodes
                  << " episodes\n";
        if (!ev_out.empty()) {
            write_file_text(resolve_store_path(ev_out), eval::report_to_json(report));
        }
    });

    // ---- ablate ----
    auto* ab = app.add_subcommand("ablate", "run the four-arm active-region ablation");
    std::string ab_config;
    ab->add_option("--config", ab_config, "ablation JSON config")->required();
    ab->callback([&] {
        const json doc = json::parse(read_file_text(resolve_store_path(ab_config)));
        eval::CheckpointPaths paths;
        paths.codec = resolve_store_path(doc.at("codec").get<std::string>());
        paths.ar = resolve_store_path(doc.at("ar").get<std::string>());
        paths.ar_sup = resolve_store_path(doc.at("ar_sup").get<std::string>());
        paths.planner_ar = resolve_store_path(doc.at("planner_ar").get<std::string>());
        paths.planner_noar = resolve_store_path(doc.at("planner_noar").get<std::string>());
        paths.invdyn = resolve_store_path(doc.at("invdyn").get<std::string>());
        auto models = eval::load_models(paths);
        const auto report = eval::ablation_suite(models, doc.value("seeds", 200),
                                                 doc.value("template", 0));
        std::cout << eval::ablation_table(report);
        if (doc.contains("out")) {
            const fs::path out = resolve_store_path(doc.at("out").get<std::string>());
            fs::create_directories(out);
            write_file_text(out / "ablation.json", eval::ablation_to_json(report));
            write_file_text(out / "ablation.txt", eval::ablation_table(report));
        }
    });

    // ---- run ----
    auto* rn = app.add_subcommand("run", "execute an experiment manifest (resumable)");
    std::string rn_manifest;
    rn->add_option("--manifest", rn_manifest)->required();
    rn->callback([&] {
        const int rc = run_manifest(resolve_store_path(rn_manifest));
        if (rc != 0) throw CLI::RuntimeError(rc);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace arp::cli
