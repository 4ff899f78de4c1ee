#include "arp/cli.hpp"

#include <json.hpp>

#include <iostream>
#include <map>
#include <set>

#include "arp/diffusion.hpp"
#include "arp/episode_store.hpp"
#include "arp/invdyn.hpp"
#include "arp/region.hpp"
#include "arp/tokenizer.hpp"

namespace arp::cli {

using nlohmann::json;

namespace {

struct Stage {
    std::string name;
    std::string kind;
    json params;
};

struct RunContext {
    fs::path out_dir;
    Config cfg;
    std::map<std::string, fs::path> dirs;        // stage name -> output dir
    std::map<std::string, std::string> outputs;  // stage name -> output hash
    std::map<std::string, std::string> kinds;
};

const std::set<std::string> kKnownKinds = {"gen-data",   "train-codec", "mine-regions",
                                           "train-ar",   "train-planner", "train-invdyn",
                                           "eval",       "ablate"};

std::string param_str(const json& p, const std::string& key, const std::string& def) {
    return p.contains(key) ? p.at(key).get<std::string>() : def;
}

int param_int(const json& p, const std::string& key, int def) {
    return p.contains(key) ? p.at(key).get<int>() : def;
}

double param_double(const json& p, const std::string& key, double def) {
    return p.contains(key) ? p.at(key).get<double>() : def;
}

uint64_t param_u64(const json& p, const std::string& key, uint64_t def) {
    return p.contains(key) ? p.at(key).get<uint64_t>() : def;
}

// upstream stage reference: fails on unknown or not-yet-executed stages, which
// also rejects forward references and cycles
const fs::path& ref_stage(const RunContext& ctx, const Stage& stage, const std::string& key,
                          const std::string& def_name, const std::string& want_kind) {
    const std::string name = param_str(stage.params, key, def_name);
    auto it = ctx.dirs.find(name);
    if (it == ctx.dirs.end()) {
        fail("manifest: stage \"" + stage.name + "\" references \"" + name +
             "\" which is not an earlier stage (stages must be topologically ordered)");
    }
    if (!want_kind.empty() && ctx.kinds.at(name) != want_kind) {
        fail("manifest: stage \"" + stage.name + "\" expects \"" + name + "\" to be a " +
             want_kind + " stage");
    }
    return it->second;
}

std::string file_hash(const fs::path& p) {
    const auto bytes = read_file_bytes(p);
    return to_hex(fnv1a64(bytes.data(), bytes.size()));
}

// the codec trains on every episode frame plus the mined active-region
// composites; masks are mined without latents, so the codec can come first
std::vector<Frame> codec_training_images(const fs::path& store, const Config& cfg,
                                         region::MiningSource source, double tau) {
    const StoreManifest sm = load_manifest(store);
    if (sm.episodes.empty()) fail("train-codec: empty episode store");
    std::vector<Frame> images;
    for (const auto& entry : sm.episodes) {
        const Episode ep = load_episode(store, entry.id, cfg);
        for (const Frame& f : ep.frames) images.push_back(f);
        const auto mined = region::mine_mask(ep, source, tau, cfg);
        // active-region composites are rare relative to frames; upweight them so
        // white-background statistics get enough gradient share
        const Frame arf = region::compose_active_region(ep.frames[0], mined.mask);
        for (int rep = 0; rep < 3; ++rep) images.push_back(arf);
    }
    return images;
}

std::vector<invdyn::LatentPair> invdyn_pairs(const fs::path& store, codec::Codec& cdc,
                                             const Config& cfg, double fraction) {
    const StoreManifest sm = load_manifest(store);
    if (sm.episodes.empty()) fail("train-invdyn: empty episode store");
    const size_t keep = std::max<size_t>(
        1, static_cast<size_t>(fraction * static_cast<double>(sm.episodes.size())));
    std::vector<invdyn::LatentPair> pairs;
    for (size_t i = 0; i < keep && i < sm.episodes.size(); ++i) {
        const Episode ep = load_episode(store, sm.episodes[i].id, cfg);
        std::vector<Latent> zs;
        for (const Frame& f : ep.frames) zs.push_back(cdc.encode(f));
        for (int h = 0; h < cfg.horizon_H; ++h) {
            pairs.push_back({zs[h], zs[h + 1], ep.actions[h]});
        }
    }
    return pairs;
}

// qualitative strips for the first few evaluation seeds of an arm:
// [x0 | region | H decoded plan frames]
void write_arm_strips(eval::Models& models, int template_id, eval::PlanMode mode, int count,
                      const fs::path& dir) {
    if (mode == eval::PlanMode::random) return;
    const Config& cfg = models.cfg;
    const auto seeds = eval::eval_seeds(count, template_id);
    for (uint64_t seed : seeds) {
        auto [state, task] = sim::reset(seed, template_id, cfg);
        const Frame f0 = sim::render(state, cfg);
        const Latent x0 = models.codec->encode(f0);

        std::optional<Latent> region;
        std::vector<Latent> plan;
        if (mode == eval::PlanMode::gt_latents) {
            sim::WorldState cur = state;
            for (int h = 0; h < cfg.horizon_H; ++h) {
                cur = sim::step(cur, sim::scripted_expert(cur, task, cfg));
                plan.push_back(models.codec->encode(sim::render(cur, cfg)));
            }
        } else {
            if (mode == eval::PlanMode::gt) {
                const PseudoMask mask = sim::ground_truth_active_mask(state, task, cfg);
                region = models.codec->encode(region::compose_active_region(f0, mask));
            } else if (mode == eval::PlanMode::pred || mode == eval::PlanMode::pred_sup) {
                const diff::ArModel& gen =
                    mode == eval::PlanMode::pred ? *models.ar : *models.ar_sup;
                region = diff::sample_active_region(gen, x0, task.task,
                                                    derive_seed(seed, "ar-sample"));
            }
            const diff::VideoModel& planner = mode == eval::PlanMode::none
                                                  ? *models.planner_noar
                                                  : *models.planner_ar;
            plan = diff::sample_video(planner, x0, task.task, region ? &*region : nullptr,
                                      derive_seed(seed, "plan-sample"));
        }
        std::optional<Frame> region_frame;
        if (region) region_frame = models.codec->decode(*region);
        std::vector<Frame> frames;
        for (const Latent& z : plan) frames.push_back(models.codec->decode(z));
        char name[64];
        std::snprintf(name, sizeof(name), "strip_%s_seed%llu.png",
                      eval::to_string(mode).c_str(), static_cast<unsigned long long>(seed));
        write_plan_strip(dir / name, f0, region_frame ? &*region_frame : nullptr, frames);
    }
}

eval::CheckpointPaths checkpoint_paths(const RunContext& ctx, const Stage& stage) {
    eval::CheckpointPaths paths;
    paths.codec = ref_stage(ctx, stage, "codec", "codec", "train-codec");
    auto opt_ref = [&](const std::string& key, const std::string& def) -> fs::path {
        const std::string name = param_str(stage.params, key, def);
        auto it = ctx.dirs.find(name);
        return it == ctx.dirs.end() ? fs::path() : it->second;
    };
    paths.ar = opt_ref("ar", "ar");
    paths.ar_sup = opt_ref("ar_sup", "ar_sup");
    paths.planner_ar = opt_ref("planner_ar", "planner_ar");
    paths.planner_noar = opt_ref("planner_noar", "planner_noar");
    paths.invdyn = opt_ref("invdyn", "invdyn");
    return paths;
}

// returns the stage output hash
std::string execute_stage(RunContext& ctx, const Stage& stage) {
    const fs::path dir = ctx.dirs.at(stage.name);
    const Config& cfg = ctx.cfg;

    if (stage.kind == "gen-data") {
        const int n = param_int(stage.params, "n", 0);
        if (n < 1) fail("manifest: gen-data stage needs n >= 1");
        sim::generate_dataset(n, param_u64(stage.params, "seed", 0), dir,
                              param_int(stage.params, "template", -1), cfg);
        return file_hash(dir / "manifest.json");
    }
    if (stage.kind == "train-codec") {
        const fs::path store = ref_stage(ctx, stage, "data", "data", "gen-data");
        const auto source = region::mining_source_from_string(
            param_str(stage.params, "region_source", "correlation"));
        const double tau = param_double(stage.params, "tau", cfg.tau);
        const auto images = codec_training_images(store, cfg, source, tau);
        codec::Codec cdc(cfg, param_u64(stage.params, "seed", cfg.seed));
        const auto stats = codec::train_codec_on_images(
            cdc, images, param_int(stage.params, "steps", 1000),
            param_u64(stage.params, "seed", cfg.seed));
        codec::save_codec(dir, cdc, stats);
        return file_hash(dir / "hash.txt");
    }
    if (stage.kind == "mine-regions") {
        const fs::path store = ref_stage(ctx, stage, "data", "data", "gen-data");
        const fs::path codec_dir = ref_stage(ctx, stage, "codec", "codec", "train-codec");
        const auto source = region::mining_source_from_string(
            param_str(stage.params, "tracker", "correlation"));
        region::mine_dataset(store, codec_dir, dir, source,
                             param_double(stage.params, "tau", cfg.tau), cfg);
        return file_hash(dir / "regions.jsonl");
    }
    if (stage.kind == "train-ar") {
        const fs::path do_dir = ref_stage(ctx, stage, "do", "mine", "mine-regions");
        const auto manifest = region::load_region_manifest(do_dir);
        diff::train_active_region_model(
            manifest, cfg, param_u64(stage.params, "seed", cfg.seed),
            param_int(stage.params, "steps", 1000),
            stage.params.contains("include_flagged") && stage.params.at("include_flagged").get<bool>(),
            dir);
        return file_hash(dir / "hash.txt");
    }
    if (stage.kind == "train-planner") {
        const fs::path store = ref_stage(ctx, stage, "data", "data", "gen-data");
        const fs::path codec_dir = ref_stage(ctx, stage, "codec", "codec", "train-codec");
        const bool ar_on = !stage.params.contains("active_region") ||
                           stage.params.at("active_region").get<bool>();
        if (ar_on) {
            const fs::path do_dir = ref_stage(ctx, stage, "do", "mine", "mine-regions");
            const auto manifest = region::load_region_manifest(do_dir);
            diff::train_video_model(store, &manifest, codec_dir, cfg,
                                    param_u64(stage.params, "seed", cfg.seed),
                                    param_int(stage.params, "steps", 1000), true, dir);
        } else {
            diff::train_video_model(store, nullptr, codec_dir, cfg,
                                    param_u64(stage.params, "seed", cfg.seed),
                                    param_int(stage.params, "steps", 1000), false, dir);
        }
        return file_hash(dir / "hash.txt");
    }
    if (stage.kind == "train-invdyn") {
        const fs::path store = ref_stage(ctx, stage, "data", "data", "gen-data");
        const fs::path codec_dir = ref_stage(ctx, stage, "codec", "codec", "train-codec");
        auto cdc = codec::load_codec(codec_dir);
        const auto pairs =
            invdyn_pairs(store, *cdc, cfg, param_double(stage.params, "fraction", 1.0));
        invdyn::InvDyn model(cfg, param_u64(stage.params, "seed", cfg.seed));
        const auto stats = invdyn::train_invdyn(model, pairs,
                                                param_int(stage.params, "steps", 1000),
                                                param_u64(stage.params, "seed", cfg.seed));
        invdyn::save_invdyn(dir, model, stats, to_hex(cdc->content_hash()));
        return file_hash(dir / "hash.txt");
    }
    if (stage.kind == "eval") {
        auto models = eval::load_models(checkpoint_paths(ctx, stage));
        const int template_id = param_int(stage.params, "template", 0);
        const auto mode = eval::mode_from_string(param_str(stage.params, "mode", "pred"));
        const auto seeds = eval::eval_seeds(param_int(stage.params, "seeds", 100), template_id);
        const auto report = eval::run_success_rate(models, seeds, template_id, mode);
        const fs::path out = dir / "report.json";
        write_file_text(out, eval::report_to_json(report));
        write_arm_strips(models, template_id, mode, param_int(stage.params, "strips", 2), dir);
        return file_hash(out);
    }
    if (stage.kind == "ablate") {
        auto models = eval::load_models(checkpoint_paths(ctx, stage));
        const int template_id = param_int(stage.params, "template", 0);
        const auto report =
            eval::ablation_suite(models, param_int(stage.params, "seeds", 200), template_id);
        write_file_text(dir / "ablation.json", eval::ablation_to_json(report));
        write_file_text(dir / "ablation.txt", eval::ablation_table(report));
        const int strips = param_int(stage.params, "strips", 2);
        for (eval::PlanMode mode : {eval::PlanMode::none, eval::PlanMode::pred,
                                    eval::PlanMode::pred_sup, eval::PlanMode::gt,
                                    eval::PlanMode::gt_latents}) {
            write_arm_strips(models, template_id, mode, strips, dir);
        }
        std::cout << eval::ablation_table(report);
        return file_hash(dir / "ablation.json");
    }
    fail("manifest: unknown stage kind \"" + stage.kind + "\"");
}

} // namespace

int run_manifest(const fs::path& manifest_path) {
    if (!fs::exists(manifest_path)) fail("manifest: file not found: " + manifest_path.string());
    json doc;
    try {
        doc = json::parse(read_file_text(manifest_path));
    } catch (const std::exception& e) {
        fail("manifest: parse failure: " + std::string(e.what()));
    }

    RunContext ctx;
    ctx.out_dir = resolve_store_path(doc.at("out_dir").get<std::string>());
    ctx.cfg = parse_config_json(doc.contains("config") ? doc.at("config").dump() : "{}");
    fs::create_directories(ctx.out_dir);
    write_file_text(ctx.out_dir / "config.json", config_to_json(ctx.cfg));

    // validation pass: names unique, kinds known, references point backwards
    std::vector<Stage> stages;
    std::set<std::string> seen;
    for (const auto& js : doc.at("stages")) {
        Stage s;
        s.name = js.at("name").get<std::string>();
        s.kind = js.at("kind").get<std::string>();
        s.params = js;
        if (!kKnownKinds.count(s.kind)) {
            fail("manifest: unknown stage kind \"" + s.kind + "\" in stage \"" + s.name + "\"");
        }
        if (!seen.insert(s.name).second) fail("manifest: duplicate stage name \"" + s.name + "\"");
        stages.push_back(std::move(s));
    }
    for (size_t i = 0; i < stages.size(); ++i) {
        std::set<std::string> later;
        for (size_t j = i; j < stages.size(); ++j) later.insert(stages[j].name);
        for (const std::string key : {"data", "codec", "do", "ar", "ar_sup", "planner_ar",
                                      "planner_noar", "invdyn"}) {
            if (stages[i].params.contains(key) && stages[i].params.at(key).is_string()) {
                const std::string ref = stages[i].params.at(key).get<std::string>();
                if (later.count(ref)) {
                    fail("manifest: stage \"" + stages[i].name + "\" references \"" + ref +
                         "\" which does not precede it (ordering violation)");
                }
            }
        }
    }

    const uint64_t cfg_hash = config_hash(ctx.cfg);
    for (const Stage& stage : stages) {
        const fs::path dir = ctx.out_dir / stage.name;
        ctx.dirs[stage.name] = dir;
        ctx.kinds[stage.name] = stage.kind;

        // input hash: stage params + config + upstream output hashes
        uint64_t in_hash = fnv1a64(stage.params.dump());
        in_hash = fnv1a64(to_hex(cfg_hash), in_hash);
        for (const std::string key : {"data", "codec", "do", "ar", "ar_sup", "planner_ar",
                                      "planner_noar", "invdyn"}) {
            if (stage.params.contains(key) && stage.params.at(key).is_string()) {
                const std::string ref = stage.params.at(key).get<std::string>();
                if (ctx.outputs.count(ref)) in_hash = fnv1a64(ctx.outputs.at(ref), in_hash);
            }
        }
        // implicit default references contribute too
        for (const auto& [name, hash] : ctx.outputs) in_hash = fnv1a64(name + hash, in_hash);

        const fs::path state_file = dir / "stage.json";
        if (fs::exists(state_file)) {
            try {
                const json state = json::parse(read_file_text(state_file));
                if (state.at("input_hash").get<std::string>() == to_hex(in_hash)) {
                    ctx.outputs[stage.name] = state.at("output_hash").get<std::string>();
                    std::cout << "[skip] " << stage.name << " (up to date)\n";
                    continue;
                }
            } catch (const std::exception&) {
                // corrupt state: re-run the stage
            }
        }

        std::cout << "[run ] " << stage.name << " (" << stage.kind << ")\n" << std::flush;
        fs::create_directories(dir);
        std::string out_hash;
        try {
            out_hash = execute_stage(ctx, stage);
        } catch (const std::exception& e) {
            std::cerr << "manifest: stage \"" << stage.name << "\" failed: " << e.what() << "\n";
            return 1;
        }
        ctx.outputs[stage.name] = out_hash;
        json state{{"input_hash", to_hex(in_hash)}, {"output_hash", out_hash}};
        write_file_text(state_file, state.dump(2));
    }
    std::cout << "[done] " << stages.size() << " stages complete under " << ctx.out_dir << "\n";
    return 0;
}

} // namespace arp::cli
