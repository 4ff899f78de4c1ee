#include "arp/region.hpp"

#include <json.hpp>

#include <sstream>

#include "arp/episode_store.hpp"
#include "arp/png_io.hpp"
#include "arp/sim.hpp"

namespace arp::region {

using nlohmann::json;

MinedMask mine_mask(const Episode& ep, MiningSource src, double tau, const Config& cfg) {
    MinedMask out;
    if (src == MiningSource::gt) {
        const auto [state, task] = sim::reset(ep.seed, ep.task.template_id, cfg);
        out.mask = sim::ground_truth_active_mask(state, task, cfg);
    } else {
        track::TrajectorySet ts;
        if (src == MiningSource::oracle) {
            const auto states = sim::replay_states(ep, cfg);
            ts = track::track_grid(ep.frames, cfg.grid_M, track::TrackerKind::oracle, &states, cfg);
        } else {
            ts = track::track_grid(ep.frames, cfg.grid_M, track::TrackerKind::correlation, nullptr,
                                   cfg);
        }
        const auto moving = track::select_moving(ts, tau);
        const auto prompts = track::initial_coordinates(moving);
        const PseudoMask raw = segment_from_prompts(ep.frames[0], prompts);
        out.mask = filter_components(raw, ep.frames[0]);
    }
    out.flagged = out.mask.area() == 0;
    return out;
}

namespace {

void save_mask_png(const fs::path& path, const PseudoMask& mask) {
    std::vector<uint8_t> rgb(static_cast<size_t>(mask.size) * mask.size * 3);
    for (size_t i = 0; i < mask.m.size(); ++i) {
        const uint8_t v = mask.m[i] ? 255 : 0;
        rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = v;
    }
    write_png_rgb8(path, rgb, mask.size, mask.size);
}

PseudoMask load_mask_png(const fs::path& path) {
    int w = 0, h = 0;
    const auto rgb = read_png_rgb8(path, w, h);
    if (w != h) fail("region: mask must be square: " + path.string());
    PseudoMask mask(w);
    for (size_t i = 0; i < mask.m.size(); ++i) mask.m[i] = rgb[3 * i] >= 128 ? 1 : 0;
    return mask;
}

json record_to_json(const ActiveRegionRecord& r) {
    return json{{"episode_id", r.episode_id},
                {"flagged", r.flagged},
                {"task",
                 {{"template_id", r.task.template_id},
                  {"color", r.task.color},
                  {"shape", r.task.shape},
                  {"zone_color", r.task.zone_color},
                  {"text", r.task.text},
                  {"token_ids", r.task.token_ids}}},
                {"mask", r.mask_file},
                {"x0_latent", r.x0_latent_file},
                {"o_latent", r.o_latent_file},
                {"codec_hash", r.codec_hash},
                {"source", r.source},
                {"tau", r.tau}};
}

ActiveRegionRecord record_from_json(const json& j) {
    ActiveRegionRecord r;
    r.episode_id = j.at("episode_id").get<std::string>();
    r.flagged = j.at("flagged").get<bool>();
    const auto& t = j.at("task");
    r.task.template_id = t.at("template_id").get<int>();
    r.task.color = t.at("color").get<int>();
    r.task.shape = t.at("shape").get<int>();
    r.task.zone_color = t.at("zone_color").get<int>();
    r.task.text = t.at("text").get<std::string>();
    r.task.token_ids = t.at("token_ids").get<std::vector<int>>();
    r.mask_file = j.at("mask").get<std::string>();
    r.x0_latent_file = j.at("x0_latent").get<std::string>();
    r.o_latent_file = j.at("o_latent").get<std::string>();
    r.codec_hash = j.at("codec_hash").get<std::string>();
    r.source = j.at("source").get<std::string>();
    r.tau = j.at("tau").get<double>();
    return r;
}

} // namespace

RegionManifest mine_dataset(const fs::path& store, const fs::path& codec_dir,
                            const fs::path& out_dir, MiningSource src, double tau,
                            const Config& cfg) {
    const StoreManifest sm = load_manifest(store);
    if (sm.episodes.empty()) fail("mine_dataset: empty episode store");
    auto cdc = codec::load_codec(codec_dir);
    if (cdc->config().image_size != cfg.image_size ||
        cdc->config().latent_spatial != cfg.latent_spatial) {
        fail("mine_dataset: codec shape does not match config");
    }
    const std::string codec_hash = to_hex(cdc->content_hash());
    fs::create_directories(out_dir);

    RegionManifest manifest;
    manifest.codec_hash = codec_hash;
    manifest.dir = out_dir;
    std::string lines;
    for (const StoreEntry& entry : sm.episodes) {
        const Episode ep = load_episode(store, entry.id, cfg);
        const MinedMask mined = mine_mask(ep, src, tau, cfg);
        const Frame o = compose_active_region(ep.frames[0], mined.mask);

        ActiveRegionRecord r;
        r.episode_id = entry.id;
        r.flagged = mined.flagged;
        r.task = ep.task;
        r.mask_file = entry.id + "_mask.png";
        r.x0_latent_file = entry.id + "_x0.lat";
        r.o_latent_file = entry.id + "_o.lat";
        r.codec_hash = codec_hash;
        r.source = to_string(src);
        r.tau = tau;

        save_mask_png(out_dir / r.mask_file, mined.mask);
        save_latent(out_dir / r.x0_latent_file, cdc->encode(ep.frames[0]));
        save_latent(out_dir / r.o_latent_file, cdc->encode(o));
        lines += record_to_json(r).dump() + "\n";
        manifest.records.push_back(std::move(r));
    }
    write_file_text(out_dir / "regions.jsonl", lines);
    return manifest;
}

RegionManifest load_region_manifest(const fs::path& out_dir) {
    const fs::path path = out_dir / "regions.jsonl";
    if (!fs::exists(path)) fail("region: missing manifest: " + path.string());
    RegionManifest manifest;
    manifest.dir = out_dir;
    std::istringstream in(read_file_text(path));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        manifest.records.push_back(record_from_json(json::parse(line)));
    }
    if (manifest.records.empty()) fail("region: empty manifest: " + path.string());
    manifest.codec_hash = manifest.records[0].codec_hash;
    for (const auto& r : manifest.records) {
        if (r.codec_hash != manifest.codec_hash) {
            fail("region: mixed codec hashes in manifest");
        }
    }
    return manifest;
}

Latent record_x0_latent(const RegionManifest& m, const ActiveRegionRecord& r) {
    return load_latent(m.dir / r.x0_latent_file);
}

Latent record_o_latent(const RegionManifest& m, const ActiveRegionRecord& r) {
    return load_latent(m.dir / r.o_latent_file);
}

PseudoMask record_mask(const RegionManifest& m, const ActiveRegionRecord& r) {
    return load_mask_png(m.dir / r.mask_file);
}

} // namespace arp::region
