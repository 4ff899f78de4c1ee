#include "arp/episode_store.hpp"

#include <json.hpp>

#include <algorithm>

#include "arp/png_io.hpp"
#include "arp/tokenizer.hpp"

namespace arp {

using nlohmann::json;

namespace {

std::string frame_name(int idx) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%03d.png", idx);
    return buf;
}

json task_to_json(const TaskText& t) {
    return json{{"template_id", t.template_id}, {"color", t.color},       {"shape", t.shape},
                {"zone_color", t.zone_color},   {"text", t.text},         {"token_ids", t.token_ids}};
}

TaskText task_from_json(const json& j) {
    TaskText t;
    t.template_id = j.at("template_id").get<int>();
    t.color = j.at("color").get<int>();
    t.shape = j.at("shape").get<int>();
    t.zone_color = j.at("zone_color").get<int>();
    t.text = j.at("text").get<std::string>();
    t.token_ids = j.at("token_ids").get<std::vector<int>>();
    return t;
}

} // namespace

std::string episode_id_from_index(size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "ep_%06zu", index);
    return buf;
}

void init_store(const fs::path& store, const Config& cfg) {
    fs::create_directories(store);
    if (!fs::exists(store / "manifest.json")) {
        json m{{"h", cfg.horizon_H}, {"image_size", cfg.image_size}, {"episodes", json::array()}};
        write_file_text(store / "manifest.json", m.dump(2));
    }
}

StoreManifest load_manifest(const fs::path& store) {
    const fs::path path = store / "manifest.json";
    if (!fs::exists(path)) fail("episode store: missing manifest: " + path.string());
    json m;
    try {
        m = json::parse(read_file_text(path));
    } catch (const std::exception& e) {
        fail("episode store: corrupt manifest: " + std::string(e.what()));
    }
    StoreManifest out;
    out.h = m.at("h").get<int>();
    out.image_size = m.at("image_size").get<int>();
    for (const auto& e : m.at("episodes")) {
        StoreEntry entry;
        entry.id = e.at("id").get<std::string>();
        entry.seed = e.at("seed").get<uint64_t>();
        entry.template_id = e.at("template_id").get<int>();
        entry.success = e.at("success").get<bool>();
        out.episodes.push_back(std::move(entry));
    }
    return out;
}

namespace {

void write_manifest(const fs::path& store, const StoreManifest& m) {
    json doc{{"h", m.h}, {"image_size", m.image_size}, {"episodes", json::array()}};
    for (const auto& e : m.episodes) {
        doc["episodes"].push_back(json{{"id", e.id},
                                       {"seed", e.seed},
                                       {"template_id", e.template_id},
                                       {"success", e.success}});
    }
    write_file_text(store / "manifest.json", doc.dump(2));
}

} // namespace

void save_episode_as(const fs::path& store, const std::string& id, const Episode& ep,
                     const Config& cfg) {
    validate_episode(ep, cfg);
    const fs::path dir = store / id;
    fs::create_directories(dir);
    for (size_t i = 0; i < ep.frames.size(); ++i) {
        write_png_rgb8(dir / frame_name(static_cast<int>(i)), frame_to_u8(ep.frames[i]),
                       cfg.image_size, cfg.image_size);
    }
    json meta;
    meta["h"] = cfg.horizon_H;
    meta["seed"] = ep.seed;
    meta["success"] = ep.success;
    meta["task"] = task_to_json(ep.task);
    meta["actions"] = json::array();
    for (const Action& a : ep.actions) meta["actions"].push_back(a.values);
    write_file_text(dir / "episode.json", meta.dump(2));
}

std::string save_episode(const fs::path& store, const Episode& ep, const Config& cfg) {
    if (!fs::exists(store / "manifest.json")) init_store(store, cfg);
    StoreManifest m = load_manifest(store);
    const std::string id = episode_id_from_index(m.episodes.size());
    save_episode_as(store, id, ep, cfg);
    m.episodes.push_back({id, ep.seed, ep.task.template_id, ep.success});
    write_manifest(store, m);
    return id;
}

void rebuild_manifest(const fs::path& store, const Config& cfg) {
    StoreManifest m;
    m.h = cfg.horizon_H;
    m.image_size = cfg.image_size;
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(store)) {
        if (entry.is_directory() && entry.path().filename().string().rfind("ep_", 0) == 0) {
            ids.push_back(entry.path().filename().string());
        }
    }
    std::sort(ids.begin(), ids.end());
    for (const auto& id : ids) {
        const json meta = json::parse(read_file_text(store / id / "episode.json"));
        m.episodes.push_back({id, meta.at("seed").get<uint64_t>(),
                              meta.at("task").at("template_id").get<int>(),
                              meta.at("success").get<bool>()});
    }
    write_manifest(store, m);
}

Episode load_episode(const fs::path& store, const std::string& id, const Config& cfg) {
    const fs::path dir = store / id;
    if (!fs::exists(dir / "episode.json")) {
        fail("episode store: unknown episode id \"" + id + "\"");
    }
    json meta;
    try {
        meta = json::parse(read_file_text(dir / "episode.json"));
    } catch (const std::exception& e) {
        fail("episode store: corrupt episode.json for \"" + id + "\": " + e.what());
    }
    Episode ep;
    ep.seed = meta.at("seed").get<uint64_t>();
    ep.success = meta.at("success").get<bool>();
    ep.task = task_from_json(meta.at("task"));
    const int h = meta.at("h").get<int>();
    if (h != cfg.horizon_H) fail("episode store: horizon mismatch for \"" + id + "\"");
    for (const auto& av : meta.at("actions")) {
        Action a;
        a.values = av.get<std::vector<double>>();
        ep.actions.push_back(std::move(a));
    }
    for (int i = 0; i <= h; ++i) {
        int w = 0, hh = 0;
        const auto bytes = read_png_rgb8(dir / frame_name(i), w, hh);
        if (w != cfg.image_size || hh != cfg.image_size) {
            fail("episode store: frame size mismatch for \"" + id + "\"");
        }
        ep.frames.push_back(frame_from_u8(bytes, w));
    }
    validate_episode(ep, cfg);
    return ep;
}

} // namespace arp
