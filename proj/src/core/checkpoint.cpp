#include "arp/checkpoint.hpp"

#include <json.hpp>

namespace arp::nn {

using nlohmann::json;

void save_checkpoint(const fs::path& dir, const std::string& kind, Registry<float>& reg,
                     const Config& cfg, const std::string& extra_json) {
    fs::create_directories(dir);
    const auto blob = reg.serialize();
    write_file_bytes(dir / "params.bin", blob.data(), blob.size());
    const std::string hash = to_hex(fnv1a64(blob.data(), blob.size()));
    write_file_text(dir / "hash.txt", hash + "\n");
    json doc;
    doc["kind"] = kind;
    doc["config"] = json::parse(config_to_json(cfg));
    doc["extra"] = json::parse(extra_json);
    write_file_text(dir / "config.json", doc.dump(2));
}

CheckpointInfo peek_checkpoint(const fs::path& dir) {
    if (!fs::exists(dir / "config.json")) fail("checkpoint: missing config.json in " + dir.string());
    json doc;
    try {
        doc = json::parse(read_file_text(dir / "config.json"));
    } catch (const std::exception& e) {
        fail("checkpoint: corrupt config.json: " + std::string(e.what()));
    }
    CheckpointInfo info;
    info.kind = doc.at("kind").get<std::string>();
    info.config = parse_config_json(doc.at("config").dump());
    info.extra_json = doc.at("extra").dump();
    std::string h = read_file_text(dir / "hash.txt");
    while (!h.empty() && (h.back() == '\n' || h.back() == '\r')) h.pop_back();
    info.hash = h;
    return info;
}

CheckpointInfo load_checkpoint(const fs::path& dir, const std::string& kind,
                               Registry<float>& reg) {
    CheckpointInfo info = peek_checkpoint(dir);
    if (info.kind != kind) {
        fail("checkpoint: expected kind \"" + kind + "\", found \"" + info.kind + "\" in " +
             dir.string());
    }
    const auto blob = read_file_bytes(dir / "params.bin");
    reg.deserialize(blob);
    const std::string actual = to_hex(fnv1a64(blob.data(), blob.size()));
    if (actual != info.hash) fail("checkpoint: hash.txt does not match params.bin in " + dir.string());
    return info;
}

} // namespace arp::nn
