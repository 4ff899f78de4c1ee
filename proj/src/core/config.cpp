#include "arp/config.hpp"

#include <json.hpp>

#include <set>

namespace arp {

using nlohmann::json;

std::vector<std::string> default_vocab() {
    return {"<pad>",  "pack", "put",  "move",   "place", "push",  "bring", "stash", "collect",
            "the",    "all",  "every", "into",  "in",    "to",    "inside", "zone", "block",
            "bowl",   "blocks", "red", "green", "blue",  "yellow", "purple", "orange"};
}

namespace {

bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

void check(bool ok, const std::string& key, const std::string& what) {
    if (!ok) fail("config: invalid value for \"" + key + "\": " + what);
}

} // namespace

void validate_config(const Config& c) {
    check(c.image_size >= 8, "image_size", "must be >= 8");
    check(c.latent_spatial >= 4, "latent_spatial", "must be >= 4");
    check(c.image_size % c.latent_spatial == 0, "latent_spatial", "must divide image_size");
    const int ratio = c.image_size / c.latent_spatial;
    check(c.image_size % ratio == 0, "image_size", "must be divisible by image_size/latent_spatial");
    check(is_pow2(ratio) && ratio >= 2, "latent_spatial", "downsample ratio must be a power of two >= 2");
    check(c.latent_channels >= 1, "latent_channels", "must be >= 1");
    check(c.horizon_H >= 1, "horizon_H", "must be >= 1");
    check(c.grid_M >= 2, "grid_M", "must be >= 2");
    check(c.tau > 0.0, "tau", "must be > 0");
    check(c.action_dim >= 1, "action_dim", "must be >= 1");
    check(!c.vocab.empty() && c.vocab[0] == "<pad>", "vocab", "must start with <pad>");
    check(std::set<std::string>(c.vocab.begin(), c.vocab.end()).size() == c.vocab.size(), "vocab",
          "entries must be unique");
    check(c.max_tokens >= 4, "max_tokens", "must be >= 4");
    check(c.diffusion_steps >= 1, "diffusion_steps", "must be >= 1");
    check(c.noise_schedule_name == "cosine" || c.noise_schedule_name == "linear",
          "noise_schedule_name", "must be \"cosine\" or \"linear\"");
    check(c.guidance_scale > 0.0, "guidance_scale", "must be > 0");
    check(c.cond_dropout >= 0.0 && c.cond_dropout < 1.0, "cond_dropout", "must be in [0,1)");
    check(c.lr_codec > 0.0, "lr_codec", "must be > 0");
    check(c.lr_ar > 0.0, "lr_ar", "must be > 0");
    check(c.lr_planner > 0.0, "lr_planner", "must be > 0");
    check(c.lr_invdyn > 0.0, "lr_invdyn", "must be > 0");
    check(c.batch_codec >= 1, "batch_codec", "must be >= 1");
    check(c.batch_ar >= 1, "batch_ar", "must be >= 1");
    check(c.batch_planner >= 1, "batch_planner", "must be >= 1");
    check(c.batch_invdyn >= 1, "batch_invdyn", "must be >= 1");
    check(c.unet_channels >= 8 && c.unet_channels % 4 == 0, "unet_channels",
          "must be >= 8 and divisible by 4");
    check(c.cond_dim >= 8, "cond_dim", "must be >= 8");
    check(c.text_embed_dim >= 2, "text_embed_dim", "must be >= 2");
    check(c.invdyn_channels >= 8 && c.invdyn_channels % 4 == 0, "invdyn_channels",
          "must be >= 8 and divisible by 4");
    check(c.kl_weight >= 0.0, "kl_weight", "must be >= 0");
}

Config parse_config_json(const std::string& text) {
    json doc;
    try {
        doc = text.empty() ? json::object() : json::parse(text);
    } catch (const std::exception& e) {
        fail(std::string("config: parse failure: ") + e.what());
    }
    if (!doc.is_object()) fail("config: document must be a JSON object");

    Config c;
    bool tau_set = false;
    for (const auto& [key, value] : doc.items()) {
        try {
            if (key == "image_size") c.image_size = value.get<int>();
            else if (key == "latent_spatial") c.latent_spatial = value.get<int>();
            else if (key == "latent_channels") c.latent_channels = value.get<int>();
            else if (key == "horizon_H") c.horizon_H = value.get<int>();
            else if (key == "grid_M") c.grid_M = value.get<int>();
            else if (key == "tau") { c.tau = value.get<double>(); tau_set = true; }
            else if (key == "action_dim") c.action_dim = value.get<int>();
            else if (key == "vocab") c.vocab = value.get<std::vector<std::string>>();
            else if (key == "max_tokens") c.max_tokens = value.get<int>();
            else if (key == "diffusion_steps") c.diffusion_steps = value.get<int>();
            else if (key == "noise_schedule_name") c.noise_schedule_name = value.get<std::string>();
            else if (key == "guidance_scale") c.guidance_scale = value.get<double>();
            else if (key == "cond_dropout") c.cond_dropout = value.get<double>();
            else if (key == "lr_codec") c.lr_codec = value.get<double>();
            else if (key == "lr_ar") c.lr_ar = value.get<double>();
            else if (key == "lr_planner") c.lr_planner = value.get<double>();
            else if (key == "lr_invdyn") c.lr_invdyn = value.get<double>();
            else if (key == "batch_codec") c.batch_codec = value.get<int>();
            else if (key == "batch_ar") c.batch_ar = value.get<int>();
            else if (key == "batch_planner") c.batch_planner = value.get<int>();
            else if (key == "batch_invdyn") c.batch_invdyn = value.get<int>();
            else if (key == "seed") c.seed = value.get<uint64_t>();
            else if (key == "unet_channels") c.unet_channels = value.get<int>();
            else if (key == "cond_dim") c.cond_dim = value.get<int>();
            else if (key == "text_embed_dim") c.text_embed_dim = value.get<int>();
            else if (key == "invdyn_channels") c.invdyn_channels = value.get<int>();
            else if (key == "kl_weight") c.kl_weight = value.get<double>();
            else fail("config: unknown key \"" + key + "\"");
        } catch (const json::exception& e) {
            fail("config: invalid value for \"" + key + "\": " + e.what());
        }
    }
    if (!tau_set) c.tau = 2.0 * c.image_size / 512.0;
    validate_config(c);
    return c;
}

Config load_config(const fs::path& path) {
    if (!fs::exists(path)) fail("config: file not found: " + path.string());
    return parse_config_json(read_file_text(path));
}

std::string config_to_json(const Config& c) {
    json doc;
    doc["image_size"] = c.image_size;
    doc["latent_spatial"] = c.latent_spatial;
    doc["latent_channels"] = c.latent_channels;
    doc["horizon_H"] = c.horizon_H;
    doc["grid_M"] = c.grid_M;
    doc["tau"] = c.tau;
    doc["action_dim"] = c.action_dim;
    doc["vocab"] = c.vocab;
    doc["max_tokens"] = c.max_tokens;
    doc["diffusion_steps"] = c.diffusion_steps;
    doc["noise_schedule_name"] = c.noise_schedule_name;
    doc["guidance_scale"] = c.guidance_scale;
    doc["cond_dropout"] = c.cond_dropout;
    doc["lr_codec"] = c.lr_codec;
    doc["lr_ar"] = c.lr_ar;
    doc["lr_planner"] = c.lr_planner;
    doc["lr_invdyn"] = c.lr_invdyn;
    doc["batch_codec"] = c.batch_codec;
    doc["batch_ar"] = c.batch_ar;
    doc["batch_planner"] = c.batch_planner;
    doc["batch_invdyn"] = c.batch_invdyn;
    doc["seed"] = c.seed;
    doc["unet_channels"] = c.unet_channels;
    doc["cond_dim"] = c.cond_dim;
    doc["text_embed_dim"] = c.text_embed_dim;
    doc["invdyn_channels"] = c.invdyn_channels;
    doc["kl_weight"] = c.kl_weight;
    return doc.dump(2);
}

uint64_t config_hash(const Config& c) { return fnv1a64(config_to_json(c)); }

} // namespace arp
