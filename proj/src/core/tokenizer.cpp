#include "arp/tokenizer.hpp"

#include <sstream>
#include <unordered_map>

namespace arp {

namespace {

const char* kTemplates[kNumTemplates] = {
    "pack the {color} {shape} into the {zone} zone",
    "put the {color} {shape} in the {zone} zone",
    "move the {color} {shape} to the {zone} zone",
    "place the {color} {shape} inside the {zone} zone",
    "push the {color} {shape} into the {zone} zone",
    "bring the {color} {shape} to the {zone} zone",
    "pack all {color} blocks into the {zone} zone",
    "move every {color} block to the {zone} zone",
    "stash the {color} {shape} in the {zone} zone",
    "collect all {color} blocks in the {zone} zone",
};

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
    size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

} // namespace

const std::vector<std::string>& color_names() {
    static const std::vector<std::string> names = {"red",    "green",  "blue",
                                                   "yellow", "purple", "orange"};
    return names;
}

const std::vector<std::string>& shape_names() {
    static const std::vector<std::string> names = {"block", "bowl"};
    return names;
}

bool template_is_multi_target(int template_id) {
    return template_id == 6 || template_id == 7 || template_id == 9;
}

std::string render_template(int template_id, int color, int shape, int zone_color) {
    if (template_id < 0 || template_id >= kNumTemplates) {
        fail("render_template: template_id out of range: " + std::to_string(template_id));
    }
    if (color < 0 || color >= kNumColors || zone_color < 0 || zone_color >= kNumColors) {
        fail("render_template: color slot out of range");
    }
    if (shape < 0 || shape >= kNumShapes) fail("render_template: shape slot out of range");
    std::string s = kTemplates[template_id];
    s = replace_all(s, "{color}", color_names()[color]);
    s = replace_all(s, "{shape}", shape_names()[shape]);
    s = replace_all(s, "{zone}", color_names()[zone_color]);
    return s;
}

std::vector<int> tokenize(const Config& cfg, const std::string& text) {
    std::unordered_map<std::string, int> index;
    for (size_t i = 0; i < cfg.vocab.size(); ++i) index[cfg.vocab[i]] = static_cast<int>(i);

    std::vector<int> ids(cfg.max_tokens, 0);
    std::istringstream in(text);
    std::string word;
    int n = 0;
    while (in >> word) {
        auto it = index.find(word);
        if (it == index.end()) fail("tokenize: out-of-vocabulary word \"" + word + "\"");
        if (n >= cfg.max_tokens) fail("tokenize: text longer than max_tokens");
        ids[n++] = it->second;
    }
    return ids;
}

std::string detokenize(const Config& cfg, const std::vector<int>& ids) {
    std::string out;
    for (int id : ids) {
        if (id == 0) continue;
        if (id < 0 || id >= static_cast<int>(cfg.vocab.size())) {
            fail("detokenize: id out of range: " + std::to_string(id));
        }
        if (!out.empty()) out += ' ';
        out += cfg.vocab[id];
    }
    return out;
}

TaskText make_task_text(const Config& cfg, int template_id, int color, int shape, int zone_color) {
    TaskText t;
    t.template_id = template_id;
    t.color = color;
    t.shape = shape;
    t.zone_color = zone_color;
    t.text = render_template(template_id, color, shape, zone_color);
    t.token_ids = tokenize(cfg, t.text);
    return t;
}

} // namespace arp
