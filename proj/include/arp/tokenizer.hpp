#pragma once

#include <string>
#include <vector>

#include "arp/config.hpp"
#include "arp/types.hpp"

namespace arp {

// Closed instruction grammar: 10 phrasing templates over (color, shape,
// zone-color) slots. Templates 6, 7 and 9 describe every block of the given
// color; the rest describe a single object.
constexpr int kNumTemplates = 10;
constexpr int kNumColors = 6;
constexpr int kNumShapes = 2;

const std::vector<std::string>& color_names();
const std::vector<std::string>& shape_names();
bool template_is_multi_target(int template_id);
std::string render_template(int template_id, int color, int shape, int zone_color);

// tokenize to a fixed-length padded id sequence over cfg.vocab; throws on
// out-of-vocabulary words or overflow
std::vector<int> tokenize(const Config& cfg, const std::string& text);
std::string detokenize(const Config& cfg, const std::vector<int>& ids);

TaskText make_task_text(const Config& cfg, int template_id, int color, int shape, int zone_color);

} // namespace arp
