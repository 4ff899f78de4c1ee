#include "arp/sim.hpp"

#include <algorithm>
#include <cmath>

#include "arp/rng.hpp"

namespace arp::sim {

const std::array<std::array<float, 3>, 6>& palette() {
    static const std::array<std::array<float, 3>, 6> p = {{
        {0.85f, 0.10f, 0.10f}, // red
        {0.10f, 0.75f, 0.15f}, // green
        {0.15f, 0.25f, 0.90f}, // blue
        {0.92f, 0.85f, 0.10f}, // yellow
        {0.55f, 0.10f, 0.80f}, // purple
        {0.95f, 0.55f, 0.10f}, // orange
    }};
    return p;
}

const std::array<float, 3>& arm_color() {
    // reserved colour, not in the object palette
    static const std::array<float, 3> c = {0.08f, 0.08f, 0.08f};
    return c;
}

double pixel_to_workspace(int pixel, int size) { return (pixel + 0.5) * 2.0 / size - 1.0; }

double workspace_to_pixel(double w, int size) { return (w + 1.0) / 2.0 * size - 0.5; }

bool object_contains(const Obj& o, double wx, double wy) {
    const double dx = wx - o.cx, dy = wy - o.cy;
    if (o.shape == ObjShape::block) {
        return std::abs(dx) <= o.half && std::abs(dy) <= o.half;
    }
    return dx * dx + dy * dy <= o.half * o.half;
}

namespace {

// fixed position-keyed noise; constant across episodes so it is learnable
float hash_noise(int x, int y, int ch, uint32_t salt) {
    uint64_t h = static_cast<uint64_t>(static_cast<uint32_t>(x)) * 73856093u;
    h ^= static_cast<uint64_t>(static_cast<uint32_t>(y)) * 19349663u;
    h ^= static_cast<uint64_t>(static_cast<uint32_t>(ch)) * 83492791u;
    h ^= static_cast<uint64_t>(salt) * 2654435761u;
    uint64_t s = h;
    const uint64_t r = splitmix64(s);
    const double u = static_cast<double>(r >> 11) * 0x1.0p-53;
    return static_cast<float>(2.0 * u - 1.0);
}

bool inside_square(double wx, double wy, double cx, double cy, double half) {
    return std::abs(wx - cx) <= half && std::abs(wy - cy) <= half;
}

double dist2(double ax, double ay, double bx, double by) {
    return (ax - bx) * (ax - bx) + (ay - by) * (ay - by);
}

double point_segment_dist(double px, double py, double ax, double ay, double bx, double by) {
    const double vx = bx - ax, vy = by - ay;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::sqrt(dist2(px, py, ax + t * vx, ay + t * vy));
}

} // namespace

Frame render(const WorldState& state, const Config& cfg) {
    const int size = cfg.image_size;
    Frame f(size);
    for (int y = 0; y < size; ++y) {
        const double wy = pixel_to_workspace(y, size);
        for (int x = 0; x < size; ++x) {
            const double wx = pixel_to_workspace(x, size);
            float c[3];
            for (int ch = 0; ch < 3; ++ch) c[ch] = kTableBase;
            for (const Zone& z : state.zones) {
                if (inside_square(wx, wy, z.cx, z.cy, z.half)) {
                    for (int ch = 0; ch < 3; ++ch) {
                        c[ch] = kZoneAlpha * palette()[z.color][ch] + (1.0f - kZoneAlpha) * c[ch];
                    }
                }
            }
            for (int ch = 0; ch < 3; ++ch) c[ch] += kTableNoise * hash_noise(x, y, ch, 17u);

            for (const Obj& o : state.objects) { // id order; later ids on top
                if (!object_contains(o, wx, wy)) continue;
                const int ox = x - static_cast<int>(std::lround(workspace_to_pixel(o.cx, size)));
                const int oy = y - static_cast<int>(std::lround(workspace_to_pixel(o.cy, size)));
                const uint32_t salt = 1000u + static_cast<uint32_t>(o.color) * 7u +
                                      static_cast<uint32_t>(o.shape);
                for (int ch = 0; ch < 3; ++ch) {
                    c[ch] = palette()[o.color][ch] + kObjNoise * hash_noise(ox, oy, ch, salt);
                }
            }
            if (inside_square(wx, wy, state.arm.x, state.arm.y, kArmHalf)) {
                for (int ch = 0; ch < 3; ++ch) c[ch] = arm_color()[ch];
            }
            for (int ch = 0; ch < 3; ++ch) {
                f.at(y, x, ch) = std::clamp(c[ch], 0.0f, 1.0f);
            }
        }
    }
    return quantize_frame(f);
}

WorldState step(const WorldState& state, const Action& a) {
    if (a.values.size() < 4) fail("step: action needs at least 4 components");
    WorldState s = state;
    const double pick_x = a.values[0], pick_y = a.values[1];
    const double place_x = std::clamp(a.values[2], -1.0, 1.0);
    const double place_y = std::clamp(a.values[3], -1.0, 1.0);
    int hit = -1;
    for (const Obj& o : s.objects) { // topmost = highest id
        if (object_contains(o, pick_x, pick_y)) hit = o.id;
    }
    if (hit >= 0) {
        s.objects[hit].cx = place_x;
        s.objects[hit].cy = place_y;
        s.arm.x = place_x;
        s.arm.y = place_y;
    } else {
        s.arm.x = place_x;
        s.arm.y = place_y;
    }
    s.arm.carrying = -1;
    return s;
}

bool is_success(const WorldState& state, const TaskInstance& task) {
    const Zone& z = state.zones.at(task.target_zone);
    for (int id : task.target_ids) {
        const Obj& o = state.objects.at(id);
        if (!inside_square(o.cx, o.cy, z.cx, z.cy, z.half)) return false;
    }
    return true;
}

Action noop_action(const Config& cfg) {
    Action a(cfg.action_dim);
    for (auto& v : a.values) v = kNoopCoord;
    return a;
}

std::pair<double, double> target_goal(const TaskInstance& task, int target_index,
                                      const WorldState& state) {
    const Zone& z = state.zones.at(task.target_zone);
    if (task.target_ids.size() == 1) return {z.cx, z.cy};
    const double off = target_index % 2 == 0 ? -0.08 : 0.08;
    return {z.cx + off, z.cy};
}

std::optional<int> next_unsolved_target(const WorldState& state, const TaskInstance& task) {
    const Zone& z = state.zones.at(task.target_zone);
    for (size_t i = 0; i < task.target_ids.size(); ++i) {
        const Obj& o = state.objects.at(task.target_ids[i]);
        if (!inside_square(o.cx, o.cy, z.cx, z.cy, z.half)) return static_cast<int>(i);
    }
    return std::nullopt;
}

namespace {

constexpr double kSpawnRange = 0.62;
constexpr double kZoneRange = 0.45;
constexpr double kSingleDistMin = 0.62, kSingleDistMax = 1.20;
constexpr double kMultiDistMin = 0.50, kMultiDistMax = 0.58;
constexpr double kHomeClear = 0.34;
constexpr double kCorridorClear = 0.10;

bool clear_of_objects(const std::vector<Obj>& objs, double x, double y, double half) {
    for (const Obj& o : objs) {
        const double gap = o.half + half + 0.06;
        if (std::abs(x - o.cx) < gap && std::abs(y - o.cy) < gap) return false;
    }
    return true;
}

bool clear_of_home(double x, double y) {
    return std::max(std::abs(x - kArmHomeX), std::abs(y - kArmHomeY)) >= kHomeClear;
}

} // namespace

std::pair<WorldState, TaskInstance> reset(uint64_t seed, int template_id, const Config& cfg) {
    if (template_id < 0 || template_id >= kNumTemplates) {
        fail("reset: template_id out of range: " + std::to_string(template_id));
    }
    Rng rng(derive_seed(seed, "reset"));
    const bool multi = template_is_multi_target(template_id);
    const int n_targets = multi ? 2 : 1;

    for (int attempt = 0; attempt < 500; ++attempt) {
        WorldState s;
        s.rng_seed = seed;
        s.arm = ArmState{kArmHomeX, kArmHomeY, -1};
        const int n_obj = 3 + static_cast<int>(rng.below(3)); // 3..5

        // colours sampled without replacement; last palette entry never used
        // by objects, so the zone colour is always distinct
        std::array<int, 6> colors = {0, 1, 2, 3, 4, 5};
        for (int i = 5; i > 0; --i) {
            std::swap(colors[i], colors[rng.below(static_cast<uint64_t>(i + 1))]);
        }
        Zone z;
        z.color = colors[5];
        z.cx = rng.uniform(-kZoneRange, kZoneRange);
        z.cy = rng.uniform(-kZoneRange, kZoneRange);
        s.zones.push_back(z);

        const int target_color = colors[0];
        const ObjShape target_shape = multi ? ObjShape::block
                                            : (rng.below(2) ? ObjShape::bowl : ObjShape::block);
        bool ok = true;
        std::vector<std::pair<double, double>> goals;
        for (int k = 0; k < n_targets && ok; ++k) {
            bool placed = false;
            for (int t = 0; t < 60 && !placed; ++t) {
                const double dist = multi ? rng.uniform(kMultiDistMin, kMultiDistMax)
                                          : rng.uniform(kSingleDistMin, kSingleDistMax);
                const double ang = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
                const double x = z.cx + dist * std::cos(ang);
                const double y = z.cy + dist * std::sin(ang);
                if (std::abs(x) > kSpawnRange || std::abs(y) > kSpawnRange) continue;
                if (!clear_of_home(x, y)) continue;
                Obj o;
                o.id = static_cast<int>(s.objects.size());
                o.shape = target_shape;
                o.color = target_color;
                o.half = rng.uniform(0.16, 0.20);
                o.cx = x;
                o.cy = y;
                if (!clear_of_objects(s.objects, x, y, o.half)) continue;
                s.objects.push_back(o);
                placed = true;
            }
            ok = placed;
        }
        if (!ok) continue;

        TaskInstance task;
        for (int k = 0; k < n_targets; ++k) task.target_ids.push_back(k);
        task.target_zone = 0;
        for (int k = 0; k < n_targets; ++k) goals.push_back(target_goal(task, k, s));

        const int n_distractors = n_obj - n_targets;
        for (int d = 0; d < n_distractors && ok; ++d) {
            bool placed = false;
            for (int t = 0; t < 60 && !placed; ++t) {
                Obj o;
                o.id = static_cast<int>(s.objects.size());
                o.shape = rng.below(2) ? ObjShape::bowl : ObjShape::block;
                o.color = colors[1 + d];
                o.half = rng.uniform(0.16, 0.20);
                o.cx = rng.uniform(-kSpawnRange, kSpawnRange);
                o.cy = rng.uniform(-kSpawnRange, kSpawnRange);
                if (!clear_of_home(o.cx, o.cy)) continue;
                if (!clear_of_objects(s.objects, o.cx, o.cy, o.half)) continue;
                // keep distractors out of every target's drag corridor
                bool in_corridor = false;
                for (int k = 0; k < n_targets; ++k) {
                    const Obj& tgt = s.objects[k];
                    const double clearance = o.half + tgt.half + kCorridorClear;
                    if (point_segment_dist(o.cx, o.cy, tgt.cx, tgt.cy, goals[k].first,
                                           goals[k].second) < clearance) {
                        in_corridor = true;
                        break;
                    }
                }
                if (in_corridor) continue;
                s.objects.push_back(o);
                placed = true;
            }
            ok = placed;
        }
        if (!ok) continue;

        task.task = make_task_text(cfg, template_id, target_color, static_cast<int>(target_shape),
                                   z.color);
        return {s, task};
    }
    fail("reset: could not build a satisfiable scene for seed " + std::to_string(seed));
}

} // namespace arp::sim
