#include "arp/sim.hpp"

#include <cmath>

namespace arp::sim {

namespace {

enum class EntityKind { background, object, arm };

struct Entity {
    EntityKind kind = EntityKind::background;
    int object_id = -1;
};

// topmost entity at a pixel, matching render order (arm over objects over table)
Entity entity_at(const WorldState& s, double wx, double wy) {
    Entity e;
    for (const Obj& o : s.objects) {
        if (object_contains(o, wx, wy)) e = {EntityKind::object, o.id};
    }
    if (std::abs(wx - s.arm.x) <= kArmHalf && std::abs(wy - s.arm.y) <= kArmHalf) {
        e = {EntityKind::arm, -1};
    }
    return e;
}

} // namespace

std::vector<std::pair<double, double>> oracle_correspondence(
    const std::vector<WorldState>& states, double px, double py, const Config& cfg) {
    if (states.empty()) fail("oracle_correspondence: no states");
    const int size = cfg.image_size;
    if (px < 0 || px > size - 1 || py < 0 || py > size - 1) {
        fail("oracle_correspondence: query outside frame");
    }
    const double wx = pixel_to_workspace(0, size) + px * 2.0 / size;
    const double wy = pixel_to_workspace(0, size) + py * 2.0 / size;
    const Entity e = entity_at(states[0], wx, wy);

    std::vector<std::pair<double, double>> traj;
    traj.reserve(states.size());
    for (const WorldState& s : states) {
        double dx = 0.0, dy = 0.0;
        if (e.kind == EntityKind::object) {
            dx = s.objects.at(e.object_id).cx - states[0].objects.at(e.object_id).cx;
            dy = s.objects.at(e.object_id).cy - states[0].objects.at(e.object_id).cy;
        } else if (e.kind == EntityKind::arm) {
            dx = s.arm.x - states[0].arm.x;
            dy = s.arm.y - states[0].arm.y;
        }
        double tx = px + dx * size / 2.0;
        double ty = py + dy * size / 2.0;
        tx = std::clamp(tx, 0.0, static_cast<double>(size - 1));
        ty = std::clamp(ty, 0.0, static_cast<double>(size - 1));
        traj.emplace_back(tx, ty);
    }
    return traj;
}

PseudoMask ground_truth_active_mask(const WorldState& state, const TaskInstance& task,
                                    const Config& cfg) {
    PseudoMask mask(cfg.image_size);
    const auto next = next_unsolved_target(state, task);
    if (!next) return mask;
    const int target_id = task.target_ids[*next];
    const int size = cfg.image_size;
    for (int y = 0; y < size; ++y) {
        const double wy = pixel_to_workspace(y, size);
        for (int x = 0; x < size; ++x) {
            const double wx = pixel_to_workspace(x, size);
            const Entity e = entity_at(state, wx, wy);
            if (e.kind == EntityKind::object && e.object_id == target_id) mask.at(y, x) = 1;
        }
    }
    return mask;
}

} // namespace arp::sim
