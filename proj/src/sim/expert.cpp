#include "arp/sim.hpp"

#include <cmath>

namespace arp::sim {

Action scripted_expert(const WorldState& state, const TaskInstance& task, const Config& cfg) {
    const auto next = next_unsolved_target(state, task);
    if (!next) return noop_action(cfg);

    const int idx = *next;
    const Obj& o = state.objects.at(task.target_ids[idx]);
    const auto [gx, gy] = target_goal(task, idx, state);
    const double dx = gx - o.cx, dy = gy - o.cy;
    const double len = std::sqrt(dx * dx + dy * dy);
    const double step_len = std::min(len, kMaxDrag);
    const double px = len > 0 ? o.cx + dx / len * step_len : gx;
    const double py = len > 0 ? o.cy + dy / len * step_len : gy;

    Action a(cfg.action_dim);
    a.values[0] = o.cx;
    a.values[1] = o.cy;
    a.values[2] = px;
    a.values[3] = py;
    return a;
}

Episode rollout_expert(uint64_t seed, int template_id, const Config& cfg) {
    auto [state, task] = reset(seed, template_id, cfg);
    Episode ep;
    ep.seed = seed;
    ep.task = task.task;
    ep.frames.push_back(render(state, cfg));
    for (int h = 0; h < cfg.horizon_H; ++h) {
        const Action a = scripted_expert(state, task, cfg);
        state = step(state, a);
        ep.actions.push_back(a);
        ep.frames.push_back(render(state, cfg));
    }
    ep.success = is_success(state, task);
    return ep;
}

std::vector<WorldState> replay_states(const Episode& ep, const Config& cfg) {
    auto [state, task] = reset(ep.seed, ep.task.template_id, cfg);
    (void)task;
    std::vector<WorldState> states;
    states.push_back(state);
    for (const Action& a : ep.actions) {
        state = step(state, a);
        states.push_back(state);
    }
    return states;
}

} // namespace arp::sim
