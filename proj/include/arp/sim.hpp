#pragma once

#include <array>
#include <optional>
#include <vector>

#include "arp/config.hpp"
#include "arp/episode_store.hpp"
#include "arp/tokenizer.hpp"
#include "arp/types.hpp"

namespace arp::sim {

// Deterministic 2D tabletop. Workspace coordinates span [-1,1]^2; pixel (i,j)
// of a frame is centred at ((i+0.5)*2/size - 1). One action is a full
// pick-and-place keyframe transition; the scripted expert drags objects in
// bounded steps so adjacent frames stay within the tracker's search window.

enum class ObjShape { block = 0, bowl = 1 };

struct Obj {
    int id = 0;
    ObjShape shape = ObjShape::block;
    int color = 0;
    double cx = 0, cy = 0;
    double half = 0.18; // half-extent (blocks) or radius (bowls)
};

struct Zone {
    int color = 0;
    double cx = 0, cy = 0;
    double half = 0.26;
};

struct ArmState {
    double x = -0.9, y = -0.9;
    int carrying = -1;
};

struct WorldState {
    std::vector<Obj> objects;
    std::vector<Zone> zones;
    ArmState arm;
    uint64_t rng_seed = 0;
};

struct TaskInstance {
    TaskText task;
    std::vector<int> target_ids;
    int target_zone = 0;
};

// ---- geometry/palette constants ----
inline constexpr double kArmHalf = 0.08;
inline constexpr double kMaxDrag = 0.22;  // per-step drag bound, ~7 px at 64
inline constexpr double kArmHomeX = -0.9;
inline constexpr double kArmHomeY = -0.9;
inline constexpr float kTableBase = 0.55f;
inline constexpr float kTableNoise = 0.10f;
inline constexpr float kObjNoise = 0.02f;
inline constexpr float kZoneAlpha = 0.45f;
inline constexpr double kNoopCoord = -1.0;

const std::array<std::array<float, 3>, 6>& palette();
const std::array<float, 3>& arm_color();

double pixel_to_workspace(int pixel, int size);
double workspace_to_pixel(double w, int size);

bool object_contains(const Obj& o, double wx, double wy);

// ---- operations ----
std::pair<WorldState, TaskInstance> reset(uint64_t seed, int template_id, const Config& cfg);

Frame render(const WorldState& state, const Config& cfg);

WorldState step(const WorldState& state, const Action& a);

Action scripted_expert(const WorldState& state, const TaskInstance& task, const Config& cfg);

bool is_success(const WorldState& state, const TaskInstance& task);

Action noop_action(const Config& cfg);

// per-target placement point inside the zone
std::pair<double, double> target_goal(const TaskInstance& task, int target_index,
                                      const WorldState& state);

// index into task.target_ids of the object the expert manipulates next, or
// nullopt when every target is already inside the zone
std::optional<int> next_unsolved_target(const WorldState& state, const TaskInstance& task);

// ---- oracles ----

// exact point correspondence: points on a moved object translate with it,
// arm points follow the arm, background points are constant
std::vector<std::pair<double, double>> oracle_correspondence(
    const std::vector<WorldState>& states, double px, double py, const Config& cfg);

PseudoMask ground_truth_active_mask(const WorldState& state, const TaskInstance& task,
                                    const Config& cfg);

// ---- episodes ----
Episode rollout_expert(uint64_t seed, int template_id, const Config& cfg);

// replays a stored episode's actions from its seed; states[h] renders to frame h
std::vector<WorldState> replay_states(const Episode& ep, const Config& cfg);

// writes n expert episodes with per-episode seeds (seed+i) mod 10^6; a
// template_id of -1 cycles through all templates
struct DatasetSummary {
    int episodes = 0;
    int successes = 0;
};
DatasetSummary generate_dataset(int n, uint64_t seed, const fs::path& store, int template_id,
                                const Config& cfg);

} // namespace arp::sim
