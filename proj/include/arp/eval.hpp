#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "arp/codec.hpp"
#include "arp/config.hpp"
#include "arp/diffusion.hpp"
#include "arp/invdyn.hpp"
#include "arp/region.hpp"
#include "arp/sim.hpp"

namespace arp::eval {

// Planner arm selection for one rollout:
//   none       - planner trained without active regions
//   pred       - region generator trained on mined (unsupervised) regions
//   pred_sup   - region generator trained on ground-truth-mask composites
//   gt         - ground-truth active region fed at inference
//   gt_latents - ground-truth future latents (isolates the action decoder)
//   random     - uniform random actions (context baseline)
enum class PlanMode { none, pred, pred_sup, gt, gt_latents, random };

PlanMode mode_from_string(const std::string& name);
std::string to_string(PlanMode mode);

struct CheckpointPaths {
    fs::path codec;
    fs::path ar;          // unsupervised-mined region generator
    fs::path ar_sup;      // gt-mask-trained region generator
    fs::path planner_ar;  // video planner with region conditioning
    fs::path planner_noar;
    fs::path invdyn;
};

// Loaded model bundle. Loading verifies that every checkpoint was trained on
// the same codec latent space and refuses to mix.
struct Models {
    Config cfg;
    std::unique_ptr<codec::Codec> codec;
    std::optional<diff::ArModel> ar;
    std::optional<diff::ArModel> ar_sup;
    std::optional<diff::VideoModel> planner_ar;
    std::optional<diff::VideoModel> planner_noar;
    std::unique_ptr<invdyn::InvDyn> invdyn;
    std::string codec_hash;
    std::map<std::string, std::string> hashes;
};

Models load_models(const CheckpointPaths& paths);

struct EpisodeRecord {
    uint64_t seed = 0;
    int template_id = 0;
    std::string mode;
    bool success = false;
    double task_loss = 0;
    std::vector<Action> actions;
};

struct EvalReport {
    int template_id = 0;
    std::string mode;
    int episodes = 0;
    double success_rate = 0;
    double mean_task_loss = 0;
    std::string config_hash;
    std::map<std::string, std::string> checkpoint_hashes;
    std::vector<EpisodeRecord> records;
};

std::string report_to_json(const EvalReport& r);
EvalReport report_from_json(const std::string& text);

// one full open-loop rollout: reset, plan, decode, execute H steps, judge
EpisodeRecord run_episode(Models& models, uint64_t env_seed, int template_id, PlanMode mode);

// aggregates run_episode over the seeds (plan sampling batched internally)
EvalReport run_success_rate(Models& models, const std::vector<uint64_t>& seeds, int template_id,
                            PlanMode mode);

// mean over steps of the per-component L1 between actions decoded from the
// generated latents (x0 followed by H generated frames) and the ground truth
double task_loss(const std::vector<Latent>& latents, const std::vector<Action>& gt_actions,
                 invdyn::InvDyn& model);

// evaluation seeds live in a pool disjoint from training seeds (>= 10^6)
std::vector<uint64_t> eval_seeds(int count, int template_id);

// ---- ablation ----
struct AblationArm {
    std::string mode;
    double success_rate = 0;
    double mean_task_loss = 0;
    double delta_success = 0;    // vs the no-region arm, percentage points
    double delta_interval = 0;   // 1.96-sigma two-proportion half width
};

struct AblationReport {
    int template_id = 0;
    int episodes = 0;
    std::vector<AblationArm> arms; // none, pred, pred_sup, gt order
    AblationArm random_baseline;
    AblationArm gt_latents;
    std::map<std::string, EvalReport> reports;
};

AblationReport ablation_suite(Models& models, int seeds_per_template, int template_id);
std::string ablation_to_json(const AblationReport& r);
std::string ablation_table(const AblationReport& r);

} // namespace arp::eval
