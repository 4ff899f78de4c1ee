#pragma once

#include <memory>
#include <vector>

#include "arp/checkpoint.hpp"
#include "arp/config.hpp"
#include "arp/nn.hpp"
#include "arp/types.hpp"

// Latent inverse dynamics: decodes the action taken between two adjacent
// frame latents. This module never touches the frame decoder; it links
// against core only, which tests/test_invdyn_standalone.cpp proves at link
// time.

namespace arp::invdyn {

class InvDyn {
public:
    explicit InvDyn(const Config& cfg, uint64_t init_seed = 0);
    ~InvDyn();

    // x: [N, 2*latent_channels, S, S] normalized latent pairs
    Tensor forward(const Tensor& x);
    void backward(const Tensor& gy);

    nn::Registry<float>& registry();
    const Config& config() const { return cfg_; }

    double latent_mean = 0, latent_std = 1;

private:
    struct Impl;
    Config cfg_;
    std::unique_ptr<Impl> impl_;
};

struct LatentPair {
    Latent before, after;
    Action action;
};

struct InvDynStats {
    std::vector<double> losses;
    double initial_loss = 0;
    double final_loss = 0;
};

// L1 regression of actions from adjacent ground-truth latent pairs; the
// caller assembles the pairs (the store/codec wiring lives with the CLI)
InvDynStats train_invdyn(InvDyn& model, const std::vector<LatentPair>& pairs, int steps,
                         uint64_t seed);

// deterministic, components clamped to [-1, 1]
Action decode_action(InvDyn& model, const Latent& before, const Latent& after);

// pairwise decode over adjacent latents, order preserving
std::vector<Action> decode_sequence(InvDyn& model, const std::vector<Latent>& latents);

void save_invdyn(const fs::path& dir, InvDyn& model, const InvDynStats& stats,
                 const std::string& codec_hash);
std::unique_ptr<InvDyn> load_invdyn(const fs::path& dir, std::string* codec_hash_out = nullptr);

// mean per-component L1 error against ground-truth actions
double action_l1(const Action& predicted, const Action& truth);

} // namespace arp::invdyn
