#include "arp/sim.hpp"

namespace arp::sim {

DatasetSummary generate_dataset(int n, uint64_t seed, const fs::path& store, int template_id,
                                const Config& cfg) {
    if (n < 1) fail("generate_dataset: n must be >= 1");
    fs::create_directories(store);
    init_store(store, cfg);
    DatasetSummary summary;
    for (int i = 0; i < n; ++i) {
        const uint64_t ep_seed = (seed + static_cast<uint64_t>(i)) % 1000000ull; // training pool
        const int tid = template_id >= 0 ? template_id : i % kNumTemplates;
        const Episode ep = rollout_expert(ep_seed, tid, cfg);
        save_episode_as(store, episode_id_from_index(static_cast<size_t>(i)), ep, cfg);
        ++summary.episodes;
        summary.successes += ep.success ? 1 : 0;
    }
    rebuild_manifest(store, cfg);
    return summary;
}

} // namespace arp::sim
