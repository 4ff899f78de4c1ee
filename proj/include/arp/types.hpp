#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "arp/common.hpp"
#include "arp/config.hpp"

namespace arp {

// Square RGB frame, HWC layout, values in [0,1].
struct Frame {
    int size = 0;
    std::vector<float> px;

    Frame() = default;
    explicit Frame(int s) : size(s), px(static_cast<size_t>(s) * s * 3, 0.0f) {}

    float& at(int y, int x, int c) { return px[(static_cast<size_t>(y) * size + x) * 3 + c]; }
    float at(int y, int x, int c) const { return px[(static_cast<size_t>(y) * size + x) * 3 + c]; }
};

// Encoded representation of a frame or active-region frame, CHW layout.
struct Latent {
    int spatial = 0;
    int channels = 0;
    std::vector<float> v;

    Latent() = default;
    Latent(int s, int c) : spatial(s), channels(c), v(static_cast<size_t>(c) * s * s, 0.0f) {}

    float& at(int c, int y, int x) { return v[(static_cast<size_t>(c) * spatial + y) * spatial + x]; }
    float at(int c, int y, int x) const {
        return v[(static_cast<size_t>(c) * spatial + y) * spatial + x];
    }
    bool all_finite() const;
};

// Normalized workspace action; at the default action_dim = 4 the components
// are (pick_x, pick_y, place_x, place_y), each in [-1, 1].
struct Action {
    std::vector<double> values;

    Action() = default;
    explicit Action(int dim) : values(dim, 0.0) {}
};

struct TaskText {
    int template_id = 0;
    int color = 0;       // slot fillers, indices into the palette/shape tables
    int shape = 0;
    int zone_color = 0;
    std::string text;
    std::vector<int> token_ids;
};

struct Episode {
    std::vector<Frame> frames;   // H+1 frames
    std::vector<Action> actions; // H actions
    TaskText task;
    bool success = false;
    uint64_t seed = 0;
};

// Binary mask over the initial frame marking the mined active region.
struct PseudoMask {
    int size = 0;
    std::vector<uint8_t> m;

    PseudoMask() = default;
    explicit PseudoMask(int s) : size(s), m(static_cast<size_t>(s) * s, 0) {}

    uint8_t& at(int y, int x) { return m[static_cast<size_t>(y) * size + x]; }
    uint8_t at(int y, int x) const { return m[static_cast<size_t>(y) * size + x]; }
    size_t area() const;
};

// ---- frame helpers ----

// quantize to the 8-bit grid the episode store uses (round(v*255)/255)
Frame quantize_frame(const Frame& f);
std::vector<uint8_t> frame_to_u8(const Frame& f);
Frame frame_from_u8(const std::vector<uint8_t>& bytes, int size);
double psnr(const Frame& a, const Frame& b);

void validate_episode(const Episode& ep, const Config& cfg);

// raw little-endian float32 latent file with a shape header
void save_latent(const fs::path& path, const Latent& z);
Latent load_latent(const fs::path& path);

} // namespace arp
