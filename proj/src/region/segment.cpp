#include "arp/region.hpp"

#include <cmath>

#include "arp/sim.hpp"

namespace arp::region {

MiningSource mining_source_from_string(const std::string& name) {
    if (name == "correlation") return MiningSource::correlation;
    if (name == "oracle") return MiningSource::oracle;
    if (name == "gt") return MiningSource::gt;
    fail("unknown mining source \"" + name + "\" (expected correlation, oracle or gt)");
}

std::string to_string(MiningSource src) {
    switch (src) {
        case MiningSource::correlation: return "correlation";
        case MiningSource::oracle: return "oracle";
        case MiningSource::gt: return "gt";
    }
    return "?";
}

namespace {

bool color_close(const Frame& f, int y, int x, const float* ref, float eps) {
    for (int c = 0; c < 3; ++c) {
        if (std::abs(f.at(y, x, c) - ref[c]) > eps) return false;
    }
    return true;
}

} // namespace

PseudoMask segment_from_prompts(const Frame& frame,
                                const std::vector<std::pair<double, double>>& prompts) {
    const int size = frame.size;
    PseudoMask mask(size);
    std::vector<int> stack;
    for (const auto& [px, py] : prompts) {
        if (px < 0 || px > size - 1 || py < 0 || py > size - 1) {
            fail("segment_from_prompts: prompt outside frame bounds");
        }
        const int sx = static_cast<int>(std::lround(px));
        const int sy = static_cast<int>(std::lround(py));
        if (mask.at(sy, sx)) continue;
        float seed[3];
        for (int c = 0; c < 3; ++c) seed[c] = frame.at(sy, sx, c);

        stack.clear();
        stack.push_back(sy * size + sx);
        mask.at(sy, sx) = 1;
        while (!stack.empty()) {
            const int cur = stack.back();
            stack.pop_back();
            const int cy = cur / size, cx = cur % size;
            const int nb[4][2] = {{cx - 1, cy}, {cx + 1, cy}, {cx, cy - 1}, {cx, cy + 1}};
            for (const auto& [nx, ny] : nb) {
                if (nx < 0 || nx >= size || ny < 0 || ny >= size) continue;
                if (mask.at(ny, nx)) continue;
                if (!color_close(frame, ny, nx, seed, kFloodEps)) continue;
                mask.at(ny, nx) = 1;
                stack.push_back(ny * size + nx);
            }
        }
    }
    return mask;
}

PseudoMask filter_components(const PseudoMask& mask, const Frame& frame) {
    const int size = mask.size;
    if (frame.size != size) fail("filter_components: mask/frame size mismatch");
    PseudoMask out(size);
    std::vector<int> label(static_cast<size_t>(size) * size, -1);
    std::vector<int> stack;
    int next_label = 0;

    for (int y0 = 0; y0 < size; ++y0) {
        for (int x0 = 0; x0 < size; ++x0) {
            if (!mask.at(y0, x0) || label[y0 * size + x0] >= 0) continue;
            // flood one 4-connected component, collecting area and mean colour
            const int comp = next_label++;
            stack.clear();
            stack.push_back(y0 * size + x0);
            label[y0 * size + x0] = comp;
            std::vector<int> pixels;
            double mean[3] = {0, 0, 0};
            while (!stack.empty()) {
                const int cur = stack.back();
                stack.pop_back();
                pixels.push_back(cur);
                const int cy = cur / size, cx = cur % size;
                for (int c = 0; c < 3; ++c) mean[c] += frame.at(cy, cx, c);
                const int nb[4][2] = {{cx - 1, cy}, {cx + 1, cy}, {cx, cy - 1}, {cx, cy + 1}};
                for (const auto& [nx, ny] : nb) {
                    if (nx < 0 || nx >= size || ny < 0 || ny >= size) continue;
                    if (!mask.at(ny, nx) || label[ny * size + nx] >= 0) continue;
                    label[ny * size + nx] = comp;
                    stack.push_back(ny * size + nx);
                }
            }
            for (int c = 0; c < 3; ++c) mean[c] /= static_cast<double>(pixels.size());
            const bool arm_colored =
                std::abs(mean[0] - sim::arm_color()[0]) <= kArmColorEps &&
                std::abs(mean[1] - sim::arm_color()[1]) <= kArmColorEps &&
                std::abs(mean[2] - sim::arm_color()[2]) <= kArmColorEps;
            if (arm_colored || static_cast<int>(pixels.size()) < kMinArea) continue;
            for (int p : pixels) out.m[p] = 1;
        }
    }
    return out;
}

Frame compose_active_region(const Frame& x0, const PseudoMask& mask) {
    if (x0.size != mask.size) fail("compose_active_region: shape mismatch");
    Frame o(x0.size);
    for (int y = 0; y < x0.size; ++y) {
        for (int x = 0; x < x0.size; ++x) {
            const bool on = mask.at(y, x) != 0;
            for (int c = 0; c < 3; ++c) {
                o.at(y, x, c) = on ? x0.at(y, x, c) : 1.0f;
            }
        }
    }
    return o;
}

double mask_iou(const PseudoMask& a, const PseudoMask& b) {
    if (a.size != b.size) fail("mask_iou: size mismatch");
    size_t inter = 0, uni = 0;
    for (size_t i = 0; i < a.m.size(); ++i) {
        const bool pa = a.m[i] != 0, pb = b.m[i] != 0;
        inter += (pa && pb) ? 1 : 0;
        uni += (pa || pb) ? 1 : 0;
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

} // namespace arp::region
