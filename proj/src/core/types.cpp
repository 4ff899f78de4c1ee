#include "arp/types.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace arp {

// ---- file helpers (declared in common.hpp) ----

std::vector<unsigned char> read_file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) fail("cannot open file: " + p.string());
    in.seekg(0, std::ios::end);
    const std::streamoff n = in.tellg();
    in.seekg(0, std::ios::beg);
    std::vector<unsigned char> bytes(static_cast<size_t>(n));
    if (n > 0) in.read(reinterpret_cast<char*>(bytes.data()), n);
    if (!in) fail("cannot read file: " + p.string());
    return bytes;
}

void write_file_bytes(const fs::path& p, const void* data, size_t n) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) fail("cannot open file for writing: " + p.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out) fail("cannot write file: " + p.string());
}

std::string read_file_text(const fs::path& p) {
    const auto bytes = read_file_bytes(p);
    return std::string(bytes.begin(), bytes.end());
}

void write_file_text(const fs::path& p, const std::string& text) {
    write_file_bytes(p, text.data(), text.size());
}

// ---- frame helpers ----

bool Latent::all_finite() const {
    for (float x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

size_t PseudoMask::area() const {
    size_t n = 0;
    for (uint8_t b : m) n += b;
    return n;
}

Frame quantize_frame(const Frame& f) {
    Frame out(f.size);
    for (size_t i = 0; i < f.px.size(); ++i) {
        float v = f.px[i];
        if (v < 0.0f) v = 0.0f;
        if (v > 1.0f) v = 1.0f;
        out.px[i] = static_cast<float>(std::lround(v * 255.0f)) / 255.0f;
    }
    return out;
}

std::vector<uint8_t> frame_to_u8(const Frame& f) {
    std::vector<uint8_t> bytes(f.px.size());
    for (size_t i = 0; i < f.px.size(); ++i) {
        float v = f.px[i];
        if (v < 0.0f) v = 0.0f;
        if (v > 1.0f) v = 1.0f;
        bytes[i] = static_cast<uint8_t>(std::lround(v * 255.0f));
    }
    return bytes;
}

Frame frame_from_u8(const std::vector<uint8_t>& bytes, int size) {
    if (bytes.size() != static_cast<size_t>(size) * size * 3) {
        fail("frame_from_u8: byte count does not match frame size");
    }
    Frame f(size);
    for (size_t i = 0; i < bytes.size(); ++i) f.px[i] = static_cast<float>(bytes[i]) / 255.0f;
    return f;
}

double psnr(const Frame& a, const Frame& b) {
    if (a.size != b.size) fail("psnr: frame sizes differ");
    double mse = 0.0;
    for (size_t i = 0; i < a.px.size(); ++i) {
        const double d = static_cast<double>(a.px[i]) - static_cast<double>(b.px[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(a.px.size());
    if (mse <= 0.0) return 99.0;
    return 10.0 * std::log10(1.0 / mse);
}

void validate_episode(const Episode& ep, const Config& cfg) {
    if (static_cast<int>(ep.frames.size()) != cfg.horizon_H + 1) {
        fail("episode: expected " + std::to_string(cfg.horizon_H + 1) + " frames, got " +
             std::to_string(ep.frames.size()));
    }
    if (static_cast<int>(ep.actions.size()) != cfg.horizon_H) {
        fail("episode: expected " + std::to_string(cfg.horizon_H) + " actions, got " +
             std::to_string(ep.actions.size()));
    }
    for (const Frame& f : ep.frames) {
        if (f.size != cfg.image_size) fail("episode: frame size mismatch");
        for (float v : f.px) {
            if (!(v >= 0.0f && v <= 1.0f)) fail("episode: pixel outside [0,1]");
        }
    }
    for (const Action& a : ep.actions) {
        if (static_cast<int>(a.values.size()) != cfg.action_dim) {
            fail("episode: action dimensionality mismatch");
        }
        for (double v : a.values) {
            if (!(v >= -1.0 && v <= 1.0)) fail("episode: action component outside [-1,1]");
        }
    }
}

// ---- latent files ----

namespace {
constexpr char kLatentMagic[8] = {'A', 'R', 'P', 'L', 'A', 'T', '1', '\0'};
}

void save_latent(const fs::path& path, const Latent& z) {
    std::vector<uint8_t> out;
    out.insert(out.end(), kLatentMagic, kLatentMagic + 8);
    const uint32_t dims[2] = {static_cast<uint32_t>(z.spatial), static_cast<uint32_t>(z.channels)};
    out.insert(out.end(), reinterpret_cast<const uint8_t*>(dims),
               reinterpret_cast<const uint8_t*>(dims) + sizeof(dims));
    out.insert(out.end(), reinterpret_cast<const uint8_t*>(z.v.data()),
               reinterpret_cast<const uint8_t*>(z.v.data()) + z.v.size() * sizeof(float));
    write_file_bytes(path, out.data(), out.size());
}

Latent load_latent(const fs::path& path) {
    const auto bytes = read_file_bytes(path);
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kLatentMagic, 8) != 0) {
        fail("load_latent: bad header: " + path.string());
    }
    uint32_t dims[2];
    std::memcpy(dims, bytes.data() + 8, sizeof(dims));
    Latent z(static_cast<int>(dims[0]), static_cast<int>(dims[1]));
    if (bytes.size() != 16 + z.v.size() * sizeof(float)) {
        fail("load_latent: size mismatch: " + path.string());
    }
    std::memcpy(z.v.data(), bytes.data() + 16, z.v.size() * sizeof(float));
    return z;
}

} // namespace arp
