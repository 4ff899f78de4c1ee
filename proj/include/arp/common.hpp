#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace arp {

namespace fs = std::filesystem;

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

[[noreturn]] inline void fail(const std::string& msg) { throw error(msg); }

// FNV-1a 64-bit, used for content hashes of checkpoints and stage states.
inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a64(const std::string& s, uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a64(s.data(), s.size(), h);
}

inline std::string to_hex(uint64_t v) {
    static const char* d = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = d[v & 0xf];
        v >>= 4;
    }
    return out;
}

std::vector<unsigned char> read_file_bytes(const fs::path& p);
void write_file_bytes(const fs::path& p, const void* data, size_t n);
std::string read_file_text(const fs::path& p);
void write_file_text(const fs::path& p, const std::string& text);

} // namespace arp
