#pragma once

#include <cstdint>
#include <vector>

#include "arp/common.hpp"

namespace arp {

// Minimal lossless 8-bit RGB PNG reader/writer (zlib-backed).
void write_png_rgb8(const fs::path& path, const std::vector<uint8_t>& rgb, int width, int height);
std::vector<uint8_t> read_png_rgb8(const fs::path& path, int& width, int& height);

} // namespace arp
