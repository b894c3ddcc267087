#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace rtk {

// 8-bit grayscale (channels == 1) or interleaved RGB (channels == 3) image.
struct Frame {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> data;

  static Frame filled(int width, int height, int channels, std::uint8_t value);

  std::uint8_t at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
                    static_cast<std::size_t>(channels) +
                static_cast<std::size_t>(c)];
  }
  std::uint8_t& at(int x, int y, int c = 0) {
    return data[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
                    static_cast<std::size_t>(channels) +
                static_cast<std::size_t>(c)];
  }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  void validate() const;
  bool operator==(const Frame&) const = default;
};

// Reads binary or ASCII PGM/PPM (maxval <= 255) or 8-bit PNG. PNG alpha is
// dropped and palette images are expanded. Throws InputError.
Frame read_frame(const std::filesystem::path& path);
// PGM for one channel, PPM for three.
void write_netpbm(const Frame& frame, const std::filesystem::path& path);
void write_png(const Frame& frame, const std::filesystem::path& path);

} // namespace rtk
