#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace tetrad::ppm {

// 8-bit RGB raster, row-major, 3 bytes per pixel.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3) {}

  std::uint8_t* pixel(int x, int y) {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  const std::uint8_t* pixel(int x, int y) const {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

// Binary P6 with maxval <= 255. Throws IoError when the file cannot be
// opened, FormatError when it is not a valid P6 raster.
Image read(const std::filesystem::path& path);

// Writes "P6\n<w> <h>\n255\n" followed by the raster. Throws IoError.
void write(const std::filesystem::path& path, const Image& image);

}  // namespace tetrad::ppm
