#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "layoutforge/error.hpp"
#include "layoutforge/layout.hpp"

namespace layoutforge {

/// Interleaved RGB image, channels in [0, 1], row-major from the top-left.
struct RasterImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;  // width * height * 3

  RasterImage() = default;
  RasterImage(int w, int h, double fill = 1.0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, fill) {}

  [[nodiscard]] double& at(int x, int y, int c) {
    return pixels[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3 +
                  static_cast<std::size_t>(c)];
  }
  [[nodiscard]] double at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3 +
                  static_cast<std::size_t>(c)];
  }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;
};

/// True when the center of pixel (x, y) lies in the component's box
/// (half-open on the right/bottom edges).
inline bool covers_pixel(const Component& c, int x, int y, int width, int height) {
  const double u = (x + 0.5) / width;
  const double v = (y + 0.5) / height;
  return u >= c.left() && u < c.right() && v >= c.top() && v < c.bottom();
}

/// White canvas, then each visible component as a filled rectangle in list order.
inline RasterImage rasterize(const Layout& layout) {
  RasterImage img(layout.canvas_width, layout.canvas_height, 1.0);
  const int W = img.width;
  const int H = img.height;
  for (const auto& c : layout.components) {
    if (!c.visible || c.w <= 0.0 || c.h <= 0.0) continue;
    const int x0 = std::clamp(static_cast<int>(std::floor(c.left() * W)) - 1, 0, W);
    const int x1 = std::clamp(static_cast<int>(std::ceil(c.right() * W)) + 1, 0, W);
    const int y0 = std::clamp(static_cast<int>(std::floor(c.top() * H)) - 1, 0, H);
    const int y1 = std::clamp(static_cast<int>(std::ceil(c.bottom() * H)) + 1, 0, H);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        if (!covers_pixel(c, x, y, W, H)) continue;
        img.at(x, y, 0) = c.color.r;
        img.at(x, y, 1) = c.color.g;
        img.at(x, y, 2) = c.color.b;
      }
    }
  }
  return img;
}

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
}

/// Binary PPM (P6), 8 bits per channel.
inline std::string encode_ppm(const RasterImage& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.reserve(out.size() + img.pixels.size());
  for (double v : img.pixels) out.push_back(static_cast<char>(to_byte(v)));
  return out;
}

inline void write_ppm(const RasterImage& img, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "' for writing", "raster");
  const auto bytes = encode_ppm(img);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace layoutforge
