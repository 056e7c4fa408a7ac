#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace occam {

using Rgb = std::array<std::uint8_t, 3>;

// Axis-aligned box, inclusive-exclusive: [x0, x1) x [y0, y1).
struct BBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  long long area() const {
    return empty() ? 0 : static_cast<long long>(width()) * height();
  }
  bool contains(int x, int y) const {
    return x >= x0 && x < x1 && y >= y0 && y < y1;
  }
  bool operator==(const BBox&) const = default;
};

inline BBox intersect(const BBox& a, const BBox& b) {
  BBox r{std::max(a.x0, b.x0), std::max(a.y0, b.y0), std::min(a.x1, b.x1),
         std::min(a.y1, b.y1)};
  if (r.empty()) return {};
  return r;
}

// Row-major interleaved RGB8 raster.
class Image {
 public:
  Image() = default;
  Image(int width, int height) : Image(width, height, Rgb{0, 0, 0}) {}
  Image(int width, int height, Rgb fill) : width_(width), height_(height) {
    if (width < 1 || height < 1)
      throw std::invalid_argument("image dimensions must be >= 1, got " +
                                  std::to_string(width) + "x" +
                                  std::to_string(height));
    pixels_.resize(static_cast<std::size_t>(width) * height * 3);
    for (std::size_t i = 0; i < pixels_.size(); i += 3) {
      pixels_[i] = fill[0];
      pixels_[i + 1] = fill[1];
      pixels_[i + 2] = fill[2];
    }
  }
  Image(int width, int height, std::vector<std::uint8_t> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width < 1 || height < 1)
      throw std::invalid_argument("image dimensions must be >= 1");
    if (pixels_.size() != static_cast<std::size_t>(width) * height * 3)
      throw std::invalid_argument("pixel buffer length != width*height*3");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }
  BBox frame() const { return {0, 0, width_, height_}; }

  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::span<std::uint8_t> pixels() { return pixels_; }

  Rgb at(int x, int y) const {
    const auto* p = &pixels_[offset(x, y)];
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, Rgb c) {
    auto* p = &pixels_[offset(x, y)];
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }
  std::uint8_t channel(int x, int y, int c) const {
    return pixels_[offset(x, y) + c];
  }

  bool operator==(const Image&) const = default;

 private:
  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

// Copy of the region `box` (must lie inside img).
inline Image crop(const Image& img, const BBox& box) {
  if (box.empty() || box.x0 < 0 || box.y0 < 0 || box.x1 > img.width() ||
      box.y1 > img.height())
    throw std::invalid_argument("crop box outside image");
  Image out(box.width(), box.height());
  const auto row_bytes = static_cast<std::size_t>(box.width()) * 3;
  for (int y = 0; y < box.height(); ++y) {
    const auto* src =
        img.pixels().data() +
        (static_cast<std::size_t>(box.y0 + y) * img.width() + box.x0) * 3;
    std::copy_n(src, row_bytes,
                out.pixels().data() + static_cast<std::size_t>(y) * row_bytes);
  }
  return out;
}

// Copies src into dst with its top-left at (x, y); pixels falling outside dst
// are dropped.
inline void paste(Image& dst, const Image& src, int x, int y) {
  for (int sy = 0; sy < src.height(); ++sy) {
    const int dy = y + sy;
    if (dy < 0 || dy >= dst.height()) continue;
    for (int sx = 0; sx < src.width(); ++sx) {
      const int dx = x + sx;
      if (dx < 0 || dx >= dst.width()) continue;
      dst.set(dx, dy, src.at(sx, sy));
    }
  }
}

namespace detail {

inline int round_half_up(double v) {
  return static_cast<int>(std::floor(v + 0.5));
}

}  // namespace detail

// Bilinear resample of a whole image to out_w x out_h (pixel-center aligned).
inline Image resize_bilinear(const Image& src, int out_w, int out_h) {
  Image out(out_w, out_h);
  if (out_w == src.width() && out_h == src.height()) return src;
  const double sx = static_cast<double>(src.width()) / out_w;
  const double sy = static_cast<double>(src.height()) / out_h;
  for (int oy = 0; oy < out_h; ++oy) {
    double fy = (oy + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(src.height() - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const double wy = fy - y0;
    for (int ox = 0; ox < out_w; ++ox) {
      double fx = (ox + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(src.width() - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const double wx = fx - x0;
      Rgb px{};
      for (int c = 0; c < 3; ++c) {
        const double top = src.channel(x0, y0, c) * (1 - wx) +
                           src.channel(x1, y0, c) * wx;
        const double bottom = src.channel(x0, y1, c) * (1 - wx) +
                              src.channel(x1, y1, c) * wx;
        px[c] = static_cast<std::uint8_t>(
            std::clamp(detail::round_half_up(top * (1 - wy) + bottom * wy), 0,
                       255));
      }
      out.set(ox, oy, px);
    }
  }
  return out;
}

// Size the region `box` occupies after aspect-preserving scaling so that its
// longer side equals `target`. Half-up rounding, clamped to [1, target].
inline std::pair<int, int> scaled_extent(const BBox& box, int target) {
  const double s =
      static_cast<double>(target) / std::max(box.width(), box.height());
  const int w = std::clamp(detail::round_half_up(s * box.width()), 1, target);
  const int h = std::clamp(detail::round_half_up(s * box.height()), 1, target);
  return {w, h};
}

// Scales the `box` region of img to fit a target x target canvas preserving
// aspect ratio, anchored top-left; the residual canvas is zero.
inline Image crop_and_pad(const Image& img, const BBox& box, int target) {
  if (target < 1) throw std::invalid_argument("crop target must be >= 1");
  if (box.empty()) throw std::invalid_argument("degenerate crop box");
  const Image region = crop(img, box);
  const auto [w, h] = scaled_extent(box, target);
  const Image scaled = resize_bilinear(region, w, h);
  Image canvas(target, target);
  paste(canvas, scaled, 0, 0);
  return canvas;
}

}  // namespace occam
