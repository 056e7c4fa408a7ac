#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "occam/image.hpp"

namespace occam {

struct Pixel {
  int x = 0;
  int y = 0;
  bool operator==(const Pixel&) const = default;
};

// A set of pixels on a width x height grid. Storage covers only the tight
// bounding box, so many masks over one large image stay cheap.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height) : width_(width), height_(height) {
    if (width < 1 || height < 1)
      throw std::invalid_argument("mask dimensions must be >= 1");
  }

  // Builds from a full-frame buffer (nonzero = set).
  static BinaryMask from_dense(int width, int height,
                               std::span<const std::uint8_t> dense) {
    if (dense.size() != static_cast<std::size_t>(width) * height)
      throw std::invalid_argument("dense mask buffer has wrong length");
    BinaryMask m(width, height);
    BBox box{width, height, 0, 0};
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        if (dense[static_cast<std::size_t>(y) * width + x]) {
          box.x0 = std::min(box.x0, x);
          box.y0 = std::min(box.y0, y);
          box.x1 = std::max(box.x1, x + 1);
          box.y1 = std::max(box.y1, y + 1);
        }
    if (box.empty()) return m;
    m.box_ = box;
    m.bits_.assign(static_cast<std::size_t>(box.area()), 0);
    for (int y = box.y0; y < box.y1; ++y)
      for (int x = box.x0; x < box.x1; ++x)
        if (dense[static_cast<std::size_t>(y) * width + x]) {
          m.bits_[m.local(x, y)] = 1;
          ++m.area_;
        }
    return m;
  }

  static BinaryMask from_pixels(int width, int height,
                                std::span<const Pixel> pixels) {
    BinaryMask m(width, height);
    if (pixels.empty()) return m;
    BBox box{width, height, 0, 0};
    for (const auto& p : pixels) {
      if (p.x < 0 || p.y < 0 || p.x >= width || p.y >= height)
        throw std::invalid_argument("mask pixel outside grid");
      box.x0 = std::min(box.x0, p.x);
      box.y0 = std::min(box.y0, p.y);
      box.x1 = std::max(box.x1, p.x + 1);
      box.y1 = std::max(box.y1, p.y + 1);
    }
    m.box_ = box;
    m.bits_.assign(static_cast<std::size_t>(box.area()), 0);
    for (const auto& p : pixels) {
      auto& b = m.bits_[m.local(p.x, p.y)];
      if (!b) {
        b = 1;
        ++m.area_;
      }
    }
    return m;
  }

  // Every pixel of `rect` (clipped to the grid) set.
  static BinaryMask filled_rect(int width, int height, const BBox& rect) {
    BinaryMask m(width, height);
    const BBox r = intersect(rect, {0, 0, width, height});
    if (r.empty()) return m;
    m.box_ = r;
    m.bits_.assign(static_cast<std::size_t>(r.area()), 1);
    m.area_ = static_cast<std::size_t>(r.area());
    return m;
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t area() const { return area_; }
  bool empty() const { return area_ == 0; }
  // Tight bounding box; an empty box for an empty mask.
  const BBox& bbox() const { return box_; }

  bool test(int x, int y) const {
    if (!box_.contains(x, y)) return false;
    return bits_[local(x, y)] != 0;
  }

  std::vector<std::uint8_t> to_dense() const {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(width_) * height_,
                                  0);
    for (int y = box_.y0; y < box_.y1; ++y)
      for (int x = box_.x0; x < box_.x1; ++x)
        if (bits_[local(x, y)]) out[static_cast<std::size_t>(y) * width_ + x] = 1;
    return out;
  }

  std::vector<Pixel> pixels() const {
    std::vector<Pixel> out;
    out.reserve(area_);
    for (int y = box_.y0; y < box_.y1; ++y)
      for (int x = box_.x0; x < box_.x1; ++x)
        if (bits_[local(x, y)]) out.push_back({x, y});
    return out;
  }

  // Moves the mask by (dx, dy) onto a new grid; pixels leaving it are dropped.
  BinaryMask translated(int dx, int dy, int new_width, int new_height) const {
    std::vector<Pixel> moved;
    moved.reserve(area_);
    for (const auto& p : pixels()) {
      const int x = p.x + dx;
      const int y = p.y + dy;
      if (x >= 0 && y >= 0 && x < new_width && y < new_height)
        moved.push_back({x, y});
    }
    return from_pixels(new_width, new_height, moved);
  }

  bool operator==(const BinaryMask& o) const {
    return width_ == o.width_ && height_ == o.height_ && area_ == o.area_ &&
           box_ == o.box_ && bits_ == o.bits_;
  }

 private:
  std::size_t local(int x, int y) const {
    return static_cast<std::size_t>(y - box_.y0) * box_.width() + (x - box_.x0);
  }

  int width_ = 0;
  int height_ = 0;
  BBox box_{};
  std::size_t area_ = 0;
  std::vector<std::uint8_t> bits_;  // box-local row-major
};

inline void require_same_grid(const BinaryMask& a, const BinaryMask& b) {
  if (a.width() != b.width() || a.height() != b.height())
    throw std::invalid_argument(
        "mask dimension mismatch: " + std::to_string(a.width()) + "x" +
        std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
        std::to_string(b.height()));
}

inline std::size_t intersection_area(const BinaryMask& a, const BinaryMask& b) {
  require_same_grid(a, b);
  const BBox overlap = intersect(a.bbox(), b.bbox());
  std::size_t n = 0;
  for (int y = overlap.y0; y < overlap.y1; ++y)
    for (int x = overlap.x0; x < overlap.x1; ++x)
      if (a.test(x, y) && b.test(x, y)) ++n;
  return n;
}

// |a & b| / |a | b|, 0 for an empty union.
inline double iou(const BinaryMask& a, const BinaryMask& b) {
  const std::size_t inter = intersection_area(a, b);
  const std::size_t uni = a.area() + b.area() - inter;
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// Components use 8-connectivity.
inline constexpr int kConnectivity = 8;

// Maximal 8-connected components, largest first; equal areas are ordered by
// (bbox y0, bbox x0) then by the first pixel in raster order.
inline std::vector<BinaryMask> connected_components(const BinaryMask& m) {
  struct Found {
    std::vector<Pixel> pixels;
    BBox box;
    Pixel first;
  };
  std::vector<Found> found;
  if (m.empty()) return {};

  const BBox box = m.bbox();
  const int bw = box.width();
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(box.area()), 0);
  auto idx = [&](int x, int y) {
    return static_cast<std::size_t>(y - box.y0) * bw + (x - box.x0);
  };

  std::vector<Pixel> stack;
  for (int y = box.y0; y < box.y1; ++y) {
    for (int x = box.x0; x < box.x1; ++x) {
      if (!m.test(x, y) || seen[idx(x, y)]) continue;
      Found comp{{}, {x, y, x + 1, y + 1}, {x, y}};
      seen[idx(x, y)] = 1;
      stack.push_back({x, y});
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        comp.pixels.push_back(p);
        comp.box.x0 = std::min(comp.box.x0, p.x);
        comp.box.y0 = std::min(comp.box.y0, p.y);
        comp.box.x1 = std::max(comp.box.x1, p.x + 1);
        comp.box.y1 = std::max(comp.box.y1, p.y + 1);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = p.x + dx;
            const int ny = p.y + dy;
            if (!box.contains(nx, ny) || seen[idx(nx, ny)] || !m.test(nx, ny))
              continue;
            seen[idx(nx, ny)] = 1;
            stack.push_back({nx, ny});
          }
      }
      found.push_back(std::move(comp));
    }
  }

  std::stable_sort(found.begin(), found.end(),
                   [](const Found& a, const Found& b) {
                     if (a.pixels.size() != b.pixels.size())
                       return a.pixels.size() > b.pixels.size();
                     if (a.box.y0 != b.box.y0) return a.box.y0 < b.box.y0;
                     if (a.box.x0 != b.box.x0) return a.box.x0 < b.box.x0;
                     if (a.first.y != b.first.y) return a.first.y < b.first.y;
                     return a.first.x < b.first.x;
                   });

  std::vector<BinaryMask> out;
  out.reserve(found.size());
  for (const auto& f : found)
    out.push_back(BinaryMask::from_pixels(m.width(), m.height(), f.pixels));
  return out;
}

}  // namespace occam
