#pragma once

#include <string>
#include <vector>

#include "occam/evaluation.hpp"
#include "occam/image.hpp"

// Procedural disk scenes with exact center annotations.

namespace occam::synthetic {

struct Disk {
  int cx = 0;
  int cy = 0;
  int radius = 1;
  Rgb color{255, 0, 0};
  std::string label = "red";
};

struct Scene {
  Image image;
  GroundTruth gt;
};

inline constexpr Rgb kRed{220, 30, 30};
inline constexpr Rgb kBlue{30, 60, 220};

inline Scene render(int width, int height, const std::vector<Disk>& disks, Rgb background = {0, 0, 0}) {
  Scene s{Image(width, height, background), {}};
  for (const auto& d : disks) {
    for (int y = d.cy - d.radius; y <= d.cy + d.radius; ++y)
      for (int x = d.cx - d.radius; x <= d.cx + d.radius; ++x) {
        if (x < 0 || y < 0 || x >= width || y >= height) continue;
        const int dx = x - d.cx, dy = y - d.cy;
        if (dx * dx + dy * dy <= d.radius * d.radius) s.image.set(x, y, d.color);
      }
    auto it = std::find_if(s.gt.classes.begin(), s.gt.classes.end(),
                           [&](const ClassAnnotation& c) { return c.label == d.label; });
    if (it == s.gt.classes.end()) {
      s.gt.classes.push_back({d.label, {}, {}});
      it = std::prev(s.gt.classes.end());
    }
    it->points.push_back({d.cx + 0.5, d.cy + 0.5});
  }
  return s;
}

// `red` red and `blue` blue disks of radius 10 on a 40-pixel lattice whose
// centers coincide with 10-pixel seed-grid points.
inline Scene two_color_scene(int red = 12, int blue = 7) {
  const int n = red + blue;
  const int cols = 5;
  const int rows = (n + cols - 1) / cols;
  std::vector<Disk> disks;
  for (int i = 0; i < n; ++i) {
    Disk d;
    d.cx = 25 + 40 * (i % cols);
    d.cy = 25 + 40 * (i / cols);
    d.radius = 10;
    if (i < red) {
      d.color = kRed;
      d.label = "red";
    } else {
      d.color = kBlue;
      d.label = "blue";
    }
    disks.push_back(d);
  }
  return render(40 * cols + 10, 40 * rows + 10, disks);
}

// 40 radius-3 disks on a 300x300 canvas, five per 3x3 tile in eight tiles,
// none crossing a tile border. Each covers ~0.03% of the image but ~0.3% of
// its tile.
inline Scene tiny_disk_scene() {
  static constexpr int kLocal[5][2] = {{25, 25}, {75, 25}, {25, 75}, {75, 75}, {45, 55}};
  std::vector<Disk> disks;
  for (int tile = 0; tile < 8; ++tile) {
    const int ox = 100 * (tile % 3);
    const int oy = 100 * (tile / 3);
    for (const auto& p : kLocal) disks.push_back({ox + p[0], oy + p[1], 3, kRed, "red"});
  }
  return render(300, 300, disks);
}

}  // namespace occam::synthetic
