#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "occam/prompting.hpp"

namespace occam {

struct MockOptions {
  Rgb background{0, 0, 0};
  // Regions smaller than this fraction of the prompted image are not
  // returned; emulates a segmenter that misses tiny objects at full scale.
  double min_visible_frac = 0.0;
  // Also emit the filled bbox and the whole foreground as slots 1 and 2.
  bool multimask = true;
};

// Analytic segmenter for synthetic scenes: a seed on a non-background pixel
// yields the 8-connected region of identical color around it.
class MockProvider final : public SegmentationProvider {
 public:
  explicit MockProvider(MockOptions opts = {}) : opts_(opts) {}

  ProviderCaps caps() const override {
    return {kMaxMasksPerPoint, true, true, false};
  }

  std::vector<RawMask> segment_points(const Image& img,
                                      std::span<const SeedPoint> points,
                                      std::string_view) override {
    const int w = img.width();
    const int h = img.height();
    const auto labels = label_regions(img);
    const double image_area = static_cast<double>(w) * h;

    std::map<int, BinaryMask> region_cache;
    std::optional<BinaryMask> foreground;
    std::vector<RawMask> out;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const int label =
          labels.ids[static_cast<std::size_t>(points[i].y) * w + points[i].x];
      if (label < 0) continue;
      if (labels.areas[label] < opts_.min_visible_frac * image_area) continue;

      auto it = region_cache.find(label);
      if (it == region_cache.end()) {
        std::vector<std::uint8_t> dense(static_cast<std::size_t>(w) * h, 0);
        for (std::size_t k = 0; k < dense.size(); ++k)
          dense[k] = labels.ids[k] == label;
        it = region_cache
                 .emplace(label, BinaryMask::from_dense(w, h, dense))
                 .first;
      }
      const int idx = static_cast<int>(i);
      out.push_back({it->second, 0.95, idx, 0});
      if (!opts_.multimask) continue;
      out.push_back(
          {BinaryMask::filled_rect(w, h, it->second.bbox()), 0.6, idx, 1});
      if (!foreground) {
        std::vector<std::uint8_t> dense(static_cast<std::size_t>(w) * h, 0);
        for (std::size_t k = 0; k < dense.size(); ++k)
          dense[k] = labels.ids[k] >= 0 &&
                     labels.areas[labels.ids[k]] >=
                         opts_.min_visible_frac * image_area;
        foreground = BinaryMask::from_dense(w, h, dense);
      }
      out.push_back({*foreground, 0.3, idx, 2});
    }
    return out;
  }

 private:
  struct Labels {
    std::vector<int> ids;  // -1 for background
    std::vector<double> areas;
  };

  Labels label_regions(const Image& img) const {
    const int w = img.width();
    const int h = img.height();
    Labels out{std::vector<int>(static_cast<std::size_t>(w) * h, -1), {}};
    std::vector<Pixel> stack;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto k = static_cast<std::size_t>(y) * w + x;
        if (out.ids[k] >= 0) continue;
        const Rgb color = img.at(x, y);
        if (color == opts_.background) continue;
        const int label = static_cast<int>(out.areas.size());
        double area = 0;
        out.ids[k] = label;
        stack.push_back({x, y});
        while (!stack.empty()) {
          const Pixel p = stack.back();
          stack.pop_back();
          ++area;
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const int nx = p.x + dx;
              const int ny = p.y + dy;
              if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
              const auto nk = static_cast<std::size_t>(ny) * w + nx;
              if (out.ids[nk] >= 0 || img.at(nx, ny) != color) continue;
              out.ids[nk] = label;
              stack.push_back({nx, ny});
            }
        }
        out.areas.push_back(area);
      }
    }
    return out;
  }

  MockOptions opts_;
};

}  // namespace occam
