#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "occam/maskproc.hpp"
#include "occam/prompting.hpp"

namespace occam {

struct MultiscaleConfig {
  int min_candidates = 10;  // refine when the base pass finds fewer
  int max_depth = 1;        // 0 disables refinement

  void validate() const {
    if (min_candidates < 1) throw std::invalid_argument("min_candidates must be >= 1");
    if (max_depth < 0) throw std::invalid_argument("max_depth must be >= 0");
  }
};

struct CandidateConfig {
  int grid_spacing = 10;
  FilterConfig filter;
  MultiscaleConfig multiscale;
  bool mask_processing = true;
};

struct CandidateResult {
  std::vector<CandidateInstance> candidates;
  std::size_t base_count = 0;
  bool refined = false;  // tile candidates were accumulated
  std::vector<std::string> warnings;
};

// Non-overlapping 3x3 tiling; the last row/column absorbs the remainder.
// Empty when either side is shorter than 3 pixels.
inline std::vector<BBox> tile_grid(int width, int height) {
  const int tw = width / 3;
  const int th = height / 3;
  if (tw < 1 || th < 1) return {};
  std::vector<BBox> tiles;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      tiles.push_back({c * tw, r * th, c == 2 ? width : (c + 1) * tw,
                       r == 2 ? height : (r + 1) * th});
  return tiles;
}

// Grid -> segment -> postprocess on one image, no refinement.
inline std::vector<CandidateInstance> base_candidates(
    const Image& img, SegmentationProvider& provider, const CandidateConfig& cfg,
    const std::string& image_key, const std::string& origin = "base") {
  const auto points = generate_seed_grid(img.width(), img.height(), cfg.grid_spacing);
  const RawMaskSet raw = segment(provider, img, points, image_key);
  return cfg.mask_processing ? postprocess(raw, cfg.filter, origin)
                             : raw_candidates(raw, origin);
}

namespace detail {

inline CandidateResult refine_at(const Image& img, SegmentationProvider& provider,
                                 const CandidateConfig& cfg,
                                 const std::string& image_key,
                                 const std::string& origin, int depth) {
  CandidateResult result;
  result.candidates = base_candidates(img, provider, cfg, image_key, origin);
  result.base_count = result.candidates.size();
  const auto& ms = cfg.multiscale;
  if (result.candidates.size() >= static_cast<std::size_t>(ms.min_candidates) ||
      depth >= ms.max_depth)
    return result;
  const auto tiles = tile_grid(img.width(), img.height());
  if (tiles.empty()) return result;

  std::vector<CandidateInstance> gathered;
  try {
    for (std::size_t t = 0; t < tiles.size(); ++t) {
      const BBox& tile = tiles[t];
      const std::string tag =
          "tile:" + std::to_string(t / 3) + "," + std::to_string(t % 3);
      const std::string sub_origin = origin == "base" ? tag : origin + "/" + tag;
      CandidateResult sub = refine_at(crop(img, tile), provider, cfg,
                                      image_key + "@" + tag, sub_origin, depth + 1);
      for (auto& w : sub.warnings) result.warnings.push_back(std::move(w));
      for (auto& c : sub.candidates) {
        c.mask = c.mask.translated(tile.x0, tile.y0, img.width(), img.height());
        c.bbox = c.mask.bbox();
        gathered.push_back(std::move(c));
      }
    }
  } catch (const std::exception& e) {
    result.warnings.push_back("multiscale refinement aborted for '" + image_key +
                              "': " + e.what());
    return result;
  }

  // Base candidates lead the merge so none of them can be displaced.
  std::vector<CandidateInstance> merged = result.candidates;
  for (auto& c : gathered) merged.push_back(std::move(c));
  if (cfg.mask_processing) {
    merged = filter_candidates(std::move(merged), cfg.filter);
  } else {
    for (std::size_t i = 0; i < merged.size(); ++i) merged[i].id = static_cast<int>(i);
  }
  // No additional objects: the scene genuinely holds few of them.
  if (merged.size() <= result.base_count) return result;
  result.candidates = std::move(merged);
  result.refined = true;
  return result;
}

}  // namespace detail

inline CandidateResult refine_multiscale(const Image& img,
                                         SegmentationProvider& provider,
                                         const CandidateConfig& cfg,
                                         const std::string& image_key = "image") {
  cfg.filter.validate();
  cfg.multiscale.validate();
  return detail::refine_at(img, provider, cfg, image_key, "base", 0);
}

}  // namespace occam
