#pragma once

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "occam/mask.hpp"
#include "occam/prompting.hpp"

namespace occam {

struct FilterConfig {
  double iou_dup_threshold = 0.1;
  double max_area_frac = 0.5;
  int min_bbox_side = 2;

  void validate() const {
    if (!(iou_dup_threshold > 0.0 && iou_dup_threshold <= 1.0))
      throw std::invalid_argument("iou_dup_threshold must be in (0, 1]");
    if (!(max_area_frac > 0.0 && max_area_frac <= 1.0))
      throw std::invalid_argument("max_area_frac must be in (0, 1]");
    if (min_bbox_side < 1)
      throw std::invalid_argument("min_bbox_side must be >= 1");
  }
};

// A retained object mask with its provenance.
struct CandidateInstance {
  int id = 0;
  BinaryMask mask;
  BBox bbox;
  double score = 0.0;
  int point_index = 0;
  int slot = 0;
  std::string origin = "base";  // "base" or "tile:r,c"
};

struct ScoredMask {
  BinaryMask mask;
  double score = 0.0;
};

inline BinaryMask split_major_component(const BinaryMask& m) {
  if (m.empty()) throw std::invalid_argument("split_major_component: empty mask");
  auto comps = connected_components(m);
  return std::move(comps.front());
}

// Greedy scan over items already in priority order: an item is dropped when
// its IoU with any kept item exceeds `threshold`. Returns kept positions.
template <class Items, class MaskOf>
std::vector<std::size_t> greedy_keep(const Items& items, MaskOf mask_of,
                                     double threshold) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const BinaryMask& m = mask_of(items[i]);
    if (!kept.empty()) require_same_grid(m, mask_of(items[kept.front()]));
    bool duplicate = false;
    for (std::size_t k : kept) {
      if (iou(m, mask_of(items[k])) > threshold) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) kept.push_back(i);
  }
  return kept;
}

// Indices ordered by descending score, ties in insertion order.
template <class Items, class ScoreOf>
std::vector<std::size_t> score_order(const Items& items, ScoreOf score_of) {
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return score_of(items[a]) > score_of(items[b]);
  });
  return order;
}

inline std::vector<ScoredMask> dedup_masks(const std::vector<ScoredMask>& masks,
                                           const FilterConfig& cfg) {
  std::vector<const ScoredMask*> ordered;
  for (std::size_t i : score_order(masks, [](const ScoredMask& m) { return m.score; }))
    ordered.push_back(&masks[i]);
  const auto kept = greedy_keep(
      ordered, [](const ScoredMask* m) -> const BinaryMask& { return m->mask; },
      cfg.iou_dup_threshold);
  std::vector<ScoredMask> out;
  out.reserve(kept.size());
  for (std::size_t k : kept) out.push_back(*ordered[k]);
  return out;
}

inline bool passes_size_filters(const BinaryMask& m, const FilterConfig& cfg) {
  const double frame = static_cast<double>(m.width()) * m.height();
  if (static_cast<double>(m.area()) > cfg.max_area_frac * frame) return false;
  const BBox& b = m.bbox();
  return b.width() >= cfg.min_bbox_side && b.height() >= cfg.min_bbox_side;
}

// Greedy dedup over an already-prioritized candidate list, then the size
// filters; ids are reassigned in retention order.
inline std::vector<CandidateInstance> filter_candidates(
    std::vector<CandidateInstance> ordered, const FilterConfig& cfg) {
  const auto kept = greedy_keep(
      ordered,
      [](const CandidateInstance& c) -> const BinaryMask& { return c.mask; },
      cfg.iou_dup_threshold);
  std::vector<CandidateInstance> out;
  for (std::size_t k : kept) {
    if (!passes_size_filters(ordered[k].mask, cfg)) continue;
    out.push_back(std::move(ordered[k]));
    out.back().id = static_cast<int>(out.size()) - 1;
  }
  return out;
}

// Major component -> dedup -> area filter -> thin-box filter.
inline std::vector<CandidateInstance> postprocess(const RawMaskSet& raw,
                                                  const FilterConfig& cfg,
                                                  const std::string& origin = "base") {
  cfg.validate();
  std::vector<CandidateInstance> split;
  split.reserve(raw.masks.size());
  for (const auto& r : raw.masks) {
    if (r.mask.width() != raw.width || r.mask.height() != raw.height)
      throw std::invalid_argument("raw mask dimensions differ from image");
    if (r.mask.empty()) continue;
    CandidateInstance c;
    c.mask = split_major_component(r.mask);
    c.bbox = c.mask.bbox();
    c.score = r.score;
    c.point_index = r.point_index;
    c.slot = r.slot;
    c.origin = origin;
    split.push_back(std::move(c));
  }
  std::vector<CandidateInstance> ordered;
  ordered.reserve(split.size());
  for (std::size_t i :
       score_order(split, [](const CandidateInstance& c) { return c.score; }))
    ordered.push_back(std::move(split[i]));
  return filter_candidates(std::move(ordered), cfg);
}

// Mask processing disabled: every nonempty raw mask becomes a candidate.
inline std::vector<CandidateInstance> raw_candidates(const RawMaskSet& raw,
                                                     const std::string& origin = "base") {
  std::vector<CandidateInstance> out;
  for (const auto& r : raw.masks) {
    if (r.mask.empty()) continue;
    CandidateInstance c;
    c.id = static_cast<int>(out.size());
    c.mask = r.mask;
    c.bbox = r.mask.bbox();
    c.score = r.score;
    c.point_index = r.point_index;
    c.slot = r.slot;
    c.origin = origin;
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace occam
