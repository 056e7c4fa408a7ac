#pragma once

#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "occam/codec.hpp"
#include "occam/error.hpp"
#include "occam/image.hpp"
#include "occam/mask.hpp"
#include "occam/rle.hpp"

namespace occam {

struct SeedPoint {
  int x = 0;
  int y = 0;
  bool operator==(const SeedPoint&) const = default;
};

inline constexpr int kMaxMasksPerPoint = 3;

namespace detail {

inline std::vector<int> grid_axis(int extent, int spacing) {
  // An axis shorter than the spacing gets one prompt at its center.
  if (extent < spacing) return {extent / 2};
  std::vector<int> out;
  for (int c = spacing / 2; c < extent; c += spacing) out.push_back(c);
  return out;
}

}  // namespace detail

// Cell-center seed points every `spacing` pixels, row-major.
inline std::vector<SeedPoint> generate_seed_grid(int width, int height,
                                                 int spacing) {
  if (width < 1 || height < 1)
    throw std::invalid_argument("seed grid: image must be at least 1x1");
  if (spacing < 1) throw std::invalid_argument("seed grid: spacing must be >= 1");
  const auto xs = detail::grid_axis(width, spacing);
  const auto ys = detail::grid_axis(height, spacing);
  std::vector<SeedPoint> out;
  out.reserve(xs.size() * ys.size());
  for (int y : ys)
    for (int x : xs) out.push_back({x, y});
  return out;
}

// Short stable digest of a point list; keys precomputed mask files.
inline std::string grid_hash(std::span<const SeedPoint> points) {
  std::string text;
  text.reserve(points.size() * 8);
  for (const auto& p : points) {
    text += std::to_string(p.x);
    text += ',';
    text += std::to_string(p.y);
    text += ';';
  }
  return codec::sha256_hex(text).substr(0, 16);
}

struct RawMask {
  BinaryMask mask;
  double score = 0.0;
  int point_index = 0;  // index into the prompted point list
  int slot = 0;         // 0..2, order returned for that point
};

struct RawMaskSet {
  int width = 0;
  int height = 0;
  std::vector<RawMask> masks;
};

struct ProviderCaps {
  int max_masks_per_point = kMaxMasksPerPoint;
  bool batching = true;
  bool deterministic = true;
  // Calls must be funneled through a single lane.
  bool serialized = false;
};

class SegmentationProvider {
 public:
  virtual ~SegmentationProvider() = default;

  virtual ProviderCaps caps() const = 0;

  // Returns masks for the given points. `image_key` identifies the image for
  // providers that look results up (file provider); others ignore it.
  virtual std::vector<RawMask> segment_points(const Image& img,
                                              std::span<const SeedPoint> points,
                                              std::string_view image_key) = 0;

  std::mutex& lane() { return lane_; }

 private:
  std::mutex lane_;
};

// Prompts the provider and validates its answer against the request.
inline RawMaskSet segment(SegmentationProvider& provider, const Image& img,
                          std::span<const SeedPoint> points,
                          std::string_view image_key = {}) {
  RawMaskSet out{img.width(), img.height(), {}};
  if (points.empty()) return out;
  for (const auto& p : points)
    if (p.x < 0 || p.y < 0 || p.x >= img.width() || p.y >= img.height())
      throw std::invalid_argument("seed point outside image");

  const ProviderCaps caps = provider.caps();
  std::vector<RawMask> masks;
  if (caps.serialized) {
    std::lock_guard lock(provider.lane());
    masks = provider.segment_points(img, points, image_key);
  } else {
    masks = provider.segment_points(img, points, image_key);
  }

  std::vector<int> per_point(points.size(), 0);
  for (auto& m : masks) {
    if (m.point_index < 0 || static_cast<std::size_t>(m.point_index) >= points.size())
      throw ProviderError("provider returned a mask for unknown point index " +
                              std::to_string(m.point_index),
                          false);
    if (m.mask.width() != img.width() || m.mask.height() != img.height())
      throw ProviderError("provider mask dimensions do not match image", false);
    if (!(m.score >= 0.0 && m.score <= 1.0))
      throw ProviderError("provider mask score outside [0,1]", false);
    if (++per_point[m.point_index] > caps.max_masks_per_point)
      throw ProviderError("provider returned more than " +
                              std::to_string(caps.max_masks_per_point) +
                              " masks for one point",
                          false);
    m.slot = per_point[m.point_index] - 1;
  }
  out.masks = std::move(masks);
  return out;
}

// Shared parser for the `masks` array of wire responses and mask files:
// [{"point_index":int,"rle":{...},"score":float}, ...]
inline std::vector<RawMask> masks_from_json(const nlohmann::json& arr,
                                            int width, int height) {
  if (!arr.is_array()) throw ProviderError("masks must be an array", false);
  std::vector<RawMask> out;
  out.reserve(arr.size());
  try {
    for (const auto& item : arr) {
      RawMask m;
      m.point_index = item.at("point_index").get<int>();
      m.score = item.at("score").get<double>();
      const RleMask rle = rle_from_json(item.at("rle"));
      if (rle.width != width || rle.height != height)
        throw ProviderError("rle size does not match image", false);
      m.mask = rle_decode(rle);
      out.push_back(std::move(m));
    }
  } catch (const ProviderError&) {
    throw;
  } catch (const std::exception& e) {
    throw ProviderError(std::string("malformed masks payload: ") + e.what(),
                        false);
  }
  return out;
}

inline nlohmann::json masks_to_json(std::span<const RawMask> masks) {
  auto arr = nlohmann::json::array();
  for (const auto& m : masks)
    arr.push_back({{"point_index", m.point_index},
                   {"rle", rle_to_json(rle_encode(m.mask))},
                   {"score", m.score}});
  return arr;
}

}  // namespace occam
