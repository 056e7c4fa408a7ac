#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "occam/mask.hpp"

namespace occam {

// Column-major run lengths, alternating background/foreground and starting
// with background (a leading 0 when pixel (0,0) is set).
struct RleMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> counts;
  bool operator==(const RleMask&) const = default;
};

inline RleMask rle_encode(const BinaryMask& m) {
  RleMask r{m.width(), m.height(), {}};
  const auto total = static_cast<std::uint64_t>(m.width()) * m.height();
  const auto h = static_cast<std::uint64_t>(m.height());
  const BBox& box = m.bbox();
  std::uint64_t prev_end = 0;  // end of the last emitted foreground run
  std::uint64_t run_begin = 0;
  std::uint64_t run_end = 0;
  bool in_run = false;
  auto emit = [&] {
    r.counts.push_back(static_cast<std::uint32_t>(run_begin - prev_end));
    r.counts.push_back(static_cast<std::uint32_t>(run_end - run_begin));
    prev_end = run_end;
  };
  for (int x = box.x0; x < box.x1; ++x) {
    for (int y = box.y0; y < box.y1; ++y) {
      if (!m.test(x, y)) continue;
      const std::uint64_t pos = static_cast<std::uint64_t>(x) * h + y;
      if (in_run && pos == run_end) {
        ++run_end;
        continue;
      }
      if (in_run) emit();
      run_begin = pos;
      run_end = pos + 1;
      in_run = true;
    }
  }
  if (in_run) emit();
  if (prev_end < total || r.counts.empty())
    r.counts.push_back(static_cast<std::uint32_t>(total - prev_end));
  return r;
}

inline BinaryMask rle_decode(const RleMask& r) {
  if (r.width < 1 || r.height < 1)
    throw std::invalid_argument("rle: dimensions must be >= 1");
  const auto total = static_cast<std::uint64_t>(r.width) * r.height;
  std::uint64_t sum = 0;
  for (auto c : r.counts) sum += c;
  if (sum != total)
    throw std::invalid_argument("rle: run lengths sum to " +
                                std::to_string(sum) + ", expected " +
                                std::to_string(total));
  std::vector<Pixel> px;
  std::uint64_t pos = 0;
  for (std::size_t i = 0; i < r.counts.size(); ++i) {
    if (i % 2 == 1) {
      for (std::uint64_t k = pos; k < pos + r.counts[i]; ++k)
        px.push_back({static_cast<int>(k / r.height),
                      static_cast<int>(k % r.height)});
    }
    pos += r.counts[i];
  }
  return BinaryMask::from_pixels(r.width, r.height, px);
}

// {"size":[H,W],"counts":[...]}
inline nlohmann::json rle_to_json(const RleMask& r) {
  return {{"size", {r.height, r.width}}, {"counts", r.counts}};
}

inline RleMask rle_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("size") || !j.contains("counts"))
    throw std::invalid_argument("rle: expected object with size and counts");
  const auto& size = j.at("size");
  if (!size.is_array() || size.size() != 2)
    throw std::invalid_argument("rle: size must be [H,W]");
  RleMask r;
  r.height = size[0].get<int>();
  r.width = size[1].get<int>();
  if (!j.at("counts").is_array())
    throw std::invalid_argument("rle: counts must be an integer array");
  for (const auto& c : j.at("counts")) {
    if (!c.is_number_integer() || c.get<long long>() < 0)
      throw std::invalid_argument("rle: counts must be non-negative integers");
    r.counts.push_back(c.get<std::uint32_t>());
  }
  return r;
}

}  // namespace occam
