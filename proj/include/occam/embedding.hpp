#pragma once

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "occam/codec.hpp"
#include "occam/error.hpp"
#include "occam/image.hpp"
#include "occam/maskproc.hpp"

namespace occam {

struct FeatureVector {
  int candidate_id = 0;
  std::vector<double> values;
};

// Masks out everything but the candidate inside its tight box, then scales the
// box into a zero-padded target x target canvas.
inline Image prepare_crop(const Image& img, const CandidateInstance& cand, int target) {
  if (cand.mask.width() != img.width() || cand.mask.height() != img.height())
    throw std::invalid_argument("candidate mask does not belong to image");
  const BBox& box = cand.bbox;
  Image region = crop(img, box);
  for (int y = box.y0; y < box.y1; ++y)
    for (int x = box.x0; x < box.x1; ++x)
      if (!cand.mask.test(x, y)) region.set(x - box.x0, y - box.y0, {0, 0, 0});
  return crop_and_pad(region, region.frame(), target);
}

struct EmbedderInfo {
  int dimension = 0;
  // Per-channel normalization applied by the embedder itself before the
  // model; raw RGB crops are passed in.
  std::array<double, 3> mean{0, 0, 0};
  std::array<double, 3> stddev{1, 1, 1};
  bool serialized = false;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual EmbedderInfo info() const = 0;
  virtual std::vector<double> embed_crop(const Image& crop) = 0;
  std::mutex& lane() { return lane_; }

 private:
  std::mutex lane_;
};

inline FeatureVector embed(Embedder& e, const Image& crop, int candidate_id = 0) {
  if (crop.width() != crop.height())
    throw std::invalid_argument("embed: crop must be square");
  const EmbedderInfo info = e.info();
  std::vector<double> v;
  if (info.serialized) {
    std::lock_guard lock(e.lane());
    v = e.embed_crop(crop);
  } else {
    v = e.embed_crop(crop);
  }
  if (static_cast<int>(v.size()) != info.dimension)
    throw ProviderError("embedder returned dimension " + std::to_string(v.size()) +
                            ", declared " + std::to_string(info.dimension),
                        false);
  for (double x : v)
    if (!std::isfinite(x)) throw ProviderError("embedder returned a non-finite value", false);
  return {candidate_id, std::move(v)};
}

inline constexpr int kHistogramBins = 16;
inline constexpr int kThumbnailSide = 16;
inline constexpr int kBaselineDim = 3 * kHistogramBins + kThumbnailSide * kThumbnailSide;

// Deterministic model-free embedder: per-channel color histograms over the
// non-black pixels plus a 16x16 luma thumbnail, L2-normalized and then
// multiplied by `gain`.
inline std::vector<double> baseline_embed(const Image& crop, double gain = 1.0) {
  std::vector<double> v(kBaselineDim, 0.0);
  const int w = crop.width();
  const int h = crop.height();

  double masked = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Rgb px = crop.at(x, y);
      if (px == Rgb{0, 0, 0}) continue;
      ++masked;
      for (int c = 0; c < 3; ++c) v[c * kHistogramBins + px[c] * kHistogramBins / 256] += 1;
    }
  if (masked > 0)
    for (int i = 0; i < 3 * kHistogramBins; ++i) v[i] /= masked;

  // Area-averaged luma over a 16x16 partition of the crop.
  std::array<double, kThumbnailSide * kThumbnailSide> sum{};
  std::array<double, kThumbnailSide * kThumbnailSide> count{};
  for (int y = 0; y < h; ++y) {
    const int ty = y * kThumbnailSide / h;
    for (int x = 0; x < w; ++x) {
      const int tx = x * kThumbnailSide / w;
      const Rgb px = crop.at(x, y);
      const double luma = (0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]) / 255.0;
      sum[ty * kThumbnailSide + tx] += luma;
      count[ty * kThumbnailSide + tx] += 1;
    }
  }
  for (int i = 0; i < kThumbnailSide * kThumbnailSide; ++i)
    v[3 * kHistogramBins + i] = count[i] > 0 ? sum[i] / count[i] : 0.0;

  double norm = 0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm == 0) return v;
  for (double& x : v) x = x / norm * gain;
  return v;
}

// Baseline vectors land on a sphere of radius `gain`; the default puts
// inter-color distances on the scale the profile thresholds expect.
inline constexpr double kBaselineGain = 16.0;

class BaselineEmbedder final : public Embedder {
 public:
  explicit BaselineEmbedder(double gain = kBaselineGain) : gain_(gain) {}
  EmbedderInfo info() const override { return {kBaselineDim, {0, 0, 0}, {1, 1, 1}, false}; }
  std::vector<double> embed_crop(const Image& crop) override {
    return baseline_embed(crop, gain_);
  }

 private:
  double gain_;
};

// Memoizes another embedder by crop content hash.
class CachingEmbedder final : public Embedder {
 public:
  explicit CachingEmbedder(std::shared_ptr<Embedder> inner) : inner_(std::move(inner)) {}

  EmbedderInfo info() const override {
    EmbedderInfo i = inner_->info();
    i.serialized = false;  // the inner call is serialized below when needed
    return i;
  }

  std::vector<double> embed_crop(const Image& crop) override {
    std::string key = std::to_string(crop.width()) + "x" + std::to_string(crop.height()) +
                      ":" + codec::sha256_hex(crop.pixels());
    {
      std::lock_guard lock(mu_);
      if (auto it = cache_.find(key); it != cache_.end()) {
        ++hits_;
        return it->second;
      }
    }
    FeatureVector fv = embed(*inner_, crop);
    std::lock_guard lock(mu_);
    cache_.emplace(std::move(key), fv.values);
    return fv.values;
  }

  std::size_t hits() const {
    std::lock_guard lock(mu_);
    return hits_;
  }

 private:
  std::shared_ptr<Embedder> inner_;
  mutable std::mutex mu_;
  std::map<std::string, std::vector<double>> cache_;
  std::size_t hits_ = 0;
};

}  // namespace occam
