#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "occam/codec.hpp"
#include "occam/io.hpp"
#include "occam/prompting.hpp"

namespace occam {

// Precomputed masks, one JSON document per (image key, grid hash):
//   {"image": key, "grid_hash": hex, "width": W, "height": H,
//    "masks": [{"point_index", "rle", "score"}, ...]}
inline std::string mask_file_name(const std::string& image_key, const std::string& hash) {
  return codec::sha256_hex(image_key + "\n" + hash).substr(0, 24) + ".json";
}

class FileProvider final : public SegmentationProvider {
 public:
  explicit FileProvider(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (!std::filesystem::is_directory(dir_))
      throw ProviderError("mask directory not found: " + dir_.string(), false);
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
      if (entry.path().extension() != ".json") continue;
      const auto doc = io::read_json(entry.path());
      if (!doc.contains("image") || !doc.contains("grid_hash")) continue;
      index_[{doc.at("image").get<std::string>(), doc.at("grid_hash").get<std::string>()}] =
          entry.path();
    }
  }

  ProviderCaps caps() const override { return {kMaxMasksPerPoint, true, true, false}; }

  std::vector<RawMask> segment_points(const Image& img, std::span<const SeedPoint> points,
                                      std::string_view image_key) override {
    const std::string hash = grid_hash(points);
    const auto it = index_.find({std::string(image_key), hash});
    if (it == index_.end())
      throw ProviderError("no precomputed masks for '" + std::string(image_key) + "' grid " + hash,
                          false);
    const auto doc = io::read_json(it->second);
    if (doc.value("width", 0) != img.width() || doc.value("height", 0) != img.height())
      throw ProviderError("precomputed masks for '" + std::string(image_key) +
                              "' have different image dimensions",
                          false);
    return masks_from_json(doc.at("masks"), img.width(), img.height());
  }

  std::size_t size() const { return index_.size(); }

 private:
  std::filesystem::path dir_;
  std::map<std::pair<std::string, std::string>, std::filesystem::path> index_;
};

// Forwards to another provider and stores every answer as a mask file, so a
// slow model run can be replayed through FileProvider.
class RecordingProvider final : public SegmentationProvider {
 public:
  RecordingProvider(std::shared_ptr<SegmentationProvider> inner, std::filesystem::path dir)
      : inner_(std::move(inner)), dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  ProviderCaps caps() const override { return inner_->caps(); }

  std::vector<RawMask> segment_points(const Image& img, std::span<const SeedPoint> points,
                                      std::string_view image_key) override {
    auto masks = inner_->segment_points(img, points, image_key);
    const std::string hash = grid_hash(points);
    const nlohmann::json doc = {{"image", image_key},
                                {"grid_hash", hash},
                                {"width", img.width()},
                                {"height", img.height()},
                                {"masks", masks_to_json(masks)}};
    std::lock_guard lock(mu_);
    io::write_text(dir_ / mask_file_name(std::string(image_key), hash), doc.dump() + "\n");
    return masks;
  }

 private:
  std::shared_ptr<SegmentationProvider> inner_;
  std::filesystem::path dir_;
  std::mutex mu_;
};

}  // namespace occam
