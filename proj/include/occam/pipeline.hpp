#pragma once

#include <atomic>
#include <bit>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "occam/datasets.hpp"
#include "occam/embedding.hpp"
#include "occam/error.hpp"
#include "occam/evaluation.hpp"
#include "occam/file_provider.hpp"
#include "occam/finch.hpp"
#include "occam/io.hpp"
#include "occam/mock_provider.hpp"
#include "occam/multiscale.hpp"
#include "occam/wire.hpp"

namespace occam {

struct PipelineConfig {
  std::string profile = "S";
  CandidateConfig candidates;
  int crop_target = 224;
  ThresholdSchedule schedule{{12.0, 9.0, 7.75}};
  // Ablation switches.
  bool mask_processing = true;
  bool clustering = true;
  bool scaling = true;

  std::string provider = "mock";
  std::string embedder = "baseline";
  MockOptions mock;
  double baseline_gain = kBaselineGain;
  int workers = 1;

  void validate() const {
    try {
      candidates.filter.validate();
      candidates.multiscale.validate();
      schedule.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (candidates.grid_spacing < 1) throw ConfigError("grid_spacing must be >= 1");
    if (crop_target < 1) throw ConfigError("crop_target must be >= 1");
    if (workers < 1) throw ConfigError("workers must be >= 1");
  }
};

// OCCAM-S (single-class) and OCCAM-M (multi-class) defaults.
inline PipelineConfig make_profile(const std::string& name) {
  PipelineConfig c;
  c.profile = name;
  if (name == "S") {
    c.crop_target = 224;
    c.schedule = {{12.0, 9.0, 7.75}};
  } else if (name == "M") {
    c.crop_target = 500;
    c.schedule = {{5.0, 4.0, 3.0}};
  } else {
    throw ConfigError("unknown profile '" + name + "' (expected S or M)");
  }
  return c;
}

// Profile base plus explicit overrides:
//   {"profile":"M","grid_spacing":10,"iou_dup_threshold":0.1,...}
inline PipelineConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  PipelineConfig c = make_profile(j.value("profile", std::string("S")));
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "profile") continue;
      else if (key == "grid_spacing") c.candidates.grid_spacing = v.get<int>();
      else if (key == "iou_dup_threshold") c.candidates.filter.iou_dup_threshold = v.get<double>();
      else if (key == "max_area_frac") c.candidates.filter.max_area_frac = v.get<double>();
      else if (key == "min_bbox_side") c.candidates.filter.min_bbox_side = v.get<int>();
      else if (key == "min_candidates") c.candidates.multiscale.min_candidates = v.get<int>();
      else if (key == "max_depth") c.candidates.multiscale.max_depth = v.get<int>();
      else if (key == "crop_target") c.crop_target = v.get<int>();
      else if (key == "schedule") c.schedule.initial = v.get<std::vector<double>>();
      else if (key == "mask_processing") c.mask_processing = v.get<bool>();
      else if (key == "clustering") c.clustering = v.get<bool>();
      else if (key == "scaling") c.scaling = v.get<bool>();
      else if (key == "provider") c.provider = v.get<std::string>();
      else if (key == "embedder") c.embedder = v.get<std::string>();
      else if (key == "baseline_gain") c.baseline_gain = v.get<double>();
      else if (key == "workers") c.workers = v.get<int>();
      else if (key == "mock") {
        c.mock.min_visible_frac = v.value("min_visible_frac", c.mock.min_visible_frac);
        c.mock.multimask = v.value("multimask", c.mock.multimask);
        if (v.contains("background")) c.mock.background = v.at("background").get<Rgb>();
      } else
        throw ConfigError("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

inline nlohmann::json config_to_json(const PipelineConfig& c) {
  return {{"profile", c.profile},
          {"grid_spacing", c.candidates.grid_spacing},
          {"iou_dup_threshold", c.candidates.filter.iou_dup_threshold},
          {"max_area_frac", c.candidates.filter.max_area_frac},
          {"min_bbox_side", c.candidates.filter.min_bbox_side},
          {"min_candidates", c.candidates.multiscale.min_candidates},
          {"max_depth", c.candidates.multiscale.max_depth},
          {"crop_target", c.crop_target},
          {"schedule", c.schedule.initial},
          {"mask_processing", c.mask_processing},
          {"clustering", c.clustering},
          {"scaling", c.scaling},
          {"provider", c.provider},
          {"embedder", c.embedder},
          {"baseline_gain", c.baseline_gain},
          {"workers", c.workers},
          {"mock",
           {{"min_visible_frac", c.mock.min_visible_frac},
            {"multimask", c.mock.multimask},
            {"background", c.mock.background}}}};
}

struct ImageResult {
  std::string image;
  int width = 0;
  int height = 0;
  std::vector<CandidateInstance> candidates;
  std::vector<FeatureVector> features;  // empty when clustering is off
  std::vector<Cluster> clusters;
  std::size_t base_candidates = 0;
  bool refined = false;
  std::vector<std::string> warnings;

  CountPrediction prediction() const { return {clusters, candidates}; }
};

inline ImageResult run_image(const Image& img, const std::string& image_key,
                             SegmentationProvider& provider, Embedder& embedder,
                             const PipelineConfig& cfg) {
  CandidateConfig cc = cfg.candidates;
  cc.mask_processing = cfg.mask_processing;
  if (!cfg.scaling) cc.multiscale.max_depth = 0;

  ImageResult r;
  r.image = image_key;
  r.width = img.width();
  r.height = img.height();
  CandidateResult found = refine_multiscale(img, provider, cc, image_key);
  r.candidates = std::move(found.candidates);
  r.base_candidates = found.base_count;
  r.refined = found.refined;
  r.warnings = std::move(found.warnings);
  if (r.candidates.empty()) return r;

  if (!cfg.clustering) {
    // Every candidate counted as one class.
    Cluster all;
    for (const auto& c : r.candidates) all.members.push_back(c.id);
    r.clusters.push_back(std::move(all));
    return r;
  }
  for (const auto& c : r.candidates)
    r.features.push_back(embed(embedder, prepare_crop(img, c, cfg.crop_target), c.id));
  r.clusters = finch_threshold_cluster(r.features, cfg.schedule);
  return r;
}

inline nlohmann::json result_to_json(const ImageResult& r) {
  std::map<int, const CandidateInstance*> by_id;
  for (const auto& c : r.candidates) by_id[c.id] = &c;
  auto clusters = nlohmann::json::array();
  for (std::size_t k = 0; k < r.clusters.size(); ++k) {
    auto boxes = nlohmann::json::array();
    for (int id : r.clusters[k].members) {
      const BBox& b = by_id.at(id)->bbox;
      boxes.push_back({b.x0, b.y0, b.x1, b.y1});
    }
    clusters.push_back({{"id", k},
                        {"size", r.clusters[k].size()},
                        {"members", r.clusters[k].members},
                        {"boxes", boxes}});
  }
  return {{"image", r.image},
          {"width", r.width},
          {"height", r.height},
          {"clusters", clusters},
          {"total", r.candidates.size()},
          {"base_candidates", r.base_candidates},
          {"refined", r.refined},
          {"warnings", r.warnings}};
}

inline nlohmann::json candidates_to_json(const ImageResult& r) {
  auto arr = nlohmann::json::array();
  for (const auto& c : r.candidates)
    arr.push_back({{"id", c.id},
                   {"bbox", {c.bbox.x0, c.bbox.y0, c.bbox.x1, c.bbox.y1}},
                   {"score", c.score},
                   {"point_index", c.point_index},
                   {"slot", c.slot},
                   {"origin", c.origin},
                   {"rle", rle_to_json(rle_encode(c.mask))}});
  return arr;
}

// Fixed 16-color palette, assigned by cluster rank.
inline constexpr std::array<Rgb, 16> kPalette{{{230, 25, 75},   {60, 180, 75},   {255, 225, 25},
                                               {0, 130, 200},   {245, 130, 48},  {145, 30, 180},
                                               {70, 240, 240},  {240, 50, 230},  {210, 245, 60},
                                               {250, 190, 212}, {0, 128, 128},   {220, 190, 255},
                                               {170, 110, 40},  {255, 250, 200}, {128, 0, 0},
                                               {170, 255, 195}}};

inline Image render_visualization(const Image& img, const ImageResult& r, int thickness = 2) {
  Image out = img;
  std::map<int, const CandidateInstance*> by_id;
  for (const auto& c : r.candidates) by_id[c.id] = &c;
  for (std::size_t k = 0; k < r.clusters.size(); ++k) {
    const Rgb color = kPalette[k % kPalette.size()];
    for (int id : r.clusters[k].members) {
      const BBox& b = by_id.at(id)->bbox;
      for (int y = b.y0; y < b.y1; ++y)
        for (int x = b.x0; x < b.x1; ++x) {
          const bool edge = x < b.x0 + thickness || x >= b.x1 - thickness ||
                            y < b.y0 + thickness || y >= b.y1 - thickness;
          if (edge) out.set(x, y, color);
        }
    }
  }
  return out;
}

// Little-endian f32 vectors in `bin`, indexed by a JSON document:
//   {"dim":D,"bin":"<file>","features":[{"candidate":id,"offset":bytes},...]}
inline void write_feature_dump(const std::filesystem::path& index_path,
                               const std::vector<FeatureVector>& features) {
  std::filesystem::path bin = index_path;
  bin.replace_extension(".bin");
  std::ofstream out(bin, std::ios::binary);
  if (!out) throw DataError("cannot write " + bin.string());
  const std::size_t dim = features.empty() ? 0 : features.front().values.size();
  auto entries = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& f : features) {
    entries.push_back({{"candidate", f.candidate_id}, {"offset", offset}});
    for (double v : f.values) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      const char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                             static_cast<char>((bits >> 16) & 0xff),
                             static_cast<char>((bits >> 24) & 0xff)};
      out.write(bytes, 4);
      offset += 4;
    }
  }
  const nlohmann::json index = {{"dim", dim}, {"bin", bin.filename().string()}, {"features", entries}};
  io::write_text(index_path, index.dump(1) + "\n");
}

inline std::vector<FeatureVector> read_feature_dump(const std::filesystem::path& index_path) {
  const auto index = io::read_json(index_path);
  try {
    const std::size_t dim = index.at("dim").get<std::size_t>();
    const auto bin = index_path.parent_path() / index.at("bin").get<std::string>();
    const std::string bytes = io::read_text(bin);
    std::vector<FeatureVector> out;
    for (const auto& e : index.at("features")) {
      FeatureVector f;
      f.candidate_id = e.at("candidate").get<int>();
      const auto offset = e.at("offset").get<std::uint64_t>();
      if (offset + dim * 4 > bytes.size()) throw DataError("feature dump truncated: " + bin.string());
      for (std::size_t k = 0; k < dim; ++k) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b)
          bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + k * 4 + b]))
                  << (8 * b);
        f.values.push_back(std::bit_cast<float>(bits));
      }
      out.push_back(std::move(f));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed feature index " + index_path.string() + ": " + e.what());
  }
}

inline nlohmann::json clusters_to_json(const std::vector<Cluster>& clusters) {
  auto arr = nlohmann::json::array();
  for (const auto& c : clusters) arr.push_back({{"members", c.members}, {"size", c.size()}});
  return arr;
}

// ---------------------------------------------------------------------------
// Provider / embedder construction from config strings.

struct Backends {
  std::shared_ptr<SegmentationProvider> provider;
  std::shared_ptr<Embedder> embedder;
};

inline Backends make_backends(const PipelineConfig& cfg) {
  Backends b;
  std::shared_ptr<wire::Session> session;
  const std::string& p = cfg.provider;
  if (p == "mock") {
    b.provider = std::make_shared<MockProvider>(cfg.mock);
  } else if (p.rfind("file:", 0) == 0) {
    b.provider = std::make_shared<FileProvider>(p.substr(5));
  } else if (p.rfind("wire:", 0) == 0) {
    session = wire::Session::connect(p.substr(5));
    if (!session->caps().segment) throw ProviderError("model server cannot segment", false);
    b.provider = std::make_shared<wire::WireSegmentationProvider>(session);
  } else {
    throw ConfigError("unknown provider '" + p + "' (mock, file:<dir>, wire:<cmd-or-url>)");
  }

  const std::string& e = cfg.embedder;
  if (e == "baseline") {
    b.embedder = std::make_shared<BaselineEmbedder>(cfg.baseline_gain);
  } else if (e == "wire" || e.rfind("wire:", 0) == 0) {
    if (e != "wire") session = wire::Session::connect(e.substr(5));
    if (!session) throw ConfigError("--embedder wire needs a wire provider or wire:<cmd-or-url>");
    b.embedder = std::make_shared<CachingEmbedder>(std::make_shared<wire::WireEmbedder>(session));
  } else {
    throw ConfigError("unknown embedder '" + e + "' (baseline, wire, wire:<cmd-or-url>)");
  }
  return b;
}

// Runs fn(i) for i in [0, n) on `workers` threads; the first exception wins.
template <class Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

struct EvalOutput {
  std::vector<ImageEvaluation> images;
  std::vector<std::string> warnings;
  MetricsReport report;
};

// Evaluates every record whose GT total is at most max_gt (< 0: no limit).
inline EvalOutput run_eval(const std::vector<DatasetRecord>& records, const Backends& backends,
                           const PipelineConfig& cfg, long max_gt = -1) {
  std::vector<const DatasetRecord*> selected;
  for (const auto& r : records)
    if (max_gt < 0 || r.gt.total() <= static_cast<std::size_t>(max_gt)) selected.push_back(&r);

  EvalOutput out;
  out.images.resize(selected.size());
  std::vector<std::vector<std::string>> warnings(selected.size());
  parallel_for(selected.size(), cfg.workers, [&](std::size_t i) {
    const DatasetRecord& rec = *selected[i];
    const Image img = io::read_image(rec.image);
    const ImageResult res =
        run_image(img, rec.image.string(), *backends.provider, *backends.embedder, cfg);
    out.images[i] = evaluate_image(rec.image.string(), res.prediction(), rec.gt);
    warnings[i] = res.warnings;
  });
  for (auto& w : warnings) out.warnings.insert(out.warnings.end(), w.begin(), w.end());
  out.report = aggregate(out.images);
  return out;
}

inline std::string eval_csv(const std::vector<ImageEvaluation>& images) {
  std::ostringstream s;
  s << "image,gt_total,predicted_total,candidates,tp,fp,fn,abs_error\n";
  for (const auto& im : images) {
    double abs_err = 0;
    for (const auto& u : im.units) abs_err += std::abs(u.predicted - u.ground_truth);
    s << im.image << ',' << im.gt_total << ',' << im.predicted_total << ',' << im.candidates << ','
      << im.prf.tp << ',' << im.prf.fp << ',' << im.prf.fn << ',' << abs_err << '\n';
  }
  return s.str();
}

}  // namespace occam
