#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "occam/error.hpp"
#include "occam/evaluation.hpp"
#include "occam/io.hpp"

namespace occam {

namespace fs = std::filesystem;

struct DatasetRecord {
  fs::path image;
  int width = 0;
  int height = 0;
  std::string label;  // dominant class of the source image
  GroundTruth gt;
  std::vector<BBox> exemplars;  // loaded, never consumed by the pipeline
  std::string split;
};

struct LoaderOptions {
  // Out-of-frame points are an error unless clamping is requested.
  bool clamp_points = false;
};

namespace detail {

inline void check_points(DatasetRecord& r, const LoaderOptions& opts) {
  for (auto& cls : r.gt.classes)
    for (auto& p : cls.points) {
      const bool inside = p.x >= 0 && p.y >= 0 && p.x < r.width && p.y < r.height;
      if (inside) continue;
      if (!opts.clamp_points) {
        std::ostringstream msg;
        msg << r.image.string() << ": point (" << p.x << ", " << p.y << ") outside "
            << r.width << "x" << r.height << " image";
        throw DataError(msg.str());
      }
      p.x = std::clamp(p.x, 0.0, r.width - 1e-6);
      p.y = std::clamp(p.y, 0.0, r.height - 1e-6);
    }
}

}  // namespace detail

struct Fsc147Layout {
  std::string images_dir = "images_384_VarV2";
  std::string annotation_file = "annotation_FSC147_384.json";
  std::string split_file = "Train_Test_Val_FSC_147.json";
  std::string classes_file = "ImageClasses_FSC147.txt";  // optional
};

inline std::vector<DatasetRecord> load_fsc147(const fs::path& root, const std::string& split,
                                              const Fsc147Layout& layout = {},
                                              const LoaderOptions& opts = {}) {
  const auto splits = io::read_json(root / layout.split_file);
  if (!splits.is_object() || !splits.contains(split))
    throw DataError("unknown FSC-147 split '" + split + "' in " +
                    (root / layout.split_file).string());
  const auto annotations = io::read_json(root / layout.annotation_file);

  std::map<std::string, std::string> classes;
  if (fs::exists(root / layout.classes_file)) {
    std::istringstream in(io::read_text(root / layout.classes_file));
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto tab = line.find('\t');
      if (tab == std::string::npos) continue;
      classes[line.substr(0, tab)] = line.substr(tab + 1);
    }
  }

  std::vector<DatasetRecord> out;
  for (const auto& name_json : splits.at(split)) {
    const auto name = name_json.get<std::string>();
    if (!annotations.contains(name))
      throw DataError("no FSC-147 annotation for " + name);
    const auto& ann = annotations.at(name);
    DatasetRecord r;
    r.image = root / layout.images_dir / name;
    r.split = split;
    r.label = classes.count(name) ? classes[name] : "object";
    const Image img = io::read_image(r.image);
    r.width = img.width();
    r.height = img.height();
    ClassAnnotation cls{r.label, {}, {}};
    try {
      for (const auto& p : ann.at("points")) cls.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      if (ann.contains("box_examples_coordinates"))
        for (const auto& quad : ann.at("box_examples_coordinates")) {
          double x0 = 1e18, y0 = 1e18, x1 = -1e18, y1 = -1e18;
          for (const auto& c : quad) {
            x0 = std::min(x0, c.at(0).get<double>());
            y0 = std::min(y0, c.at(1).get<double>());
            x1 = std::max(x1, c.at(0).get<double>());
            y1 = std::max(y1, c.at(1).get<double>());
          }
          r.exemplars.push_back({static_cast<int>(x0), static_cast<int>(y0),
                                 static_cast<int>(std::ceil(x1)), static_cast<int>(std::ceil(y1))});
        }
    } catch (const nlohmann::json::exception& e) {
      throw DataError("malformed FSC-147 annotation for " + name + ": " + e.what());
    }
    r.gt.classes.push_back(std::move(cls));
    detail::check_points(r, opts);
    out.push_back(std::move(r));
  }
  return out;
}

struct CarpkLayout {
  std::string images_dir = "Images";
  std::string annotations_dir = "Annotations";
  std::string image_sets_dir = "ImageSets";
  std::string image_ext = ".png";
};

// One "x1 y1 x2 y2 [label]" box per line.
inline std::vector<BBox> parse_carpk_boxes(const std::string& text, const std::string& source) {
  std::vector<BBox> boxes;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    double x1, y1, x2, y2;
    if (!(ls >> x1 >> y1 >> x2 >> y2) || x2 <= x1 || y2 <= y1)
      throw DataError(source + ":" + std::to_string(line_no) + ": malformed box line '" + line + "'");
    boxes.push_back({static_cast<int>(x1), static_cast<int>(y1), static_cast<int>(x2),
                     static_cast<int>(y2)});
  }
  return boxes;
}

inline std::vector<DatasetRecord> load_carpk(const fs::path& root, const std::string& split,
                                             const CarpkLayout& layout = {},
                                             const LoaderOptions& opts = {}) {
  const fs::path list = root / layout.image_sets_dir / (split + ".txt");
  if (!fs::exists(list)) throw DataError("unknown CARPK split '" + split + "': " + list.string());
  std::istringstream in(io::read_text(list));
  std::vector<DatasetRecord> out;
  std::string id;
  while (in >> id) {
    DatasetRecord r;
    r.image = root / layout.images_dir / (id + layout.image_ext);
    r.split = split;
    r.label = "car";
    const Image img = io::read_image(r.image);
    r.width = img.width();
    r.height = img.height();
    const fs::path ann = root / layout.annotations_dir / (id + ".txt");
    ClassAnnotation cls{"car", {}, parse_carpk_boxes(io::read_text(ann), ann.string())};
    for (const auto& b : cls.boxes) cls.points.push_back({(b.x0 + b.x1) / 2.0, (b.y0 + b.y1) / 2.0});
    r.gt.classes.push_back(std::move(cls));
    detail::check_points(r, opts);
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic multi-class stitching

struct StitchSpec {
  std::uint64_t seed = 1;
  int variant = 0;
  int num_images = 100;
  int min_sub_images = 1;
  int max_sub_images = 10;
  int columns = 2;
};

struct StitchLayout {
  int width = 0;
  int height = 0;
  std::vector<BBox> placements;  // one per sub-image, native size
};

// Rows of up to `columns` images in order; a row is as tall as its tallest
// image, the canvas as wide as its widest row. Images keep native size and sit
// top-left in their cell.
inline StitchLayout layout_rows(const std::vector<std::pair<int, int>>& sizes, int columns) {
  if (columns < 1) throw std::invalid_argument("columns must be >= 1");
  StitchLayout l;
  for (std::size_t start = 0; start < sizes.size(); start += columns) {
    const std::size_t end = std::min(sizes.size(), start + columns);
    int x = 0, row_h = 0;
    for (std::size_t i = start; i < end; ++i) {
      const auto [w, h] = sizes[i];
      l.placements.push_back({x, l.height, x + w, l.height + h});
      x += w;
      row_h = std::max(row_h, h);
    }
    l.width = std::max(l.width, x);
    l.height += row_h;
  }
  return l;
}

struct StitchedCanvas {
  Image image;
  GroundTruth gt;
  std::vector<std::string> sources;
  std::vector<BBox> placements;
};

using RecordImageLoader = std::function<Image(const DatasetRecord&)>;

inline Image load_record_image(const DatasetRecord& r) { return io::read_image(r.image); }

inline std::vector<StitchedCanvas> stitch_multiclass(const StitchSpec& spec,
                                                     const std::vector<DatasetRecord>& pool,
                                                     const RecordImageLoader& load = load_record_image) {
  if (pool.empty()) throw DataError("stitch: empty source pool");
  if (spec.min_sub_images < 1 || spec.max_sub_images < spec.min_sub_images)
    throw ConfigError("stitch: invalid sub-image range");
  std::set<std::string> labels;
  for (const auto& r : pool) labels.insert(r.label);

  std::vector<StitchedCanvas> out;
  for (int n = 0; n < spec.num_images; ++n) {
    // Independent stream per canvas, derived from the master seed.
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                      static_cast<std::uint32_t>(spec.variant), static_cast<std::uint32_t>(n)};
    std::mt19937_64 rng(seq);
    const int k = std::uniform_int_distribution<int>(spec.min_sub_images, spec.max_sub_images)(rng);
    if (static_cast<std::size_t>(k) > labels.size())
      throw DataError("stitch: pool has " + std::to_string(labels.size()) +
                      " distinct classes, canvas needs " + std::to_string(k));
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::vector<const DatasetRecord*> drawn;
    std::set<std::string> used;
    while (drawn.size() < static_cast<std::size_t>(k)) {
      const DatasetRecord& r = pool[pick(rng)];
      if (!used.insert(r.label).second) continue;  // class already on canvas
      drawn.push_back(&r);
    }

    std::vector<Image> images;
    std::vector<std::pair<int, int>> sizes;
    for (const auto* r : drawn) {
      images.push_back(load(*r));
      sizes.emplace_back(images.back().width(), images.back().height());
    }
    const StitchLayout layout = layout_rows(sizes, spec.columns);
    StitchedCanvas canvas{Image(layout.width, layout.height), {}, {}, layout.placements};
    for (std::size_t i = 0; i < drawn.size(); ++i) {
      const BBox& at = layout.placements[i];
      paste(canvas.image, images[i], at.x0, at.y0);
      canvas.sources.push_back(drawn[i]->image.string());
      ClassAnnotation cls{drawn[i]->label, {}, {}};
      for (const auto& c : drawn[i]->gt.classes)
        for (const auto& p : c.points) cls.points.push_back({p.x + at.x0, p.y + at.y0});
      canvas.gt.classes.push_back(std::move(cls));
    }
    out.push_back(std::move(canvas));
  }
  return out;
}

inline std::string canvas_filename(int index) {
  std::ostringstream s;
  s << std::setw(3) << std::setfill('0') << index << ".png";
  return s.str();
}

inline nlohmann::json gt_to_json(const GroundTruth& gt) {
  nlohmann::json classes = nlohmann::json::object();
  for (const auto& c : gt.classes) {
    auto pts = nlohmann::json::array();
    for (const auto& p : c.points) pts.push_back({p.x, p.y});
    classes[c.label] = pts;
  }
  return {{"classes", classes}};
}

inline GroundTruth gt_from_json(const nlohmann::json& j) {
  GroundTruth gt;
  try {
    for (const auto& [label, pts] : j.at("classes").items()) {
      ClassAnnotation c{label, {}, {}};
      for (const auto& p : pts) c.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      gt.classes.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed annotation: ") + e.what());
  }
  return gt;
}

// images/NNN.png + annotations.json + meta.json
inline void write_stitched(const fs::path& dir, const std::vector<StitchedCanvas>& canvases,
                           const StitchSpec& spec) {
  fs::create_directories(dir / "images");
  nlohmann::json annotations = nlohmann::json::object();
  nlohmann::json sources = nlohmann::json::object();
  for (std::size_t i = 0; i < canvases.size(); ++i) {
    const std::string name = canvas_filename(static_cast<int>(i));
    io::write_png(dir / "images" / name, canvases[i].image);
    annotations[name] = gt_to_json(canvases[i].gt);
    sources[name] = canvases[i].sources;
  }
  io::write_text(dir / "annotations.json", annotations.dump(1) + "\n");
  const nlohmann::json meta = {{"seed", spec.seed},
                               {"variant", spec.variant},
                               {"num_images", spec.num_images},
                               {"columns", spec.columns},
                               {"sub_images", {spec.min_sub_images, spec.max_sub_images}},
                               {"sources", sources}};
  io::write_text(dir / "meta.json", meta.dump(1) + "\n");
}

inline std::vector<DatasetRecord> load_stitched(const fs::path& dir, const LoaderOptions& opts = {}) {
  const auto annotations = io::read_json(dir / "annotations.json");
  std::vector<DatasetRecord> out;
  for (const auto& [name, ann] : annotations.items()) {
    DatasetRecord r;
    r.image = dir / "images" / name;
    r.split = "test";
    r.gt = gt_from_json(ann);
    const Image img = io::read_image(r.image);
    r.width = img.width();
    r.height = img.height();
    detail::check_points(r, opts);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace occam
