// occam: count objects per class, evaluate on datasets, build stitched
// multi-class test sets, and cluster dumped feature vectors.

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "occam/datasets.hpp"
#include "occam/error.hpp"
#include "occam/file_provider.hpp"
#include "occam/io.hpp"
#include "occam/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

struct PipelineFlags {
  std::string profile;
  std::string config_file;
  std::string provider;
  std::string embedder;
  bool no_mask_processing = false;
  bool no_clustering = false;
  bool no_scaling = false;
  int workers = 0;
  std::optional<int> grid_spacing;
  std::optional<double> min_visible_frac;

  void attach(CLI::App* app) {
    app->add_option("--profile", profile, "Configuration profile")->check(CLI::IsMember({"S", "M"}));
    app->add_option("--config", config_file, "JSON config (profile base + overrides)");
    app->add_option("--provider", provider, "mock | file:<dir> | wire:<cmd-or-url>");
    app->add_option("--embedder", embedder, "baseline | wire | wire:<cmd-or-url>");
    app->add_flag("--no-mask-processing", no_mask_processing, "Ablation: skip mask filtering");
    app->add_flag("--no-clustering", no_clustering, "Ablation: count all candidates as one class");
    app->add_flag("--no-scaling", no_scaling, "Ablation: disable multiscale refinement");
    app->add_option("--workers", workers, "Images processed concurrently");
    app->add_option("--grid-spacing", grid_spacing, "Seed point spacing in pixels");
    app->add_option("--mock-min-visible", min_visible_frac,
                    "Mock provider: smallest visible region as a fraction of the image");
  }

  occam::PipelineConfig resolve() const {
    nlohmann::json j = nlohmann::json::object();
    if (!config_file.empty()) {
      try {
        j = occam::io::read_json(config_file);
      } catch (const occam::DataError& e) {
        throw occam::ConfigError(e.what());
      }
    }
    if (!profile.empty()) j["profile"] = profile;
    occam::PipelineConfig c = occam::config_from_json(j);
    if (!provider.empty()) c.provider = provider;
    if (!embedder.empty()) c.embedder = embedder;
    if (no_mask_processing) c.mask_processing = false;
    if (no_clustering) c.clustering = false;
    if (no_scaling) c.scaling = false;
    if (workers > 0) c.workers = workers;
    if (grid_spacing) c.candidates.grid_spacing = *grid_spacing;
    if (min_visible_frac) c.mock.min_visible_frac = *min_visible_frac;
    c.validate();
    return c;
  }
};

std::vector<double> parse_schedule(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw occam::ConfigError("bad schedule entry '" + item + "'");
    }
  }
  return out;
}

void emit(const nlohmann::json& j, const std::string& out_file) {
  if (out_file.empty())
    std::cout << j.dump() << "\n";
  else
    occam::io::write_text(out_file, j.dump(1) + "\n");
}

int run_count(const std::vector<std::string>& images, const PipelineFlags& flags,
              const std::string& viz_dir, const std::string& cand_dir, const std::string& feat_dir,
              const std::string& record_dir) {
  occam::PipelineConfig cfg = flags.resolve();
  occam::Backends backends = occam::make_backends(cfg);
  if (!record_dir.empty())
    backends.provider = std::make_shared<occam::RecordingProvider>(backends.provider, record_dir);
  for (const auto* dir : {&viz_dir, &cand_dir, &feat_dir})
    if (!dir->empty()) fs::create_directories(*dir);

  std::vector<nlohmann::json> reports(images.size());
  occam::parallel_for(images.size(), cfg.workers, [&](std::size_t i) {
    const occam::Image img = occam::io::read_image(images[i]);
    const occam::ImageResult r =
        occam::run_image(img, images[i], *backends.provider, *backends.embedder, cfg);
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
    const std::string stem = fs::path(images[i]).stem().string();
    if (!viz_dir.empty())
      occam::io::write_png(fs::path(viz_dir) / (stem + ".viz.png"), occam::render_visualization(img, r));
    if (!cand_dir.empty())
      occam::io::write_text(fs::path(cand_dir) / (stem + ".candidates.json"),
                            occam::candidates_to_json(r).dump() + "\n");
    if (!feat_dir.empty())
      occam::write_feature_dump(fs::path(feat_dir) / (stem + ".features.json"), r.features);
    reports[i] = occam::result_to_json(r);
  });
  for (const auto& r : reports) std::cout << r.dump() << "\n";
  return occam::exit_code::kOk;
}

std::vector<occam::DatasetRecord> load_dataset(const std::string& spec, const std::string& split,
                                               bool clamp) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos)
    throw occam::ConfigError("dataset must be fsc147:<root>, carpk:<root> or stitched:<dir>");
  const std::string kind = spec.substr(0, colon);
  const fs::path root = spec.substr(colon + 1);
  occam::LoaderOptions opts{clamp};
  if (kind == "fsc147") return occam::load_fsc147(root, split, {}, opts);
  if (kind == "carpk") return occam::load_carpk(root, split, {}, opts);
  if (kind == "stitched") return occam::load_stitched(root, opts);
  throw occam::ConfigError("unknown dataset kind '" + kind + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prior-free multi-class object counting"};
  app.require_subcommand(1);

  // count
  auto* count = app.add_subcommand("count", "Count objects per discovered class");
  std::vector<std::string> images;
  PipelineFlags count_flags;
  std::string viz_dir, cand_dir, feat_dir, record_dir;
  count->add_option("images", images, "Input images")->required();
  count_flags.attach(count);
  count->add_option("--viz", viz_dir, "Write box visualizations (one PNG per image) here");
  count->add_option("--dump-candidates", cand_dir, "Write candidate masks (RLE JSON) here");
  count->add_option("--dump-features", feat_dir, "Write feature vectors (f32 + JSON index) here");
  count->add_option("--record-masks", record_dir, "Store provider answers as replayable mask files");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate against an annotated dataset");
  std::string dataset, split = "test", csv_file, eval_out;
  long max_gt = -1;
  bool clamp = false;
  PipelineFlags eval_flags;
  eval->add_option("--dataset", dataset, "fsc147:<root> | carpk:<root> | stitched:<dir>")->required();
  eval->add_option("--split", split, "Dataset split");
  eval->add_option("--max-gt", max_gt, "Only images with at most N annotated objects");
  eval->add_option("--csv", csv_file, "Per-image CSV output");
  eval->add_option("--out", eval_out, "Report JSON output (default stdout)");
  eval->add_flag("--clamp-points", clamp, "Clamp out-of-frame annotation points");
  eval_flags.attach(eval);

  // stitch
  auto* stitch = app.add_subcommand("stitch", "Build a synthetic multi-class test set");
  std::string fsc_root, stitch_split = "test", stitch_out;
  occam::StitchSpec stitch_spec;
  stitch->add_option("--fsc-root", fsc_root, "FSC-147 root directory")->required();
  stitch->add_option("--split", stitch_split, "Source split");
  stitch->add_option("--out", stitch_out, "Output directory")->required();
  stitch->add_option("--seed", stitch_spec.seed, "RNG seed");
  stitch->add_option("--variant", stitch_spec.variant, "Variant id recorded in meta.json");
  stitch->add_option("--num-images", stitch_spec.num_images, "Canvases to generate");
  stitch->add_option("--max-sub-images", stitch_spec.max_sub_images, "Upper bound of sub-images");
  stitch->add_option("--columns", stitch_spec.columns, "Maximum columns per row");

  // cluster
  auto* cluster = app.add_subcommand("cluster", "Cluster a feature dump");
  std::string features, schedule_text, cluster_profile = "S";
  cluster->add_option("--features", features, "Feature index JSON from --dump-features")->required();
  cluster->add_option("--schedule", schedule_text, "Comma-separated thresholds, e.g. 12.0,9.0,7.75");
  cluster->add_option("--profile", cluster_profile, "Profile supplying the default schedule")
      ->check(CLI::IsMember({"S", "M"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? occam::exit_code::kOk : occam::exit_code::kConfig;
  }

  try {
    if (*count) return run_count(images, count_flags, viz_dir, cand_dir, feat_dir, record_dir);

    if (*eval) {
      const occam::PipelineConfig cfg = eval_flags.resolve();
      const auto records = load_dataset(dataset, split, clamp);
      const occam::Backends backends = occam::make_backends(cfg);
      const auto out = occam::run_eval(records, backends, cfg, max_gt);
      for (const auto& w : out.warnings) std::cerr << "warning: " << w << "\n";
      if (!csv_file.empty()) occam::io::write_text(csv_file, occam::eval_csv(out.images));
      auto report = occam::report_to_json(out.report, out.images);
      report["config"] = occam::config_to_json(cfg);
      emit(report, eval_out);
      return occam::exit_code::kOk;
    }

    if (*stitch) {
      const auto pool = occam::load_fsc147(fsc_root, stitch_split, {}, {true});
      const auto canvases = occam::stitch_multiclass(stitch_spec, pool);
      occam::write_stitched(stitch_out, canvases, stitch_spec);
      std::cout << "wrote " << canvases.size() << " canvases to " << stitch_out << "\n";
      return occam::exit_code::kOk;
    }

    if (*cluster) {
      occam::ThresholdSchedule sched = occam::make_profile(cluster_profile).schedule;
      if (!schedule_text.empty()) sched.initial = parse_schedule(schedule_text);
      try {
        sched.validate();
      } catch (const std::invalid_argument& e) {
        throw occam::ConfigError(e.what());
      }
      const auto vecs = occam::read_feature_dump(features);
      std::cout << occam::clusters_to_json(occam::finch_threshold_cluster(vecs, sched)).dump() << "\n";
      return occam::exit_code::kOk;
    }
  } catch (const occam::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return occam::exit_code::kConfig;
  } catch (const occam::ProviderError& e) {
    std::cerr << "provider error: " << e.what() << "\n";
    return occam::exit_code::kProvider;
  } catch (const occam::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return occam::exit_code::kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return occam::exit_code::kOk;
}
