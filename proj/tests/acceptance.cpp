// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>

#include "occam/datasets.hpp"
#include "occam/pipeline.hpp"
#include "occam/synthetic.hpp"
#include "support/oracles.hpp"

using namespace occam;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

class Check {
 public:
  explicit Check(Outcome& o) : o_(o) {}
  void expect(bool cond, const std::string& what) {
    if (!cond && o_.ok) {
      o_.ok = false;
      o_.detail = what;
    }
  }

 private:
  Outcome& o_;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<FeatureVector> as_features(const std::vector<std::vector<double>>& xs) {
  std::vector<FeatureVector> out;
  for (std::size_t i = 0; i < xs.size(); ++i) out.push_back({static_cast<int>(i), xs[i]});
  return out;
}

oracle::Partition partition_of(const std::vector<Cluster>& clusters) {
  oracle::Partition p;
  for (const auto& c : clusters) p.insert(std::set<int>(c.members.begin(), c.members.end()));
  return p;
}

Outcome finch_oracle() {
  Outcome o;
  Check c(o);
  const auto t0 = Clock::now();
  std::mt19937 rng(20240601);
  std::uniform_int_distribution<int> n_dist(1, 20), d_dist(1, 4), k_dist(1, 4);
  std::normal_distribution<double> centers(0.0, 6.0), noise(0.0, 1.0);
  std::uniform_real_distribution<double> th(0.5, 8.0);
  for (int t = 0; t < 200; ++t) {
    const int n = n_dist(rng), d = d_dist(rng);
    std::vector<std::vector<double>> means(k_dist(rng), std::vector<double>(d));
    for (auto& m : means)
      for (auto& v : m) v = centers(rng);
    std::vector<std::vector<double>> xs;
    for (int i = 0; i < n; ++i) {
      std::vector<double> p = means[rng() % means.size()];
      for (auto& v : p) v += noise(rng);
      xs.push_back(p);
    }
    std::vector<double> sched{th(rng)};
    if (t % 2 == 1) {
      sched = {th(rng), th(rng), th(rng)};
      std::sort(sched.rbegin(), sched.rend());
    }
    const auto got = partition_of(finch_threshold_cluster(as_features(xs), {sched}));
    c.expect(got == oracle::threshold_finch(xs, sched), "instance " + std::to_string(t) + " differs");
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 5.0, "took " + std::to_string(secs) + " s");
  if (o.ok) o.detail = "200 instances, " + std::to_string(secs) + " s";
  return o;
}

Outcome singleton() {
  Outcome o;
  Check c(o);
  const auto f = as_features({{0.0, 0.0}, {0.5, 0.0}, {0.0, 0.6}, {40.0, 40.0}});
  const ThresholdSchedule sched{{3.0, 2.0}};
  const auto variant = finch_threshold_cluster(f, sched);
  std::size_t singletons = 0;
  for (const auto& k : variant) singletons += k.size() == 1;
  c.expect(variant.size() == 2 && singletons == 1, "threshold variant: expected one singleton");
  for (const auto& k : original_finch_level0(f))
    c.expect(k.size() >= 2, "original FINCH produced a singleton");
  if (o.ok) o.detail = "variant 1 singleton, original 0";
  return o;
}

Outcome imaging() {
  Outcome o;
  Check c(o);
  const auto t0 = Clock::now();
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> density(0.05, 0.7);
  for (int t = 0; t < 500; ++t) {
    const auto da = oracle::random_mask(rng, 32, 32, density(rng));
    const auto db = oracle::random_mask(rng, 32, 32, density(rng));
    const auto a = BinaryMask::from_dense(32, 32, da), b = BinaryMask::from_dense(32, 32, db);
    c.expect(iou(a, b) == oracle::iou(da, db), "iou differs at " + std::to_string(t));
    oracle::Partition comps;
    for (const auto& m : connected_components(a)) {
      std::set<int> s;
      for (const auto& p : m.pixels()) s.insert(p.y * 32 + p.x);
      comps.insert(s);
    }
    c.expect(comps == oracle::flood_fill(da, 32, 32), "components differ at " + std::to_string(t));
    c.expect(rle_decode(rle_from_json(rle_to_json(rle_encode(a)))) == a, "RLE round trip at " + std::to_string(t));
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 5.0, "took " + std::to_string(secs) + " s");
  if (o.ok) o.detail = "500 masks, " + std::to_string(secs) + " s";
  return o;
}

Outcome postprocess_invariants() {
  Outcome o;
  Check c(o);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  const FilterConfig cfg;
  std::size_t kept = 0;
  for (int t = 0; t < 100; ++t) {
    RawMaskSet raw{32, 32, {}};
    for (int i = 0; i < 15; ++i)
      raw.masks.push_back({BinaryMask::from_dense(32, 32, oracle::random_blobs(rng, 32, 32, 3)), score(rng), i, 0});
    const auto out = postprocess(raw, cfg);
    kept += out.size();
    for (std::size_t i = 0; i < out.size(); ++i) {
      const auto& m = out[i];
      c.expect(oracle::flood_fill(m.mask.to_dense(), 32, 32).size() == 1, "multi-component output");
      c.expect(m.bbox.width() >= cfg.min_bbox_side && m.bbox.height() >= cfg.min_bbox_side, "bbox side < min");
      c.expect(m.mask.area() <= cfg.max_area_frac * 32 * 32, "area fraction exceeded");
      for (std::size_t j = i + 1; j < out.size(); ++j)
        c.expect(oracle::iou(m.mask.to_dense(), out[j].mask.to_dense()) <= cfg.iou_dup_threshold, "IoU above threshold");
    }
    const auto again = postprocess(raw, cfg);
    bool same = again.size() == out.size();
    for (std::size_t i = 0; same && i < out.size(); ++i)
      same = again[i].mask == out[i].mask && again[i].score == out[i].score && again[i].id == out[i].id;
    c.expect(same, "rerun differs at set " + std::to_string(t));
  }
  if (o.ok) o.detail = "100 sets, " + std::to_string(kept) + " masks kept";
  return o;
}

Outcome end_to_end() {
  Outcome o;
  Check c(o);
  const auto t0 = Clock::now();
  const auto scene = synthetic::two_color_scene(12, 7);
  const auto cfg = make_profile("M");
  MockProvider mock(cfg.mock);
  BaselineEmbedder emb(cfg.baseline_gain);
  const auto r = run_image(scene.image, "scene", mock, emb, cfg);
  std::multiset<std::size_t> sizes;
  for (const auto& k : r.clusters) sizes.insert(k.size());
  const auto ev = evaluate_image("scene", r.prediction(), scene.gt);
  const double mae = compute_count_metrics(ev.units).mae;
  const double f1 = prf_from_counts(ev.prf).f1;
  const double secs = seconds_since(t0);
  c.expect(r.clusters.size() == 2 && sizes == std::multiset<std::size_t>{12, 7},
           "clusters " + std::to_string(r.clusters.size()));
  c.expect(mae == 0.0, "MAE " + std::to_string(mae));
  c.expect(f1 == 1.0, "F1 " + std::to_string(f1));
  c.expect(secs < 10.0, "took " + std::to_string(secs) + " s");
  if (o.ok) o.detail = "{12, 7}, MAE 0, F1 1, " + std::to_string(secs) + " s";
  return o;
}

Outcome metric_fixtures() {
  Outcome o;
  Check c(o);
  const std::vector<CountPair> pairs{{3, 4}, {5, 5}};
  const auto m = compute_count_metrics(pairs);
  c.expect(m.mae == 0.5, "MAE");
  c.expect(std::abs(m.rmse - 0.7071) <= 1e-4 && std::abs(m.rmse - std::sqrt(0.5)) <= 1e-9, "RMSE");
  c.expect(m.nae == 0.125, "NAE");
  c.expect(m.sre == 0.125, "SRE");

  // Ten instances on ten GT points plus two on empty background, one cluster.
  GroundTruth gt{{{"a", {}, {}}}};
  CountPrediction pred;
  Cluster all;
  for (int i = 0; i < 12; ++i) {
    const int x = i < 10 ? 5 + 8 * i : 90, y = i < 10 ? 10 : 80 + 5 * (i - 10);
    if (i < 10) gt.classes[0].points.push_back({x + 0.5, y + 0.5});
    CandidateInstance ci;
    ci.id = i;
    ci.mask = BinaryMask::filled_rect(100, 100, {x - 1, y - 1, x + 2, y + 2});
    ci.bbox = ci.mask.bbox();
    pred.candidates.push_back(ci);
    all.members.push_back(i);
  }
  pred.clusters = {all};
  const auto p = compute_prf(pred, gt);
  c.expect(std::abs(p.precision - 10.0 / 12.0) <= 1e-9, "precision");
  c.expect(p.recall == 1.0, "recall");
  c.expect(std::abs(p.f1 - 10.0 / 11.0) <= 1e-9, "F1");
  if (o.ok) {
    std::ostringstream s;
    s.precision(4);
    s << std::fixed << "MAE " << m.mae << " RMSE " << m.rmse << " NAE " << m.nae << " SRE " << m.sre
      << " P " << p.precision << " R " << p.recall << " F1 " << p.f1;
    o.detail = s.str();
  }
  return o;
}

Outcome ablation() {
  Outcome o;
  Check c(o);
  const auto two = synthetic::two_color_scene(12, 7);
  const auto tiny = synthetic::tiny_disk_scene();
  // counts[scene][m][cl][s]
  std::size_t counts[2][2][2][2] = {};
  for (int scene = 0; scene < 2; ++scene)
    for (int m = 0; m < 2; ++m)
      for (int cl = 0; cl < 2; ++cl)
        for (int s = 0; s < 2; ++s) {
          auto cfg = make_profile("M");
          cfg.mask_processing = m;
          cfg.clustering = cl;
          cfg.scaling = s;
          if (scene == 1) cfg.mock.min_visible_frac = 0.001;
          MockProvider mock(cfg.mock);
          BaselineEmbedder emb(cfg.baseline_gain);
          try {
            const auto r = run_image(scene == 0 ? two.image : tiny.image, "scene", mock, emb, cfg);
            counts[scene][m][cl][s] = r.candidates.size();
          } catch (const std::exception& e) {
            c.expect(false, std::string("run failed: ") + e.what());
          }
        }
  for (int scene = 0; scene < 2; ++scene)
    for (int cl = 0; cl < 2; ++cl)
      for (int s = 0; s < 2; ++s)
        c.expect(counts[scene][0][cl][s] >= counts[scene][1][cl][s], "mask processing off decreased the count");
  for (int m = 0; m < 2; ++m)
    for (int cl = 0; cl < 2; ++cl)
      c.expect(counts[1][m][cl][0] < counts[1][m][cl][1], "scaling off did not decrease the tiny-disk count");
  if (o.ok)
    o.detail = "8 combinations; tiny-disk count " + std::to_string(counts[1][1][1][1]) + " -> " +
               std::to_string(counts[1][1][1][0]) + " without scaling";
  return o;
}

Image solid(const DatasetRecord& r) {
  Image img(r.width, r.height);
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x)
      img.set(x, y, {static_cast<std::uint8_t>(x * 3 + r.width), static_cast<std::uint8_t>(y), static_cast<std::uint8_t>(r.height)});
  return img;
}

std::string canvas_bytes(const std::vector<StitchedCanvas>& cs) {
  std::string out;
  for (const auto& cv : cs) {
    const auto png = io::encode_png(cv.image);
    out.append(png.begin(), png.end());
    out += gt_to_json(cv.gt).dump();
  }
  return out;
}

Outcome stitcher() {
  Outcome o;
  Check c(o);
  std::vector<DatasetRecord> pool;
  for (int i = 0; i < 40; ++i) {
    DatasetRecord r;
    r.image = "src" + std::to_string(i) + ".png";
    r.width = 24 + 5 * (i % 9);
    r.height = 18 + 4 * (i % 5);
    r.label = "class" + std::to_string(i % 15);
    ClassAnnotation a{r.label, {}, {}};
    for (int k = 0; k < 1 + i % 7; ++k) a.points.push_back({2.5 + 3 * k, 1.5 + k});
    r.gt.classes.push_back(a);
    pool.push_back(r);
  }
  StitchSpec spec;
  spec.num_images = 100;
  spec.min_sub_images = 1;
  spec.max_sub_images = 10;
  spec.seed = 17;
  const auto a = stitch_multiclass(spec, pool, solid);
  c.expect(a.size() == 100, "canvas count");
  std::size_t min_sub = 99, max_sub = 0;
  for (const auto& cv : a) {
    min_sub = std::min(min_sub, cv.sources.size());
    max_sub = std::max(max_sub, cv.sources.size());
    std::size_t expected = 0;
    for (const auto& src : cv.sources)
      for (const auto& r : pool)
        if (r.image == src) expected += r.gt.total();
    c.expect(cv.gt.total() == expected, "GT points not preserved");
  }
  c.expect(min_sub >= 1 && max_sub <= 10, "sub-image count out of range");
  c.expect(canvas_bytes(a) == canvas_bytes(stitch_multiclass(spec, pool, solid)), "rerun not byte-identical");
  if (o.ok) o.detail = "100 canvases, " + std::to_string(min_sub) + "-" + std::to_string(max_sub) + " sub-images";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"finch-oracle-equivalence", finch_oracle},
      {"finch-singleton-behavior", singleton},
      {"imaging-oracles", imaging},
      {"postprocess-invariants", postprocess_invariants},
      {"end-to-end-synthetic-scene", end_to_end},
      {"metric-fixtures", metric_fixtures},
      {"ablation-structure", ablation},
      {"stitcher", stitcher},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.ok;
    std::printf("%s %s: %s\n", o.ok ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
