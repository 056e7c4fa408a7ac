#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "occam/finch.hpp"
#include "occam/maskproc.hpp"

namespace occam {

struct PointF {
  double x = 0;
  double y = 0;
  bool operator==(const PointF&) const = default;
};

struct ClassAnnotation {
  std::string label;
  std::vector<PointF> points;
  std::vector<BBox> boxes;  // CARPK only
};

struct GroundTruth {
  std::vector<ClassAnnotation> classes;

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& c : classes) n += c.points.size();
    return n;
  }
};

struct CountPrediction {
  std::vector<Cluster> clusters;
  std::vector<CandidateInstance> candidates;  // looked up by id
};

// Per class, how many GT points fall on a set pixel of the candidate mask.
// A point (x, y) lands on pixel (floor x, floor y).
inline std::vector<int> cover_points(const CandidateInstance& cand, const GroundTruth& gt) {
  std::vector<int> out(gt.classes.size(), 0);
  for (std::size_t c = 0; c < gt.classes.size(); ++c)
    for (const auto& p : gt.classes[c].points)
      if (cand.mask.test(static_cast<int>(std::floor(p.x)), static_cast<int>(std::floor(p.y))))
        ++out[c];
  return out;
}

struct ClusterAssignment {
  std::vector<int> class_to_cluster;  // -1 = unmatched (predicted count 0)
  std::vector<int> cluster_to_class;  // -1 = unassigned
  std::vector<std::vector<int>> affinity;  // [cluster][class]
};

namespace detail {

inline std::map<int, const CandidateInstance*> index_candidates(const CountPrediction& pred) {
  std::map<int, const CandidateInstance*> by_id;
  for (const auto& c : pred.candidates) by_id[c.id] = &c;
  return by_id;
}

// Class holding most of the candidate's covered points; ties go to the lower
// class index; -1 when it covers none.
inline int dominant_class(const std::vector<int>& covered) {
  int best = -1;
  for (std::size_t c = 0; c < covered.size(); ++c)
    if (covered[c] > 0 && (best < 0 || covered[c] > covered[best])) best = static_cast<int>(c);
  return best;
}

}  // namespace detail

// One-to-one greedy matching of clusters to GT classes by shared instances.
inline ClusterAssignment match_clusters(const CountPrediction& pred, const GroundTruth& gt) {
  const std::size_t nk = pred.clusters.size();
  const std::size_t nc = gt.classes.size();
  ClusterAssignment a{std::vector<int>(nc, -1), std::vector<int>(nk, -1),
                      std::vector<std::vector<int>>(nk, std::vector<int>(nc, 0))};
  const auto by_id = detail::index_candidates(pred);
  for (std::size_t k = 0; k < nk; ++k)
    for (int id : pred.clusters[k].members) {
      auto it = by_id.find(id);
      if (it == by_id.end())
        throw std::invalid_argument("cluster member " + std::to_string(id) +
                                    " is not a candidate of this image");
      const int cls = detail::dominant_class(cover_points(*it->second, gt));
      if (cls >= 0) ++a.affinity[k][cls];
    }

  struct Pair {
    int affinity;
    std::size_t cluster_size;
    int cls;
    int cluster;
  };
  std::vector<Pair> pairs;
  for (std::size_t k = 0; k < nk; ++k)
    for (std::size_t c = 0; c < nc; ++c)
      if (a.affinity[k][c] > 0)
        pairs.push_back({a.affinity[k][c], pred.clusters[k].size(), static_cast<int>(c),
                         static_cast<int>(k)});
  std::sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) {
    if (x.affinity != y.affinity) return x.affinity > y.affinity;
    if (x.cluster_size != y.cluster_size) return x.cluster_size > y.cluster_size;
    if (x.cls != y.cls) return x.cls < y.cls;
    return x.cluster < y.cluster;
  });
  for (const auto& p : pairs) {
    if (a.class_to_cluster[p.cls] >= 0 || a.cluster_to_class[p.cluster] >= 0) continue;
    a.class_to_cluster[p.cls] = p.cluster;
    a.cluster_to_class[p.cluster] = p.cls;
  }
  return a;
}

struct CountPair {
  double predicted = 0;
  double ground_truth = 0;
};

// One (image, class) unit per GT class: matched cluster size vs GT count.
inline std::vector<CountPair> count_pairs(const CountPrediction& pred, const GroundTruth& gt,
                                          const ClusterAssignment& a) {
  std::vector<CountPair> out;
  for (std::size_t c = 0; c < gt.classes.size(); ++c) {
    const int k = a.class_to_cluster[c];
    out.push_back({k >= 0 ? static_cast<double>(pred.clusters[k].size()) : 0.0,
                   static_cast<double>(gt.classes[c].points.size())});
  }
  return out;
}

struct CountMetrics {
  double mae = 0;
  double rmse = 0;
  double nae = 0;
  double sre = 0;
};

// NAE and SRE average over the units with a nonzero GT count.
inline CountMetrics compute_count_metrics(std::span<const CountPair> pairs) {
  if (pairs.empty()) throw std::invalid_argument("compute_count_metrics: no units");
  CountMetrics m;
  double abs_sum = 0, sq_sum = 0, nae_sum = 0, sre_sum = 0;
  std::size_t normalized = 0;
  for (const auto& p : pairs) {
    if (p.ground_truth < 0) throw std::invalid_argument("negative ground-truth count");
    const double e = p.predicted - p.ground_truth;
    abs_sum += std::abs(e);
    sq_sum += e * e;
    if (p.ground_truth > 0) {
      nae_sum += std::abs(e) / p.ground_truth;
      sre_sum += e * e / p.ground_truth;
      ++normalized;
    }
  }
  const double n = static_cast<double>(pairs.size());
  m.mae = abs_sum / n;
  m.rmse = std::sqrt(sq_sum / n);
  if (normalized > 0) {
    m.nae = nae_sum / static_cast<double>(normalized);
    m.sre = sre_sum / static_cast<double>(normalized);
  }
  return m;
}

struct PrfCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

struct Prf {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

inline Prf prf_from_counts(const PrfCounts& c) {
  Prf r;
  const std::size_t predicted = c.tp + c.fp;
  const std::size_t actual = c.tp + c.fn;
  r.precision = predicted > 0 ? static_cast<double>(c.tp) / predicted : 0.0;
  if (actual > 0)
    r.recall = static_cast<double>(c.tp) / actual;
  else
    r.recall = predicted == 0 ? 1.0 : 0.0;
  r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

// Greedy instance matching: instances by descending mask area claim one
// uncovered GT point each (own-class points first). Members of clusters with
// no matched class are false positives.
inline PrfCounts match_instances(const CountPrediction& pred, const GroundTruth& gt,
                                 const ClusterAssignment& a) {
  struct Instance {
    const CandidateInstance* cand;
    int cls;  // class of its cluster, -1 if unassigned
  };
  const auto by_id = detail::index_candidates(pred);
  std::vector<Instance> instances;
  for (std::size_t k = 0; k < pred.clusters.size(); ++k)
    for (int id : pred.clusters[k].members) {
      auto it = by_id.find(id);
      if (it == by_id.end())
        throw std::invalid_argument("cluster member " + std::to_string(id) +
                                    " is not a candidate of this image");
      instances.push_back({it->second, a.cluster_to_class[k]});
    }
  std::stable_sort(instances.begin(), instances.end(), [](const Instance& x, const Instance& y) {
    if (x.cand->mask.area() != y.cand->mask.area()) return x.cand->mask.area() > y.cand->mask.area();
    return x.cand->id < y.cand->id;
  });

  std::vector<std::vector<bool>> claimed;
  for (const auto& c : gt.classes) claimed.emplace_back(c.points.size(), false);

  auto try_claim = [&](const BinaryMask& m, std::size_t c) {
    const auto& pts = gt.classes[c].points;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (claimed[c][i]) continue;
      if (m.test(static_cast<int>(std::floor(pts[i].x)), static_cast<int>(std::floor(pts[i].y)))) {
        claimed[c][i] = true;
        return true;
      }
    }
    return false;
  };

  PrfCounts counts;
  for (const auto& inst : instances) {
    bool hit = false;
    if (inst.cls >= 0) {
      hit = try_claim(inst.cand->mask, static_cast<std::size_t>(inst.cls));
      for (std::size_t c = 0; !hit && c < gt.classes.size(); ++c) hit = try_claim(inst.cand->mask, c);
    }
    if (hit)
      ++counts.tp;
    else
      ++counts.fp;
  }
  for (const auto& row : claimed)
    for (bool b : row)
      if (!b) ++counts.fn;
  return counts;
}

inline Prf compute_prf(const CountPrediction& pred, const GroundTruth& gt) {
  return prf_from_counts(match_instances(pred, gt, match_clusters(pred, gt)));
}

struct ImageEvaluation {
  std::string image;
  std::vector<CountPair> units;
  PrfCounts prf;
  std::size_t gt_total = 0;
  std::size_t predicted_total = 0;  // sum of matched cluster sizes
  std::size_t candidates = 0;
};

inline ImageEvaluation evaluate_image(const std::string& image, const CountPrediction& pred,
                                      const GroundTruth& gt) {
  ImageEvaluation ev;
  ev.image = image;
  const auto a = match_clusters(pred, gt);
  ev.units = count_pairs(pred, gt, a);
  ev.prf = match_instances(pred, gt, a);
  ev.gt_total = gt.total();
  for (const auto& u : ev.units) ev.predicted_total += static_cast<std::size_t>(u.predicted);
  ev.candidates = pred.candidates.size();
  return ev;
}

struct MetricsReport {
  CountMetrics counts;
  Prf prf;
  PrfCounts totals;
  std::size_t n_units = 0;
  std::size_t n_images = 0;
};

// Count metrics over all (image, class) units; P/R/F1 from summed TP/FP/FN.
inline MetricsReport aggregate(std::span<const ImageEvaluation> images) {
  MetricsReport r;
  std::vector<CountPair> units;
  for (const auto& im : images) {
    units.insert(units.end(), im.units.begin(), im.units.end());
    r.totals.tp += im.prf.tp;
    r.totals.fp += im.prf.fp;
    r.totals.fn += im.prf.fn;
  }
  r.n_units = units.size();
  r.n_images = images.size();
  if (!units.empty()) r.counts = compute_count_metrics(units);
  r.prf = prf_from_counts(r.totals);
  return r;
}

inline nlohmann::json report_to_json(const MetricsReport& r,
                                     std::span<const ImageEvaluation> images = {}) {
  nlohmann::json j = {{"mae", r.counts.mae},
                      {"rmse", r.counts.rmse},
                      {"nae", r.counts.nae},
                      {"sre", r.counts.sre},
                      {"precision", r.prf.precision},
                      {"recall", r.prf.recall},
                      {"f1", r.prf.f1},
                      {"n_units", r.n_units},
                      {"n_images", r.n_images},
                      {"tp", r.totals.tp},
                      {"fp", r.totals.fp},
                      {"fn", r.totals.fn}};
  auto per_image = nlohmann::json::array();
  for (const auto& im : images) {
    auto units = nlohmann::json::array();
    for (const auto& u : im.units) units.push_back({u.predicted, u.ground_truth});
    per_image.push_back({{"image", im.image},
                         {"gt_total", im.gt_total},
                         {"predicted_total", im.predicted_total},
                         {"candidates", im.candidates},
                         {"tp", im.prf.tp},
                         {"fp", im.prf.fp},
                         {"fn", im.prf.fn},
                         {"units", units}});
  }
  j["images"] = per_image;
  return j;
}

}  // namespace occam
