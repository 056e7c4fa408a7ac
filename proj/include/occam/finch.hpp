#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "occam/embedding.hpp"

namespace occam {

struct Cluster {
  std::vector<int> members;  // ascending candidate ids
  std::vector<double> centroid;
  std::size_t size() const { return members.size(); }
};

// Per-iteration merge thresholds; iterations past the listed ones reuse the
// last value.
struct ThresholdSchedule {
  std::vector<double> initial;

  double at(std::size_t iteration) const {  // 1-based
    if (initial.empty()) throw std::invalid_argument("empty threshold schedule");
    return initial[std::min(iteration, initial.size()) - 1];
  }

  void validate() const {
    if (initial.empty()) throw std::invalid_argument("threshold schedule is empty");
    for (std::size_t i = 0; i < initial.size(); ++i) {
      if (!(initial[i] > 0)) throw std::invalid_argument("thresholds must be > 0");
      if (i > 0 && initial[i] > initial[i - 1])
        throw std::invalid_argument("threshold schedule must be non-increasing");
    }
  }
};

using Edge = std::pair<int, int>;  // i < j

inline double euclidean(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("feature dimension mismatch: " + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()));
  double s = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return std::sqrt(s);
}

namespace detail {

struct NeighborTable {
  std::vector<int> nn;         // -1 when there is no other point
  std::vector<double> nn_dist;
  std::vector<double> dist;    // full n x n matrix
};

inline NeighborTable nearest_neighbors(const std::vector<std::vector<double>>& pts) {
  const std::size_t n = pts.size();
  NeighborTable t{std::vector<int>(n, -1), std::vector<double>(n, 0.0),
                  std::vector<double>(n * n, 0.0)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      t.dist[i * n + j] = t.dist[j * n + i] = euclidean(pts[i], pts[j]);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      // Strict < keeps the lowest index on ties.
      if (t.nn[i] < 0 || t.dist[i * n + j] < t.nn_dist[i]) {
        t.nn[i] = static_cast<int>(j);
        t.nn_dist[i] = t.dist[i * n + j];
      }
    }
  return t;
}

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;  // root is always the lowest index
  }

 private:
  std::vector<std::size_t> parent_;
};

inline std::vector<Edge> normalize_edges(std::vector<Edge> edges) {
  for (auto& e : edges)
    if (e.first > e.second) std::swap(e.first, e.second);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

// Groups of positions joined by `edges`, ordered by their lowest position.
inline std::vector<std::vector<int>> components(std::size_t n, const std::vector<Edge>& edges) {
  DisjointSet ds(n);
  for (const auto& [a, b] : edges) ds.unite(a, b);
  std::vector<std::vector<int>> groups;
  std::vector<int> slot(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = ds.find(i);
    if (slot[r] < 0) {
      slot[r] = static_cast<int>(groups.size());
      groups.emplace_back();
    }
    groups[slot[r]].push_back(static_cast<int>(i));
  }
  return groups;
}

inline std::vector<double> mean_of(const std::vector<std::vector<double>>& vecs,
                                   const std::vector<int>& positions) {
  std::vector<double> c(vecs[positions.front()].size(), 0.0);
  for (int p : positions)
    for (std::size_t k = 0; k < c.size(); ++k) c[k] += vecs[p][k];
  for (double& x : c) x /= static_cast<double>(positions.size());
  return c;
}

inline void check_dims(std::span<const FeatureVector> features) {
  for (const auto& f : features)
    if (f.values.size() != features.front().values.size())
      throw std::invalid_argument("feature dimension mismatch");
}

inline std::vector<Cluster> finalize(std::span<const FeatureVector> features,
                                     const std::vector<std::vector<int>>& groups,
                                     const std::vector<std::vector<double>>& values) {
  std::vector<Cluster> out;
  for (const auto& g : groups) {
    Cluster c;
    for (int p : g) c.members.push_back(features[p].candidate_id);
    std::sort(c.members.begin(), c.members.end());
    c.centroid = mean_of(values, g);
    out.push_back(std::move(c));
  }
  std::stable_sort(out.begin(), out.end(), [](const Cluster& a, const Cluster& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a.members.front() < b.members.front();
  });
  return out;
}

}  // namespace detail

// Pairs (i, j) where one is the other's nearest centroid and their distance
// is strictly below theta.
inline std::vector<Edge> partial_neighbor_edges(const std::vector<std::vector<double>>& centroids,
                                                double theta) {
  if (centroids.empty()) throw std::invalid_argument("partial_neighbor_edges: no centroids");
  if (!(theta > 0)) throw std::invalid_argument("partial_neighbor_edges: theta must be > 0");
  const auto t = detail::nearest_neighbors(centroids);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < centroids.size(); ++i)
    if (t.nn[i] >= 0 && t.nn_dist[i] < theta) edges.emplace_back(static_cast<int>(i), t.nn[i]);
  return detail::normalize_edges(std::move(edges));
}

struct FinchStats {
  std::size_t iterations = 0;  // rounds that merged something
  std::vector<std::size_t> cluster_counts;  // after each merging round
};

// Threshold-gated FINCH: starting from singletons, repeatedly merge connected
// components of the partial-nearest-neighbor graph over cluster centroids until
// no pair qualifies. Singletons may survive.
inline std::vector<Cluster> finch_threshold_cluster(std::span<const FeatureVector> features,
                                                    const ThresholdSchedule& schedule,
                                                    FinchStats* stats = nullptr) {
  schedule.validate();
  if (features.empty()) return {};
  detail::check_dims(features);

  std::vector<std::vector<double>> values;
  values.reserve(features.size());
  for (const auto& f : features) values.push_back(f.values);

  // Clusters as position lists, kept ordered by lowest member position.
  std::vector<std::vector<int>> clusters;
  for (std::size_t i = 0; i < features.size(); ++i) clusters.push_back({static_cast<int>(i)});

  for (std::size_t iteration = 1;; ++iteration) {
    if (clusters.size() < 2) break;
    std::vector<std::vector<double>> centroids;
    centroids.reserve(clusters.size());
    for (const auto& c : clusters) centroids.push_back(detail::mean_of(values, c));
    const auto edges = partial_neighbor_edges(centroids, schedule.at(iteration));
    if (edges.empty()) break;

    std::vector<std::vector<int>> merged;
    for (const auto& group : detail::components(clusters.size(), edges)) {
      std::vector<int> members;
      for (int g : group) members.insert(members.end(), clusters[g].begin(), clusters[g].end());
      std::sort(members.begin(), members.end());
      merged.push_back(std::move(members));
    }
    clusters = std::move(merged);
    if (stats) {
      stats->iterations = iteration;
      stats->cluster_counts.push_back(clusters.size());
    }
  }
  return detail::finalize(features, clusters, values);
}

// First partition of the original parameter-free FINCH: link i-j when
// nn(i)=j, nn(j)=i or nn(i)=nn(j), then merge connected components once.
inline std::vector<Cluster> original_finch_level0(std::span<const FeatureVector> features) {
  if (features.empty()) return {};
  detail::check_dims(features);
  std::vector<std::vector<double>> values;
  for (const auto& f : features) values.push_back(f.values);
  const auto t = detail::nearest_neighbors(values);
  const std::size_t n = values.size();
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    if (t.nn[i] < 0) continue;
    edges.emplace_back(static_cast<int>(i), t.nn[i]);
    for (std::size_t j = i + 1; j < n; ++j)
      if (t.nn[j] == t.nn[i]) edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
  }
  const auto groups = detail::components(n, detail::normalize_edges(std::move(edges)));
  return detail::finalize(features, groups, values);
}

}  // namespace occam
