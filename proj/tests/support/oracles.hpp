#pragma once

// Independent reference implementations used only by tests. They work on
// dense buffers and plain containers and share no code with the library's
// algorithms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <random>
#include <set>
#include <vector>

namespace oracle {

using Dense = std::vector<std::uint8_t>;  // row-major, 0/1

inline double iou(const Dense& a, const Dense& b) {
  long inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += (a[i] && b[i]);
    uni += (a[i] || b[i]);
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / uni;
}

// 8-connected components as sets of flat indices (BFS).
inline std::set<std::set<int>> flood_fill(const Dense& m, int w, int h) {
  std::set<std::set<int>> out;
  std::vector<bool> seen(m.size(), false);
  for (int start = 0; start < w * h; ++start) {
    if (!m[start] || seen[start]) continue;
    std::set<int> comp;
    std::deque<int> queue{start};
    seen[start] = true;
    while (!queue.empty()) {
      const int p = queue.front();
      queue.pop_front();
      comp.insert(p);
      const int px = p % w, py = p / w;
      for (int ny = py - 1; ny <= py + 1; ++ny)
        for (int nx = px - 1; nx <= px + 1; ++nx) {
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const int q = ny * w + nx;
          if (m[q] && !seen[q]) {
            seen[q] = true;
            queue.push_back(q);
          }
        }
    }
    out.insert(comp);
  }
  return out;
}

inline Dense random_mask(std::mt19937& rng, int w, int h, double density) {
  std::bernoulli_distribution on(density);
  Dense m(static_cast<std::size_t>(w) * h);
  for (auto& v : m) v = on(rng);
  return m;
}

// Blobby random mask: union of a few random rectangles.
inline Dense random_blobs(std::mt19937& rng, int w, int h, int max_rects) {
  Dense m(static_cast<std::size_t>(w) * h, 0);
  std::uniform_int_distribution<int> count(1, max_rects);
  const int n = count(rng);
  for (int r = 0; r < n; ++r) {
    std::uniform_int_distribution<int> ux(0, w - 1), uy(0, h - 1);
    int x0 = ux(rng), x1 = ux(rng), y0 = uy(rng), y1 = uy(rng);
    if (x0 > x1) std::swap(x0, x1);
    if (y0 > y1) std::swap(y0, y1);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) m[static_cast<std::size_t>(y) * w + x] = 1;
  }
  return m;
}

using Partition = std::set<std::set<int>>;

// Threshold FINCH executed literally, round by round: centroids of the current
// clusters, all pairwise distances, first-neighbor table (lowest index on
// ties), one-directional links made symmetric, links kept only under the
// round's threshold, connected components merged. Stops when nothing links.
// Clusters are indexed in order of their smallest member.
inline Partition threshold_finch(const std::vector<std::vector<double>>& x,
                                 const std::vector<double>& schedule) {
  std::vector<std::set<int>> clusters;
  for (int i = 0; i < static_cast<int>(x.size()); ++i) clusters.push_back({i});
  for (int round = 0;; ++round) {
    const double theta = schedule[std::min<std::size_t>(round, schedule.size() - 1)];
    const std::size_t n = clusters.size();
    std::vector<std::vector<double>> cent;
    for (const auto& c : clusters) {
      std::vector<double> m(x[0].size(), 0.0);
      for (int i : c)
        for (std::size_t d = 0; d < m.size(); ++d) m[d] += x[i][d];
      for (auto& v : m) v /= static_cast<double>(c.size());
      cent.push_back(m);
    }
    std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0;
        for (std::size_t d = 0; d < cent[i].size(); ++d) s += (cent[i][d] - cent[j][d]) * (cent[i][d] - cent[j][d]);
        dist[i][j] = std::sqrt(s);
      }
    std::vector<int> nn(n, -1);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j && (nn[i] < 0 || dist[i][j] < dist[i][nn[i]])) nn[i] = static_cast<int>(j);
    std::vector<std::vector<bool>> link(n, std::vector<bool>(n, false));
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (nn[i] < 0) continue;
      const auto j = static_cast<std::size_t>(nn[i]);
      if (dist[i][j] < theta) {
        link[i][j] = link[j][i] = true;
        any = true;
      }
    }
    if (!any) break;
    std::vector<int> comp(n, -1);
    int ncomp = 0;
    for (std::size_t s = 0; s < n; ++s) {
      if (comp[s] >= 0) continue;
      std::deque<std::size_t> q{s};
      comp[s] = ncomp;
      while (!q.empty()) {
        const auto u = q.front();
        q.pop_front();
        for (std::size_t v = 0; v < n; ++v)
          if (link[u][v] && comp[v] < 0) {
            comp[v] = ncomp;
            q.push_back(v);
          }
      }
      ++ncomp;
    }
    std::vector<std::set<int>> next(ncomp);
    for (std::size_t i = 0; i < n; ++i) next[comp[i]].insert(clusters[i].begin(), clusters[i].end());
    std::sort(next.begin(), next.end(),
              [](const std::set<int>& a, const std::set<int>& b) { return *a.begin() < *b.begin(); });
    clusters = next;
  }
  return Partition(clusters.begin(), clusters.end());
}

}  // namespace oracle
