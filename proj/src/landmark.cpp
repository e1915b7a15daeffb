#include "rmat/landmark.hpp"

#include <algorithm>
#include <cmath>

#include "rmat/error.hpp"

namespace rmat {

NeighborhoodGraph build_neighborhood(const Frame& frame, int anchor, int k, bool include_anchor) {
  const int n = static_cast<int>(frame.patches.size());
  if (n == 0) throw ValidationError("build_neighborhood: empty frame");
  if (anchor < 0 || anchor >= n) {
    throw ValidationError("build_neighborhood: anchor " + std::to_string(anchor) +
                          " out of range for frame of " + std::to_string(n) + " patches");
  }
  if (k < 1) throw ValidationError("build_neighborhood: K must be >= 1");

  const Patch& a = frame.patches[static_cast<std::size_t>(anchor)];
  std::vector<std::pair<double, int>> ranked;  // (squared distance, index)
  ranked.reserve(static_cast<std::size_t>(n) - 1);
  for (int i = 0; i < n; ++i) {
    if (i == anchor) continue;
    const Patch& p = frame.patches[static_cast<std::size_t>(i)];
    const double du = p.center_u - a.center_u;
    const double dv = p.center_v - a.center_v;
    ranked.emplace_back(du * du + dv * dv, i);
  }
  std::sort(ranked.begin(), ranked.end());  // ties fall back to ascending index

  NeighborhoodGraph g;
  g.k = k;
  if (include_anchor) {
    g.vertices.push_back(anchor);
    g.anchor_pos = 0;
  }
  const int take = std::min<int>(k, static_cast<int>(ranked.size()));
  for (int i = 0; i < take; ++i) g.vertices.push_back(ranked[static_cast<std::size_t>(i)].second);
  if (g.vertices.empty()) {
    throw ValidationError("build_neighborhood: no vertices (single-patch frame with the anchor "
                          "excluded)");
  }
  return g;
}

Tensor adjacency(const NeighborhoodGraph& graph, bool self_loops) {
  const int v = static_cast<int>(graph.vertices.size());
  Tensor adj({v, v});
  for (int i = 0; i < v; ++i) {
    for (int j = 0; j < v; ++j) {
      adj[static_cast<std::size_t>(i) * v + j] = (i == j) ? (self_loops ? 1.0 : 0.0) : 1.0;
    }
  }
  return adj;
}

}  // namespace rmat
