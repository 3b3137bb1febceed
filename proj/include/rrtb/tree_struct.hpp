#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "rrtb/rng.hpp"
#include "rrtb/tree.hpp"
#include "rrtb/tree_gen.hpp"

namespace rrtb {

struct StructuralSummary {
  std::vector<std::uint32_t> size_down;  // vertices in the subtree below v, seen from 0
  std::vector<std::uint32_t> depth;      // distance to vertex 0
  std::vector<std::uint32_t> phi;        // largest component left after deleting v
};

inline StructuralSummary structural_summary(const Tree& tree) {
  const auto count = tree.vertex_count();
  StructuralSummary s{std::vector<std::uint32_t>(count, 1), std::vector<std::uint32_t>(count, 0),
                      std::vector<std::uint32_t>(count, 0)};
  for (std::size_t i = 1; i < count; ++i) {
    s.depth[i] = s.depth[static_cast<std::size_t>(tree.parent(static_cast<Vertex>(i)))] + 1;
  }
  for (std::size_t i = count; i-- > 1;) {
    s.size_down[static_cast<std::size_t>(tree.parent(static_cast<Vertex>(i)))] += s.size_down[i];
  }
  const auto total = static_cast<std::uint32_t>(count);
  for (std::size_t v = 0; v < count; ++v) {
    std::uint32_t best = v == 0 ? 0 : total - s.size_down[v];
    for (Vertex c : tree.children(static_cast<Vertex>(v))) best = std::max(best, s.size_down[static_cast<std::size_t>(c)]);
    s.phi[v] = best;
  }
  return s;
}

// phi for an unrooted view, hung from vertex 0.
inline std::vector<std::uint32_t> phi_values(const UnrootedTree& tree) {
  const auto count = tree.vertex_count();
  const auto r = bfs_from(tree, 0);
  std::vector<std::uint32_t> size(count, 1);
  for (std::size_t k = count; k-- > 1;) {
    const Vertex v = r.order[k];
    size[static_cast<std::size_t>(r.parent[static_cast<std::size_t>(v)])] += size[static_cast<std::size_t>(v)];
  }
  const auto total = static_cast<std::uint32_t>(count);
  std::vector<std::uint32_t> phi(count, 0);
  for (std::size_t v = 0; v < count; ++v) {
    const Vertex up = r.parent[v];
    std::uint32_t best = 0;
    for (Vertex w : tree.neighbors(static_cast<Vertex>(v))) {
      best = std::max(best, w == up ? total - size[v] : size[static_cast<std::size_t>(w)]);
    }
    phi[v] = best;
  }
  return phi;
}

namespace detail {
inline std::vector<Vertex> argmin(const std::vector<std::uint32_t>& phi) {
  const auto best = *std::min_element(phi.begin(), phi.end());
  std::vector<Vertex> out;
  for (std::size_t v = 0; v < phi.size(); ++v) {
    if (phi[v] == best) out.push_back(static_cast<Vertex>(v));
  }
  return out;
}
}  // namespace detail

// All minimizers of phi in increasing label order (one or two vertices).
inline std::vector<Vertex> centroids(const Tree& tree) { return detail::argmin(structural_summary(tree).phi); }
inline std::vector<Vertex> centroids(const UnrootedTree& tree) { return detail::argmin(phi_values(tree)); }

struct LeafHit {
  Vertex leaf = kNoVertex;
  std::uint32_t distance = 0;
};

// Closest leaf to v; among equally close leaves the smallest label wins.
inline LeafHit nearest_leaf(const UnrootedTree& tree, Vertex v) {
  if (tree.is_leaf(v)) return {v, 0};
  std::vector<Vertex> frontier{v}, next;
  std::vector<char> seen(tree.vertex_count(), 0);
  seen[static_cast<std::size_t>(v)] = 1;
  for (std::uint32_t d = 1; !frontier.empty(); ++d) {
    next.clear();
    Vertex best = kNoVertex;
    for (Vertex u : frontier) {
      for (Vertex w : tree.neighbors(u)) {
        if (seen[static_cast<std::size_t>(w)]) continue;
        seen[static_cast<std::size_t>(w)] = 1;
        next.push_back(w);
        if (tree.is_leaf(w) && (best == kNoVertex || w < best)) best = w;
      }
    }
    if (best != kNoVertex) return {best, d};
    frontier.swap(next);
  }
  return {};  // unreachable: a finite tree has a leaf
}

// All leaves at minimum distance from v, in increasing label order.
inline std::vector<Vertex> nearest_leaves(const UnrootedTree& tree, Vertex v) {
  if (tree.is_leaf(v)) return {v};
  std::vector<Vertex> frontier{v}, next, hits;
  std::vector<char> seen(tree.vertex_count(), 0);
  seen[static_cast<std::size_t>(v)] = 1;
  while (!frontier.empty() && hits.empty()) {
    next.clear();
    for (Vertex u : frontier) {
      for (Vertex w : tree.neighbors(u)) {
        if (seen[static_cast<std::size_t>(w)]) continue;
        seen[static_cast<std::size_t>(w)] = 1;
        next.push_back(w);
        if (tree.is_leaf(w)) hits.push_back(w);
      }
    }
    frontier.swap(next);
  }
  std::sort(hits.begin(), hits.end());
  return hits;
}

inline LeafHit nearest_leaf(const Tree& tree, Vertex v) { return nearest_leaf(UnrootedTree::from_tree(tree), v); }

// Mean of a per-trial quantity with a 95% normal half-width.
struct MeanCi {
  double mean = 0.0;
  double ci_halfwidth = 0.0;
};

struct CentroidDepthStats {
  std::size_t trials = 0;
  MeanCi depth;             // depth of the centroid closest to the root
  MeanCi root_is_centroid;  // fraction of trials where that depth is 0
  MeanCi two_centroids;     // fraction of trials with two centroids
};

namespace detail {
class Accumulator {
 public:
  void add(double x) {
    ++n_;
    sum_ += x;
    sum_sq_ += x * x;
  }
  MeanCi result() const {
    if (n_ == 0) return {};
    const double n = static_cast<double>(n_);
    const double mean = sum_ / n;
    const double var = n > 1 ? std::max(0.0, (sum_sq_ - n * mean * mean) / (n - 1)) : 0.0;
    return {mean, 1.96 * std::sqrt(var / n)};
  }

 private:
  std::size_t n_ = 0;
  double sum_ = 0.0;
  double sum_sq_ = 0.0;
};
}  // namespace detail

inline CentroidDepthStats centroid_depth_stats(const Model& model, std::size_t n, std::size_t trials, RngStream& rng) {
  detail::Accumulator depth, root, two;
  for (std::size_t t = 0; t < trials; ++t) {
    const Tree tree = generate(model, n, rng);
    const auto s = structural_summary(tree);
    const auto c = detail::argmin(s.phi);
    std::uint32_t d = std::numeric_limits<std::uint32_t>::max();
    for (Vertex v : c) d = std::min(d, s.depth[static_cast<std::size_t>(v)]);
    depth.add(d);
    root.add(d == 0 ? 1.0 : 0.0);
    two.add(c.size() == 2 ? 1.0 : 0.0);
  }
  return {trials, depth.result(), root.result(), two.result()};
}

}  // namespace rrtb
