#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rrtb/rng.hpp"

namespace rrtb {

using Vertex = std::int32_t;
inline constexpr Vertex kNoVertex = -1;

// Immutable recursive tree on vertices 0..n. Vertex 0 is the root and every
// other vertex i has parent(i) < i. Children are kept in CSR form, ordered by
// label.
class Tree {
 public:
  Tree() : Tree(std::vector<Vertex>{kNoVertex}) {}

  explicit Tree(std::vector<Vertex> parent) : parent_{std::move(parent)} {
    if (parent_.empty() || parent_[0] != kNoVertex) {
      throw std::invalid_argument("tree: vertex 0 must be the root (parent -1)");
    }
    const auto count = parent_.size();
    child_offset_.assign(count + 1, 0);
    for (std::size_t i = 1; i < count; ++i) {
      const Vertex p = parent_[i];
      if (p < 0 || static_cast<std::size_t>(p) >= i) {
        throw std::invalid_argument("tree: parent[" + std::to_string(i) + "] = " +
                                    std::to_string(p) + " violates parent[i] < i");
      }
      ++child_offset_[static_cast<std::size_t>(p) + 1];
    }
    std::partial_sum(child_offset_.begin(), child_offset_.end(), child_offset_.begin());
    children_.resize(count - 1);
    std::vector<std::size_t> fill(child_offset_.begin(), child_offset_.end() - 1);
    for (std::size_t i = 1; i < count; ++i) {
      children_[fill[static_cast<std::size_t>(parent_[i])]++] = static_cast<Vertex>(i);
    }
  }

  // n + 1
  std::size_t vertex_count() const { return parent_.size(); }
  // n
  std::size_t edge_count() const { return parent_.size() - 1; }

  Vertex parent(Vertex v) const { return parent_[static_cast<std::size_t>(v)]; }
  std::span<const Vertex> parents() const { return parent_; }

  std::span<const Vertex> children(Vertex v) const {
    const auto i = static_cast<std::size_t>(v);
    return {children_.data() + child_offset_[i], child_offset_[i + 1] - child_offset_[i]};
  }
  std::size_t outdegree(Vertex v) const { return children(v).size(); }
  bool is_leaf(Vertex v) const { return children(v).empty(); }

  friend bool operator==(const Tree& a, const Tree& b) { return a.parent_ == b.parent_; }

 private:
  std::vector<Vertex> parent_;
  std::vector<std::size_t> child_offset_;
  std::vector<Vertex> children_;
};

// An unrooted tree shape with arbitrary labels, as seen by an observer. Leaf
// flags mark the vertices that were leaves (childless) of the generating
// recursive tree; they coincide with degree <= 1 except possibly at a root of
// degree one.
class UnrootedTree {
 public:
  UnrootedTree() = default;

  // Builds from an edge list on vertices 0..vertex_count-1; leaves are the
  // vertices of degree <= 1.
  static UnrootedTree from_edges(std::size_t vertex_count,
                                 std::span<const std::pair<Vertex, Vertex>> edges) {
    if (vertex_count == 0 || edges.size() + 1 != vertex_count) {
      throw std::invalid_argument("unrooted tree: need vertex_count - 1 edges");
    }
    UnrootedTree t;
    t.build(vertex_count, edges);
    t.leaf_.resize(vertex_count);
    for (std::size_t v = 0; v < vertex_count; ++v) t.leaf_[v] = t.degree(static_cast<Vertex>(v)) <= 1;
    t.check_connected();
    return t;
  }

  // The observer's view of a recursive tree after relabeling vertex v as
  // new_label[v]. new_label must be a permutation of 0..n.
  static UnrootedTree relabeled(const Tree& tree, std::span<const Vertex> new_label) {
    const auto count = tree.vertex_count();
    if (new_label.size() != count) throw std::invalid_argument("relabel: permutation size mismatch");
    std::vector<std::pair<Vertex, Vertex>> edges;
    edges.reserve(count - 1);
    for (std::size_t i = 1; i < count; ++i) {
      edges.emplace_back(new_label[i], new_label[static_cast<std::size_t>(tree.parent(static_cast<Vertex>(i)))]);
    }
    UnrootedTree t;
    t.build(count, edges);
    t.leaf_.resize(count);
    for (std::size_t v = 0; v < count; ++v) {
      t.leaf_[static_cast<std::size_t>(new_label[v])] = tree.is_leaf(static_cast<Vertex>(v));
    }
    return t;
  }

  static UnrootedTree from_tree(const Tree& tree) {
    std::vector<Vertex> identity(tree.vertex_count());
    std::iota(identity.begin(), identity.end(), 0);
    return relabeled(tree, identity);
  }

  std::size_t vertex_count() const { return leaf_.size(); }

  std::span<const Vertex> neighbors(Vertex v) const {
    const auto i = static_cast<std::size_t>(v);
    return {adjacency_.data() + offset_[i], offset_[i + 1] - offset_[i]};
  }
  std::size_t degree(Vertex v) const { return neighbors(v).size(); }
  // Position of neighbors(v) in the flat adjacency array; indexes per-arc data.
  std::size_t arc_offset(Vertex v) const { return offset_[static_cast<std::size_t>(v)]; }
  std::size_t arc_count() const { return adjacency_.size(); }

  bool is_leaf(Vertex v) const { return leaf_[static_cast<std::size_t>(v)] != 0; }

 private:
  void build(std::size_t count, std::span<const std::pair<Vertex, Vertex>> edges) {
    offset_.assign(count + 1, 0);
    for (const auto& [a, b] : edges) {
      if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= count || static_cast<std::size_t>(b) >= count || a == b) {
        throw std::invalid_argument("unrooted tree: bad edge");
      }
      ++offset_[static_cast<std::size_t>(a) + 1];
      ++offset_[static_cast<std::size_t>(b) + 1];
    }
    std::partial_sum(offset_.begin(), offset_.end(), offset_.begin());
    adjacency_.resize(2 * edges.size());
    std::vector<std::size_t> fill(offset_.begin(), offset_.end() - 1);
    for (const auto& [a, b] : edges) {
      adjacency_[fill[static_cast<std::size_t>(a)]++] = b;
      adjacency_[fill[static_cast<std::size_t>(b)]++] = a;
    }
    for (std::size_t v = 0; v < count; ++v) {
      std::sort(adjacency_.begin() + static_cast<std::ptrdiff_t>(offset_[v]),
                adjacency_.begin() + static_cast<std::ptrdiff_t>(offset_[v + 1]));
    }
  }

  void check_connected() const {
    std::vector<char> seen(vertex_count(), 0);
    std::vector<Vertex> stack{0};
    seen[0] = 1;
    std::size_t reached = 1;
    while (!stack.empty()) {
      const Vertex v = stack.back();
      stack.pop_back();
      for (Vertex w : neighbors(v)) {
        if (!seen[static_cast<std::size_t>(w)]) {
          seen[static_cast<std::size_t>(w)] = 1;
          ++reached;
          stack.push_back(w);
        }
      }
    }
    if (reached != vertex_count()) throw std::invalid_argument("unrooted tree: edges do not form a tree");
  }

  std::vector<std::size_t> offset_;
  std::vector<Vertex> adjacency_;
  std::vector<char> leaf_;
};

// Uniformly random relabeling: result[v] is the new label of vertex v.
inline std::vector<Vertex> random_permutation(std::size_t count, RngStream& rng) {
  std::vector<Vertex> perm(count);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

// Breadth-first order and parent pointers of an unrooted tree hung from root.
struct RootedOrder {
  std::vector<Vertex> order;   // BFS order starting at root
  std::vector<Vertex> parent;  // kNoVertex at the root
  std::vector<std::uint32_t> depth;
};

inline RootedOrder bfs_from(const UnrootedTree& tree, Vertex root) {
  const auto count = tree.vertex_count();
  RootedOrder r;
  r.order.reserve(count);
  r.parent.assign(count, kNoVertex);
  r.depth.assign(count, 0);
  r.order.push_back(root);
  for (std::size_t head = 0; head < r.order.size(); ++head) {
    const Vertex v = r.order[head];
    for (Vertex w : tree.neighbors(v)) {
      if (w == r.parent[static_cast<std::size_t>(v)]) continue;
      r.parent[static_cast<std::size_t>(w)] = v;
      r.depth[static_cast<std::size_t>(w)] = r.depth[static_cast<std::size_t>(v)] + 1;
      r.order.push_back(w);
    }
  }
  return r;
}

// Recursive tree obtained by rooting an unrooted tree at root and labeling by
// BFS order. Returns the tree together with old -> new labels.
inline std::pair<Tree, std::vector<Vertex>> to_recursive_tree(const UnrootedTree& tree, Vertex root) {
  const auto r = bfs_from(tree, root);
  std::vector<Vertex> label(tree.vertex_count());
  for (std::size_t i = 0; i < r.order.size(); ++i) label[static_cast<std::size_t>(r.order[i])] = static_cast<Vertex>(i);
  std::vector<Vertex> parent(tree.vertex_count(), kNoVertex);
  for (std::size_t i = 1; i < r.order.size(); ++i) {
    parent[i] = label[static_cast<std::size_t>(r.parent[static_cast<std::size_t>(r.order[i])])];
  }
  return {Tree{std::move(parent)}, std::move(label)};
}

}  // namespace rrtb
