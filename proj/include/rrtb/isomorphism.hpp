#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "rrtb/tree.hpp"
#include "rrtb/tree_struct.hpp"

namespace rrtb {

using BigInt = boost::multiprecision::cpp_int;
using BigRational = boost::multiprecision::cpp_rational;

using CodeId = std::uint32_t;

// Interns rooted unlabeled trees. A tree is identified by the sorted list of
// its children's codes; lookup compares full keys, so equal ids mean
// isomorphic trees and nothing else. Code 0 is the single vertex.
class CodeTable {
 public:
  CodeTable() { intern({}); }

  CodeId intern(std::vector<CodeId> sorted_children) {
    if (auto it = ids_.find(sorted_children); it != ids_.end()) return it->second;
    const auto id = static_cast<CodeId>(keys_.size());
    keys_.push_back(sorted_children);
    ids_.emplace(std::move(sorted_children), id);
    return id;
  }

  std::size_t size() const { return keys_.size(); }
  const std::vector<CodeId>& children(CodeId id) const { return keys_[id]; }

  // Nested-parenthesis form with children in lexicographic order; comparable
  // across tables. Quadratic in the worst case, meant for small trees.
  std::string canonical_string(CodeId id) const {
    std::vector<std::string> parts;
    for (CodeId c : children(id)) parts.push_back(canonical_string(c));
    std::sort(parts.begin(), parts.end());
    std::string out = "(";
    for (const auto& p : parts) out += p;
    out += ')';
    return out;
  }

 private:
  struct KeyHash {
    std::size_t operator()(const std::vector<CodeId>& key) const {
      std::uint64_t h = 0xcbf29ce484222325ull ^ key.size();
      for (CodeId c : key) h = (h ^ c) * 0x100000001b3ull;
      return static_cast<std::size_t>(h ^ (h >> 29));
    }
  };
  std::unordered_map<std::vector<CodeId>, CodeId, KeyHash> ids_;
  std::vector<std::vector<CodeId>> keys_;
};

// Code of the subtree below each vertex when the tree hangs from root.
inline std::vector<CodeId> canonical_codes_rooted(const UnrootedTree& tree, Vertex root, CodeTable& table) {
  const auto r = bfs_from(tree, root);
  std::vector<CodeId> code(tree.vertex_count(), 0);
  std::vector<CodeId> key;
  for (std::size_t k = r.order.size(); k-- > 0;) {
    const Vertex v = r.order[k];
    key.clear();
    for (Vertex w : tree.neighbors(v)) {
      if (w != r.parent[static_cast<std::size_t>(v)]) key.push_back(code[static_cast<std::size_t>(w)]);
    }
    std::sort(key.begin(), key.end());
    code[static_cast<std::size_t>(v)] = table.intern(key);
  }
  return code;
}

inline std::vector<CodeId> canonical_codes_rooted(const Tree& tree, Vertex root, CodeTable& table) {
  return canonical_codes_rooted(UnrootedTree::from_tree(tree), root, table);
}

inline std::string canonical_string_rooted(const UnrootedTree& tree, Vertex root) {
  CodeTable table;
  return table.canonical_string(canonical_codes_rooted(tree, root, table)[static_cast<std::size_t>(root)]);
}

// Shape identifier of an unrooted tree: the smaller rooted string over its
// centroids.
inline std::string canonical_string_unrooted(const UnrootedTree& tree) {
  std::string best;
  for (Vertex c : centroids(tree)) {
    auto s = canonical_string_rooted(tree, c);
    if (best.empty() || s < best) best = std::move(s);
  }
  return best;
}

// Position of w in neighbors(v), as an index into per-arc arrays.
inline std::size_t arc_index(const UnrootedTree& tree, Vertex v, Vertex w) {
  const auto nb = tree.neighbors(v);
  const auto it = std::lower_bound(nb.begin(), nb.end(), w);
  if (it == nb.end() || *it != w) throw std::invalid_argument("arc_index: vertices are not adjacent");
  return tree.arc_offset(v) + static_cast<std::size_t>(it - nb.begin());
}

// Rooted codes for every directed edge and every choice of root, from one
// downward pass and one upward pass. For the arc (v, w), arc_code is the code
// of the part containing w, hung from w, once the edge is cut; arc_size is its
// vertex count.
class AllRootsCodes {
 public:
  explicit AllRootsCodes(const UnrootedTree& tree) : order_{bfs_from(tree, 0)} {
    const auto count = tree.vertex_count();
    std::vector<std::uint32_t> size(count, 1);
    std::vector<CodeId> down(count, 0), up(count, 0);
    std::vector<CodeId> key;

    for (std::size_t k = count; k-- > 0;) {
      const Vertex v = order_.order[k];
      const auto vi = static_cast<std::size_t>(v);
      key.clear();
      for (Vertex w : tree.neighbors(v)) {
        if (w == order_.parent[vi]) continue;
        key.push_back(down[static_cast<std::size_t>(w)]);
        size[vi] += size[static_cast<std::size_t>(w)];
      }
      std::sort(key.begin(), key.end());
      down[vi] = table_.intern(key);
    }

    root_code_.assign(count, 0);
    std::vector<CodeId> all;
    std::unordered_map<CodeId, CodeId> without;
    for (Vertex p : order_.order) {
      const auto pi = static_cast<std::size_t>(p);
      all.clear();
      for (Vertex w : tree.neighbors(p)) {
        all.push_back(w == order_.parent[pi] ? up[pi] : down[static_cast<std::size_t>(w)]);
      }
      std::sort(all.begin(), all.end());
      root_code_[pi] = table_.intern(all);
      without.clear();
      for (Vertex c : tree.neighbors(p)) {
        if (c == order_.parent[pi]) continue;
        const CodeId dc = down[static_cast<std::size_t>(c)];
        auto it = without.find(dc);
        if (it == without.end()) {
          key = all;
          key.erase(std::lower_bound(key.begin(), key.end(), dc));
          it = without.emplace(dc, table_.intern(key)).first;
        }
        up[static_cast<std::size_t>(c)] = it->second;
      }
    }

    arc_code_.resize(tree.arc_count());
    arc_size_.resize(tree.arc_count());
    const auto total = static_cast<std::uint32_t>(count);
    for (std::size_t v = 0; v < count; ++v) {
      std::size_t a = tree.arc_offset(static_cast<Vertex>(v));
      for (Vertex w : tree.neighbors(static_cast<Vertex>(v))) {
        const bool toward_parent = w == order_.parent[v];
        arc_code_[a] = toward_parent ? up[v] : down[static_cast<std::size_t>(w)];
        arc_size_[a] = toward_parent ? total - size[v] : size[static_cast<std::size_t>(w)];
        ++a;
      }
    }

    std::unordered_map<CodeId, std::size_t> orbit;
    for (CodeId c : root_code_) ++orbit[c];
    aut_.resize(count);
    for (std::size_t v = 0; v < count; ++v) aut_[v] = orbit[root_code_[v]];
  }

  CodeId arc_code(std::size_t arc) const { return arc_code_[arc]; }
  std::uint32_t arc_size(std::size_t arc) const { return arc_size_[arc]; }
  // Code of the whole tree hung from u.
  CodeId root_code(Vertex u) const { return root_code_[static_cast<std::size_t>(u)]; }
  // Number of vertices in u's automorphism orbit.
  std::size_t aut(Vertex u) const { return aut_[static_cast<std::size_t>(u)]; }
  const CodeTable& table() const { return table_; }
  // BFS from vertex 0 used for the passes.
  const RootedOrder& order() const { return order_; }

 private:
  RootedOrder order_;
  CodeTable table_;
  std::vector<CodeId> root_code_;
  std::vector<CodeId> arc_code_;
  std::vector<std::uint32_t> arc_size_;
  std::vector<std::size_t> aut_;
};

inline std::size_t aut_vertex(const UnrootedTree& tree, Vertex v) { return AllRootsCodes{tree}.aut(v); }
inline std::size_t aut_vertex(const Tree& tree, Vertex v) { return aut_vertex(UnrootedTree::from_tree(tree), v); }

namespace detail {
// Multiplicities of equal values in a list of codes.
inline std::vector<std::size_t> multiplicities(std::vector<CodeId> codes) {
  std::sort(codes.begin(), codes.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < codes.size();) {
    std::size_t j = i;
    while (j < codes.size() && codes[j] == codes[i]) ++j;
    out.push_back(j - i);
    i = j;
  }
  return out;
}

inline BigInt factorial(std::size_t k) {
  BigInt f = 1;
  for (std::size_t i = 2; i <= k; ++i) f *= i;
  return f;
}

inline std::vector<CodeId> child_codes(const UnrootedTree& tree, const RootedOrder& r, const std::vector<CodeId>& code,
                                       Vertex v) {
  std::vector<CodeId> out;
  for (Vertex w : tree.neighbors(v)) {
    if (w != r.parent[static_cast<std::size_t>(v)]) out.push_back(code[static_cast<std::size_t>(w)]);
  }
  return out;
}
}  // namespace detail

// Product of l! over the multiplicities l of isomorphic child subtrees of v,
// with the tree hung from root.
inline BigInt aut_bar(const UnrootedTree& tree, Vertex root, Vertex v) {
  CodeTable table;
  const auto code = canonical_codes_rooted(tree, root, table);
  const auto r = bfs_from(tree, root);
  BigInt out = 1;
  for (auto m : detail::multiplicities(detail::child_codes(tree, r, code, v))) out *= detail::factorial(m);
  return out;
}

inline BigInt aut_bar(const Tree& tree, Vertex root, Vertex v) {
  return aut_bar(UnrootedTree::from_tree(tree), root, v);
}

inline double log_aut_bar(const UnrootedTree& tree, Vertex root, Vertex v) {
  CodeTable table;
  const auto code = canonical_codes_rooted(tree, root, table);
  const auto r = bfs_from(tree, root);
  double out = 0.0;
  for (auto m : detail::multiplicities(detail::child_codes(tree, r, code, v))) out += std::lgamma(static_cast<double>(m) + 1.0);
  return out;
}

inline constexpr std::size_t kExactLabelingCap = 20;

// Number of parent sequences whose tree has this shape with vertex 0 sent to
// root: (n+1)! / prod_v (subtree size * aut_bar), hung from root.
inline BigInt labeling_count(const UnrootedTree& tree, Vertex root) {
  const auto count = tree.vertex_count();
  if (count - 1 > kExactLabelingCap) throw std::invalid_argument("labeling_count: exact mode needs n <= 20");
  CodeTable table;
  const auto code = canonical_codes_rooted(tree, root, table);
  const auto r = bfs_from(tree, root);
  std::vector<std::uint32_t> size(count, 1);
  for (std::size_t k = count; k-- > 1;) {
    const auto v = static_cast<std::size_t>(r.order[k]);
    size[static_cast<std::size_t>(r.parent[v])] += size[v];
  }
  BigInt denom = 1;
  for (std::size_t v = 0; v < count; ++v) {
    denom *= size[v];
    for (auto m : detail::multiplicities(detail::child_codes(tree, r, code, static_cast<Vertex>(v)))) {
      denom *= detail::factorial(m);
    }
  }
  return detail::factorial(count) / denom;
}

inline BigInt labeling_count(const Tree& tree, Vertex root) {
  return labeling_count(UnrootedTree::from_tree(tree), root);
}

inline double log_labeling_count(const UnrootedTree& tree, Vertex root) {
  const auto count = tree.vertex_count();
  CodeTable table;
  const auto code = canonical_codes_rooted(tree, root, table);
  const auto r = bfs_from(tree, root);
  std::vector<std::uint32_t> size(count, 1);
  for (std::size_t k = count; k-- > 1;) {
    const auto v = static_cast<std::size_t>(r.order[k]);
    size[static_cast<std::size_t>(r.parent[v])] += size[v];
  }
  double out = std::lgamma(static_cast<double>(count) + 1.0);
  for (std::size_t v = 0; v < count; ++v) {
    out -= std::log(static_cast<double>(size[v]));
    for (auto m : detail::multiplicities(detail::child_codes(tree, r, code, static_cast<Vertex>(v)))) {
      out -= std::lgamma(static_cast<double>(m) + 1.0);
    }
  }
  return out;
}

struct RootPosterior {
  // log of 1 / (Aut(u) * prod_v size * aut_bar), with the tree hung from u
  std::vector<double> log_lambda;
  std::vector<double> posterior;
};

namespace detail {
inline std::vector<double> normalize_logs(const std::vector<double>& logs) {
  const double top = *std::max_element(logs.begin(), logs.end());
  std::vector<double> p(logs.size());
  long double total = 0.0L;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    p[i] = std::exp(logs[i] - top);
    total += p[i];
  }
  for (auto& x : p) x = static_cast<double>(x / total);
  return p;
}
}  // namespace detail

// Log-likelihood of every vertex being the root of a uniform recursive tree
// with this shape, in linear time up to sorting.
//
// Hung from u, a vertex v != u contributes log|part of v| + log aut_bar(v),
// where the part and the child multiset exclude the neighbor w toward u.
// Removing one copy of a class with multiplicity m divides l! by m, so the
// contribution is (log of the full multiset's aut_bar) + g(v, w) with
// g(v, w) = log(n + 1 - arc_size(v, w)) - log m_v(w). Moving the root across
// an edge changes only the two terms of that edge.
inline RootPosterior root_likelihoods(const UnrootedTree& tree, const AllRootsCodes& codes) {
  const auto count = tree.vertex_count();
  const double total = static_cast<double>(count);
  std::vector<double> g(tree.arc_count());
  double full = std::log(total);
  std::vector<CodeId> local;
  for (std::size_t v = 0; v < count; ++v) {
    const auto off = tree.arc_offset(static_cast<Vertex>(v));
    const auto deg = tree.degree(static_cast<Vertex>(v));
    local.assign(deg, 0);
    for (std::size_t k = 0; k < deg; ++k) local[k] = codes.arc_code(off + k);
    std::vector<CodeId> sorted = local;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < deg;) {
      std::size_t j = i;
      while (j < deg && sorted[j] == sorted[i]) ++j;
      full += std::lgamma(static_cast<double>(j - i) + 1.0);
      i = j;
    }
    for (std::size_t k = 0; k < deg; ++k) {
      const auto range = std::equal_range(sorted.begin(), sorted.end(), local[k]);
      const auto m = static_cast<double>(range.second - range.first);
      g[off + k] = std::log(total - codes.arc_size(off + k)) - std::log(m);
    }
  }

  const auto& r = codes.order();
  std::vector<double> G(count, 0.0);
  for (std::size_t v = 1; v < count; ++v) {
    G[0] += g[arc_index(tree, static_cast<Vertex>(v), r.parent[v])];
  }
  for (std::size_t k = 1; k < count; ++k) {
    const Vertex c = r.order[k];
    const Vertex p = r.parent[static_cast<std::size_t>(c)];
    G[static_cast<std::size_t>(c)] = G[static_cast<std::size_t>(p)] - g[arc_index(tree, c, p)] + g[arc_index(tree, p, c)];
  }

  RootPosterior out;
  out.log_lambda.resize(count);
  for (std::size_t u = 0; u < count; ++u) {
    out.log_lambda[u] = -std::log(static_cast<double>(codes.aut(static_cast<Vertex>(u)))) - full - G[u];
  }
  out.posterior = detail::normalize_logs(out.log_lambda);
  return out;
}

inline RootPosterior root_likelihoods(const UnrootedTree& tree) { return root_likelihoods(tree, AllRootsCodes{tree}); }
inline RootPosterior root_likelihoods(const Tree& tree) { return root_likelihoods(UnrootedTree::from_tree(tree)); }

// labeling_count(u) / Aut(u) for each vertex: the number of parent sequences
// producing this shape with vertex 0 at u. Exact; n <= 20.
inline std::vector<BigRational> exact_root_weights(const UnrootedTree& tree) {
  const AllRootsCodes codes{tree};
  std::vector<BigRational> w(tree.vertex_count());
  std::unordered_map<CodeId, BigInt> per_class;
  for (std::size_t u = 0; u < w.size(); ++u) {
    const CodeId c = codes.root_code(static_cast<Vertex>(u));
    auto it = per_class.find(c);
    if (it == per_class.end()) it = per_class.emplace(c, labeling_count(tree, static_cast<Vertex>(u))).first;
    w[u] = BigRational{it->second, BigInt{codes.aut(static_cast<Vertex>(u))}};
  }
  return w;
}

inline std::vector<BigRational> exact_posterior(const UnrootedTree& tree) {
  auto w = exact_root_weights(tree);
  BigRational total = 0;
  for (const auto& x : w) total += x;
  for (auto& x : w) x /= total;
  return w;
}

}  // namespace rrtb
