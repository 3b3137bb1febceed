#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rrtb/broadcast.hpp"
#include "rrtb/isomorphism.hpp"
#include "rrtb/rng.hpp"
#include "rrtb/tree.hpp"
#include "rrtb/tree_struct.hpp"

namespace rrtb {

enum class EstimatorKind { majority, centroid, bayes, structured };

inline const char* to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::majority: return "majority";
    case EstimatorKind::centroid: return "centroid";
    case EstimatorKind::bayes: return "bayes";
    case EstimatorKind::structured: return "structured";
  }
  return "?";
}

inline EstimatorKind parse_estimator(std::string_view name) {
  for (auto k : {EstimatorKind::majority, EstimatorKind::centroid, EstimatorKind::bayes, EstimatorKind::structured}) {
    if (name == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown estimator '" + std::string(name) + "'");
}

struct Estimate {
  Bit value = -1;
  EstimatorKind estimator = EstimatorKind::majority;
  bool used_randomness = false;
};

// ---- structure ----

struct StructParams {
  int r = 4;
  int k = 4;
  double eps = 1.0 / 1024.0;
  // Lower bound on internal hanging parts as a fraction of n; unset means
  // eps / (10 * internal_count()).
  std::optional<double> internal_floor;

  void validate() const {
    if (r <= 3 || k <= 3) throw std::invalid_argument("struct params: r and k must exceed 3");
    if (k > r) throw std::invalid_argument("struct params: k must not exceed r");
    if (!(eps > 0.0 && eps < 0.5 / leaf_count())) {
      throw std::invalid_argument("struct params: eps must lie in (0, 1/(2 r^k))");
    }
    if (internal_floor && !(*internal_floor >= 0.0)) throw std::invalid_argument("struct params: negative floor");
  }

  // Internal floor (1 - eps) / (10 r^k) taken at face value. Under it the
  // windows cannot add up to n + 1, so nothing is ever detected.
  static StructParams literal(int r, int k, double eps) {
    StructParams p{r, k, eps, std::nullopt};
    p.internal_floor = (1.0 - eps) / (10.0 * p.leaf_count());
    return p;
  }

  double leaf_count() const { return std::pow(static_cast<double>(r), k); }
  // r^j
  std::size_t power(int j) const {
    std::size_t out = 1;
    for (int i = 0; i < j; ++i) out *= static_cast<std::size_t>(r);
    return out;
  }
  // internal vertices of a complete r-ary tree of height j: (r^j - 1) / (r - 1)
  std::size_t internal_count(int j) const { return (power(j) - 1) / static_cast<std::size_t>(r - 1); }
  std::size_t internal_count() const { return internal_count(k); }
  std::size_t d_size() const { return internal_count(k + 1); }
  double floor_fraction() const {
    return internal_floor ? *internal_floor : eps / (10.0 * static_cast<double>(internal_count()));
  }
};

struct SizeWindow {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return x >= lo && x <= hi; }
};

// Windows on hanging-part sizes for a tree with n edges.
struct PartWindows {
  SizeWindow leaf;
  SizeWindow internal;

  PartWindows(const StructParams& p, std::size_t n) {
    const double unit = static_cast<double>(n) / p.leaf_count();
    leaf = {(1.0 - p.eps) * unit, (1.0 + p.eps) * unit};
    internal = {p.floor_fraction() * static_cast<double>(n), (1.0 - p.eps) * unit};
  }

  // Admissible size of the side below a vertex at D-depth j.
  SizeWindow below(const StructParams& p, int j) const {
    const auto leaves = static_cast<double>(p.power(p.k - j));
    const auto inner = static_cast<double>(p.internal_count(p.k - j));
    return {leaves * leaf.lo + inner * internal.lo, leaves * leaf.hi + inner * internal.hi};
  }
};

// An embedding of the complete r-ary tree: d_vertices[0] is x0 and the
// children of entry i are entries r*i + 1, ..., r*i + r.
struct StructureWitness {
  Vertex x0 = kNoVertex;
  std::vector<Vertex> d_vertices;
};

struct ConditionReport {
  bool complete_subtree = false;     // (I)
  bool part_sizes = false;           // (II)
  bool distinct_leaf_parts = false;  // (III)
  bool rigid = false;                // (IV)
  bool all() const { return complete_subtree && part_sizes && distinct_leaf_parts && rigid; }
};

namespace detail {
// Side sizes from a single BFS; side(v, w) = vertices on w's side of edge vw.
class SideSizes {
 public:
  explicit SideSizes(const UnrootedTree& tree) : order_{bfs_from(tree, 0)}, size_(tree.vertex_count(), 1) {
    for (std::size_t k = size_.size(); k-- > 1;) {
      const auto v = static_cast<std::size_t>(order_.order[k]);
      size_[static_cast<std::size_t>(order_.parent[v])] += size_[v];
    }
  }
  std::uint32_t side(Vertex v, Vertex w) const {
    if (order_.parent[static_cast<std::size_t>(w)] == v) return size_[static_cast<std::size_t>(w)];
    return static_cast<std::uint32_t>(size_.size()) - size_[static_cast<std::size_t>(v)];
  }
  std::size_t total() const { return size_.size(); }

 private:
  RootedOrder order_;
  std::vector<std::uint32_t> size_;
};
}  // namespace detail

// Checks an explicit embedding against (I)-(IV).
inline ConditionReport check_structure(const UnrootedTree& tree, const StructParams& params,
                                       const StructureWitness& w, const AllRootsCodes& codes) {
  params.validate();
  ConditionReport rep;
  const auto r = static_cast<std::size_t>(params.r);
  const auto& d = w.d_vertices;
  if (d.size() != params.d_size() || d.empty() || d[0] != w.x0) return rep;

  // (I)
  {
    std::vector<Vertex> sorted = d;
    std::sort(sorted.begin(), sorted.end());
    bool ok = std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
    for (std::size_t i = 1; ok && i < d.size(); ++i) {
      const auto nb = tree.neighbors(d[(i - 1) / r]);
      ok = std::binary_search(nb.begin(), nb.end(), d[i]);
    }
    rep.complete_subtree = ok;
    if (!ok) return rep;
  }

  const std::size_t first_leaf = params.internal_count();
  const auto n = tree.vertex_count() - 1;
  const PartWindows win{params, n};
  auto arc = [&](Vertex v, Vertex u) { return arc_index(tree, v, u); };

  // (II)
  {
    bool ok = true;
    for (std::size_t i = 0; ok && i < d.size(); ++i) {
      double part = i == 0 ? static_cast<double>(tree.vertex_count())
                           : codes.arc_size(arc(d[(i - 1) / r], d[i]));
      if (i < first_leaf) {
        for (std::size_t c = r * i + 1; c <= r * i + r; ++c) part -= codes.arc_size(arc(d[i], d[c]));
        ok = win.internal.contains(part);
      } else {
        ok = win.leaf.contains(part);
      }
    }
    rep.part_sizes = ok;
  }

  // (III): a leaf part is everything on the leaf's side of its D-edge.
  {
    std::vector<CodeId> leaf_codes;
    for (std::size_t i = first_leaf; i < d.size(); ++i) leaf_codes.push_back(codes.arc_code(arc(d[(i - 1) / r], d[i])));
    std::sort(leaf_codes.begin(), leaf_codes.end());
    rep.distinct_leaf_parts = std::adjacent_find(leaf_codes.begin(), leaf_codes.end()) == leaf_codes.end();
  }

  // (IV)
  {
    bool ok = true;
    std::vector<CodeId> child;
    for (std::size_t i = 0; ok && i < first_leaf; ++i) {
      const Vertex v = d[i];
      ok = codes.aut(v) == 1;
      const Vertex up = i == 0 ? kNoVertex : d[(i - 1) / r];
      child.clear();
      const auto off = tree.arc_offset(v);
      const auto nb = tree.neighbors(v);
      for (std::size_t j = 0; j < nb.size(); ++j) {
        if (nb[j] != up) child.push_back(codes.arc_code(off + j));
      }
      std::sort(child.begin(), child.end());
      ok = ok && std::adjacent_find(child.begin(), child.end()) == child.end();
    }
    rep.rigid = ok;
  }
  return rep;
}

inline ConditionReport check_structure(const UnrootedTree& tree, const StructParams& params, const StructureWitness& w) {
  return check_structure(tree, params, w, AllRootsCodes{tree});
}

namespace detail {

inline constexpr std::size_t kMaxCombinations = 4096;

class StructureSearch {
 public:
  StructureSearch(const UnrootedTree& tree, const StructParams& params)
      : tree_{tree}, params_{params}, sides_{tree}, win_{params, tree.vertex_count() - 1} {}

  // Rigidity filtering needs codes; without them only sizes are used.
  void use_codes(const AllRootsCodes* codes) { codes_ = codes; }

  std::optional<StructureWitness> from(Vertex x0) {
    std::vector<Vertex> sub;
    if (!build(x0, kNoVertex, 0, sub)) return std::nullopt;
    return StructureWitness{x0, heap_order(sub)};
  }

 private:
  // Builds D below v (v at D-depth j, entered from `up`). On success `out`
  // holds v followed by the subtrees of its chosen children, each in the same
  // preorder layout.
  bool build(Vertex v, Vertex up, int j, std::vector<Vertex>& out) {
    out.clear();
    out.push_back(v);
    if (j == params_.k) return true;
    if (codes_ && !rigid(v, up)) return false;
    const auto r = static_cast<std::size_t>(params_.r);
    const auto window = win_.below(params_, j + 1);
    struct Cand {
      Vertex w;
      std::uint32_t side;
      std::vector<Vertex> sub;
    };
    std::vector<Cand> cands;
    for (Vertex w : tree_.neighbors(v)) {
      if (w == up) continue;
      const auto s = sides_.side(v, w);
      if (!window.contains(s)) continue;
      Cand c{w, s, {}};
      if (build(w, v, j + 1, c.sub)) cands.push_back(std::move(c));
    }
    if (cands.size() < r) return false;
    const double here = up == kNoVertex ? static_cast<double>(sides_.total()) : sides_.side(up, v);
    // choose r candidates leaving an admissible part at v
    std::vector<std::size_t> idx(r);
    for (std::size_t i = 0; i < r; ++i) idx[i] = i;
    for (std::size_t tries = 0; tries < kMaxCombinations; ++tries) {
      double part = here;
      for (auto i : idx) part -= cands[i].side;
      if (win_.internal.contains(part)) {
        for (auto i : idx) out.insert(out.end(), cands[i].sub.begin(), cands[i].sub.end());
        return true;
      }
      if (!next_combination(idx, cands.size())) break;
    }
    return false;
  }

  bool rigid(Vertex v, Vertex up) const {
    if (codes_->aut(v) != 1) return false;
    std::vector<CodeId> child;
    const auto off = tree_.arc_offset(v);
    const auto nb = tree_.neighbors(v);
    for (std::size_t j = 0; j < nb.size(); ++j) {
      if (nb[j] != up) child.push_back(codes_->arc_code(off + j));
    }
    std::sort(child.begin(), child.end());
    return std::adjacent_find(child.begin(), child.end()) == child.end();
  }

  static bool next_combination(std::vector<std::size_t>& idx, std::size_t m) {
    const std::size_t r = idx.size();
    std::size_t i = r;
    while (i > 0 && idx[i - 1] == m - r + i - 1) --i;
    if (i == 0) return false;
    ++idx[i - 1];
    for (std::size_t t = i; t < r; ++t) idx[t] = idx[t - 1] + 1;
    return true;
  }

  // Preorder layout (vertex, then child blocks) to heap layout.
  std::vector<Vertex> heap_order(const std::vector<Vertex>& pre) const {
    const auto r = static_cast<std::size_t>(params_.r);
    std::vector<Vertex> heap(pre.size(), kNoVertex);
    std::vector<std::size_t> block(params_.k + 2);
    for (int j = 0; j <= params_.k; ++j) block[static_cast<std::size_t>(j)] = params_.internal_count(params_.k - j + 1);
    place(pre, 0, 0, 0, heap, block, r);
    return heap;
  }

  static void place(const std::vector<Vertex>& pre, std::size_t pos, std::size_t heap_idx, int j,
                    std::vector<Vertex>& heap, const std::vector<std::size_t>& block, std::size_t r) {
    heap[heap_idx] = pre[pos];
    if (block[static_cast<std::size_t>(j)] == 1) return;
    const std::size_t child_block = block[static_cast<std::size_t>(j) + 1];
    for (std::size_t c = 0; c < r; ++c) {
      place(pre, pos + 1 + c * child_block, r * heap_idx + 1 + c, j + 1, heap, block, r);
    }
  }

  const UnrootedTree& tree_;
  const StructParams& params_;
  SideSizes sides_;
  PartWindows win_;
  const AllRootsCodes* codes_ = nullptr;
};

}  // namespace detail

// Looks for an embedding satisfying (I)-(IV). Candidate roots x0 need degree
// >= r and are tried in order of increasing phi; children are matched by the
// side-size windows, then the embedding is verified exactly. The search is
// not exhaustive, so a miss does not prove absence.
inline std::optional<StructureWitness> detect_structure(const UnrootedTree& tree, const StructParams& params) {
  params.validate();
  const auto count = tree.vertex_count();
  if (count < params.d_size()) return std::nullopt;
  const PartWindows win{params, count - 1};
  if (!win.below(params, 0).contains(static_cast<double>(count))) return std::nullopt;

  const auto phi = phi_values(tree);
  std::vector<Vertex> order;
  for (std::size_t v = 0; v < count; ++v) {
    if (tree.degree(static_cast<Vertex>(v)) >= static_cast<std::size_t>(params.r)) order.push_back(static_cast<Vertex>(v));
  }
  std::stable_sort(order.begin(), order.end(), [&](Vertex a, Vertex b) {
    return phi[static_cast<std::size_t>(a)] < phi[static_cast<std::size_t>(b)];
  });

  detail::StructureSearch search{tree, params};
  std::optional<AllRootsCodes> codes;
  for (Vertex x0 : order) {
    if (!search.from(x0)) continue;
    if (!codes) {
      codes.emplace(tree);
      search.use_codes(&*codes);
    }
    auto w = search.from(x0);
    if (w && check_structure(tree, params, *w, *codes).all()) return w;
  }
  return std::nullopt;
}

// ---- estimators ----

// Exact probability as a small fraction.
struct Fraction {
  std::int64_t num = 0;
  std::int64_t den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

inline constexpr std::size_t kExactBayesCap = 20;
inline constexpr double kBayesTieTolerance = 1e-12;

// Shape-only quantities shared by all estimators on one observed tree,
// computed on first use.
class ShapeContext {
 public:
  ShapeContext(const UnrootedTree& view, const StructParams& params = {}) : view_{view}, params_{params} {}
  ShapeContext(UnrootedTree&&, const StructParams& = {}) = delete;  // keeps a reference

  const UnrootedTree& view() const { return view_; }
  const StructParams& params() const { return params_; }

  const std::vector<Vertex>& centroids() {
    if (centroids_.empty()) centroids_ = rrtb::centroids(view_);
    return centroids_;
  }

  // Leaves nearest to the i-th centroid.
  const std::vector<Vertex>& centroid_leaves(std::size_t i) {
    if (centroid_leaves_.empty()) {
      for (Vertex c : centroids()) centroid_leaves_.push_back(nearest_leaves(view_, c));
    }
    return centroid_leaves_[i];
  }

  bool exact_bayes() const { return view_.vertex_count() - 1 <= kExactBayesCap; }

  // count(u) / Aut(u) scaled to integers by a common multiple of the orbit
  // sizes; exact mode only.
  const std::vector<BigInt>& bayes_weights() {
    if (bayes_weights_.empty()) {
      const auto w = exact_root_weights(view_);
      BigInt scale = 1;
      for (const auto& x : w) scale = boost::multiprecision::lcm(scale, boost::multiprecision::denominator(x));
      for (const auto& x : w) bayes_weights_.push_back(boost::multiprecision::numerator(x) * (scale / boost::multiprecision::denominator(x)));
    }
    return bayes_weights_;
  }

  const std::vector<double>& posterior() {
    if (posterior_.empty()) posterior_ = root_likelihoods(view_).posterior;
    return posterior_;
  }

  const std::optional<StructureWitness>& structure() {
    if (!structure_done_) {
      structure_ = detect_structure(view_, params_);
      structure_done_ = true;
    }
    return structure_;
  }

  // Leaves adjacent to x0, in increasing label order.
  std::vector<Vertex> leaves_next_to_x0() {
    std::vector<Vertex> out;
    if (!structure()) return out;
    for (Vertex w : view_.neighbors(structure_->x0)) {
      if (view_.is_leaf(w)) out.push_back(w);
    }
    return out;
  }

 private:
  const UnrootedTree& view_;
  StructParams params_;
  std::vector<Vertex> centroids_;
  std::vector<std::vector<Vertex>> centroid_leaves_;
  std::vector<BigInt> bayes_weights_;
  std::vector<double> posterior_;
  std::optional<StructureWitness> structure_;
  bool structure_done_ = false;
};

inline long long visible_sum(const ObservedBits& bits) {
  long long s = 0;
  for (std::size_t v = 0; v < bits.size(); ++v) {
    if (bits.is_visible(static_cast<Vertex>(v))) s += bits.bit(static_cast<Vertex>(v));
  }
  return s;
}

inline Bit sign_or_minus(long long s) { return s > 0 ? Bit{1} : Bit{-1}; }

// ---- majority ----

inline Estimate majority_estimate(const ObservedBits& bits) {
  return {sign_or_minus(visible_sum(bits)), EstimatorKind::majority, false};
}

// ---- centroid ----

// Bit at a centroid, or at the leaf nearest to it (smallest label among
// ties) when only leaves are seen. With two centroids a fair coin picks one.
inline Estimate centroid_estimate(ShapeContext& ctx, const ObservedBits& bits, RngStream& rng) {
  const auto& c = ctx.centroids();
  const std::size_t pick = c.size() == 1 ? 0 : rng.below(c.size());
  const Vertex v = bits.visibility() == Visibility::all_vertices ? c[pick] : ctx.centroid_leaves(pick).front();
  return {bits.bit(v), EstimatorKind::centroid, c.size() > 1};
}

inline Estimate centroid_estimate(const UnrootedTree& view, const ObservedBits& bits, RngStream& rng) {
  ShapeContext ctx{view};
  return centroid_estimate(ctx, bits, rng);
}

// ---- Bayes ----

// Sign of (posterior mass on +1 vertices) - (mass on -1 vertices). Exact
// integer comparison up to n = 20, floating point with a tie band above.
inline Bit bayes_decision(ShapeContext& ctx, const ObservedBits& bits) {
  if (bits.visibility() != Visibility::all_vertices) {
    throw std::invalid_argument("bayes_estimate: needs all vertex bits");
  }
  const auto count = ctx.view().vertex_count();
  if (ctx.exact_bayes()) {
    const auto& w = ctx.bayes_weights();
    BigInt diff = 0;
    for (std::size_t u = 0; u < count; ++u) {
      if (bits.bit(static_cast<Vertex>(u)) > 0) diff += w[u];
      else diff -= w[u];
    }
    return diff > 0 ? Bit{1} : Bit{-1};
  }
  const auto& post = ctx.posterior();
  long double diff = 0.0L;
  for (std::size_t u = 0; u < count; ++u) diff += bits.bit(static_cast<Vertex>(u)) * static_cast<long double>(post[u]);
  return diff > kBayesTieTolerance ? Bit{1} : Bit{-1};
}

inline Estimate bayes_estimate(ShapeContext& ctx, const ObservedBits& bits) {
  return {bayes_decision(ctx, bits), EstimatorKind::bayes, false};
}

inline Estimate bayes_estimate(const UnrootedTree& view, const ObservedBits& bits) {
  ShapeContext ctx{view};
  return bayes_estimate(ctx, bits);
}

// ---- structured ----

// Bit at x0 when the structure is found (the flipped bit of the leaf hanging
// off x0 with the smallest label when only leaves are seen), a fair coin
// otherwise.
inline Estimate structured_estimate(ShapeContext& ctx, const ObservedBits& bits, RngStream& rng) {
  if (const auto& w = ctx.structure()) {
    if (bits.visibility() == Visibility::all_vertices) return {bits.bit(w->x0), EstimatorKind::structured, false};
    const auto leaves = ctx.leaves_next_to_x0();
    if (!leaves.empty()) return {static_cast<Bit>(-bits.bit(leaves.front())), EstimatorKind::structured, false};
  }
  return {static_cast<Bit>(rng.sign()), EstimatorKind::structured, true};
}

inline Estimate structured_estimate(const UnrootedTree& view, const ObservedBits& bits, const StructParams& params,
                                    RngStream& rng) {
  ShapeContext ctx{view, params};
  return structured_estimate(ctx, bits, rng);
}

inline Estimate run_estimator(EstimatorKind kind, ShapeContext& ctx, const ObservedBits& bits, RngStream& rng) {
  switch (kind) {
    case EstimatorKind::majority: return majority_estimate(bits);
    case EstimatorKind::centroid: return centroid_estimate(ctx, bits, rng);
    case EstimatorKind::bayes: return bayes_estimate(ctx, bits);
    case EstimatorKind::structured: return structured_estimate(ctx, bits, rng);
  }
  throw std::logic_error("unknown estimator");
}

namespace detail {
inline Fraction share_plus(const ObservedBits& bits, const std::vector<Vertex>& candidates, bool negate) {
  std::int64_t plus = 0;
  for (Vertex v : candidates) plus += (negate ? -bits.bit(v) : bits.bit(v)) > 0 ? 1 : 0;
  return {plus, static_cast<std::int64_t>(candidates.size())};
}
}  // namespace detail

// Probability that the estimator outputs +1 when the observed labels are
// uniformly random: internal coins are averaged, and a "smallest label"
// choice among k equivalent candidates becomes a uniform choice.
inline Fraction estimator_prob_plus(EstimatorKind kind, ShapeContext& ctx, const ObservedBits& bits) {
  switch (kind) {
    case EstimatorKind::majority: return {visible_sum(bits) > 0 ? 1 : 0, 1};
    case EstimatorKind::bayes: return {bayes_decision(ctx, bits) > 0 ? 1 : 0, 1};
    case EstimatorKind::centroid: {
      const auto& c = ctx.centroids();
      if (bits.visibility() == Visibility::all_vertices) return detail::share_plus(bits, c, false);
      // average over centroids of the average over their nearest leaves
      std::int64_t den = static_cast<std::int64_t>(c.size());
      for (std::size_t i = 0; i < c.size(); ++i) den *= static_cast<std::int64_t>(ctx.centroid_leaves(i).size());
      std::int64_t num = 0;
      for (std::size_t i = 0; i < c.size(); ++i) {
        const auto f = detail::share_plus(bits, ctx.centroid_leaves(i), false);
        num += f.num * (den / static_cast<std::int64_t>(c.size()) / f.den);
      }
      return {num, den};
    }
    case EstimatorKind::structured: {
      if (const auto& w = ctx.structure()) {
        if (bits.visibility() == Visibility::all_vertices) return {bits.bit(w->x0) > 0 ? 1 : 0, 1};
        const auto leaves = ctx.leaves_next_to_x0();
        if (!leaves.empty()) return detail::share_plus(bits, leaves, true);
      }
      return {1, 2};
    }
  }
  throw std::logic_error("unknown estimator");
}

}  // namespace rrtb
