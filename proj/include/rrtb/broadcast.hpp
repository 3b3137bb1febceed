#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rrtb/rng.hpp"
#include "rrtb/tree.hpp"

namespace rrtb {

// Bit values live in {-1, +1}; -1 plays the role of "0".
using Bit = std::int8_t;

enum class Visibility { all_vertices, leaves_only };

inline const char* to_string(Visibility v) { return v == Visibility::all_vertices ? "all" : "leaves"; }

// Per-vertex bits with an observation mask. Reading a masked bit throws, so an
// estimator handed leaves-only data cannot peek at internal vertices.
class ObservedBits {
 public:
  ObservedBits() = default;
  ObservedBits(std::vector<Bit> bits, std::vector<char> visible, Visibility visibility)
      : bits_{std::move(bits)}, visible_{std::move(visible)}, visibility_{visibility} {
    if (bits_.size() != visible_.size()) throw std::invalid_argument("observed bits: mask size mismatch");
  }

  std::size_t size() const { return bits_.size(); }
  Visibility visibility() const { return visibility_; }
  bool is_visible(Vertex v) const { return visible_[static_cast<std::size_t>(v)] != 0; }

  Bit bit(Vertex v) const {
    if (!is_visible(v)) {
      throw std::logic_error("bit of vertex " + std::to_string(v) + " is not observed");
    }
    return bits_[static_cast<std::size_t>(v)];
  }

  // Same observation under relabeling v -> new_label[v].
  ObservedBits relabeled(std::span<const Vertex> new_label) const {
    std::vector<Bit> bits(bits_.size());
    std::vector<char> visible(bits_.size());
    for (std::size_t v = 0; v < bits_.size(); ++v) {
      bits[static_cast<std::size_t>(new_label[v])] = bits_[v];
      visible[static_cast<std::size_t>(new_label[v])] = visible_[v];
    }
    return ObservedBits{std::move(bits), std::move(visible), visibility_};
  }

  // Global sign flip; used for equivariance checks.
  ObservedBits negated() const {
    ObservedBits out = *this;
    for (auto& b : out.bits_) b = static_cast<Bit>(-b);
    return out;
  }

 private:
  std::vector<Bit> bits_;
  std::vector<char> visible_;
  Visibility visibility_ = Visibility::all_vertices;
};

// Bits produced by broadcasting on a recursive tree; bits[0] is the root bit.
class BitAssignment {
 public:
  BitAssignment() = default;
  explicit BitAssignment(std::vector<Bit> bits)
      : bits_{std::move(bits)}, visible_(bits_.size(), 1) {
    if (bits_.empty()) throw std::invalid_argument("bit assignment: empty");
    for (Bit b : bits_) {
      if (b != 1 && b != -1) throw std::invalid_argument("bit assignment: bits must be +1 or -1");
    }
  }

  std::size_t size() const { return bits_.size(); }
  Bit root_bit() const { return bits_[0]; }
  Visibility visibility() const { return visibility_; }
  bool is_visible(Vertex v) const { return visible_[static_cast<std::size_t>(v)] != 0; }

  Bit bit(Vertex v) const {
    if (!is_visible(v)) {
      throw std::logic_error("bit of vertex " + std::to_string(v) + " is not observed");
    }
    return bits_[static_cast<std::size_t>(v)];
  }

  // Copy in which only leaves of the tree stay observable.
  BitAssignment leaves_only(const Tree& tree) const {
    check_size(tree);
    BitAssignment out = *this;
    out.visibility_ = Visibility::leaves_only;
    for (std::size_t v = 0; v < bits_.size(); ++v) out.visible_[v] = tree.is_leaf(static_cast<Vertex>(v));
    return out;
  }

  // The observer's data after relabeling v -> new_label[v].
  ObservedBits observe(std::span<const Vertex> new_label) const {
    std::vector<Bit> bits(bits_.size());
    std::vector<char> visible(bits_.size());
    for (std::size_t v = 0; v < bits_.size(); ++v) {
      const auto w = static_cast<std::size_t>(new_label[v]);
      bits[w] = bits_[v];
      visible[w] = visible_[v];
    }
    return ObservedBits{std::move(bits), std::move(visible), visibility_};
  }

  // Observation without relabeling.
  ObservedBits observe() const { return ObservedBits{bits_, visible_, visibility_}; }

  void check_size(const Tree& tree) const {
    if (tree.vertex_count() != bits_.size()) throw std::invalid_argument("bit assignment: size does not match tree");
  }

 private:
  std::vector<Bit> bits_;
  std::vector<char> visible_;
  Visibility visibility_ = Visibility::all_vertices;
};

inline void check_probability(double q, const char* what) {
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument(std::string(what) + ": q must lie in [0, 1]");
}

// Broadcast with a given root bit: each vertex copies its parent's bit and
// flips it with probability q.
inline BitAssignment assign_bits(const Tree& tree, double q, Bit root_bit, RngStream& rng) {
  check_probability(q, "assign_bits");
  std::vector<Bit> bits(tree.vertex_count());
  bits[0] = root_bit;
  for (std::size_t i = 1; i < bits.size(); ++i) {
    const Bit up = bits[static_cast<std::size_t>(tree.parent(static_cast<Vertex>(i)))];
    bits[i] = rng.bernoulli(q) ? static_cast<Bit>(-up) : up;
  }
  return BitAssignment{std::move(bits)};
}

// Root bit uniform on {-1, +1}.
inline BitAssignment assign_bits(const Tree& tree, double q, RngStream& rng) {
  const auto root = static_cast<Bit>(rng.sign());
  return assign_bits(tree, q, root, rng);
}

// Mark/flip variables: a non-root vertex is marked with probability 2q and a
// marked vertex takes its parent's bit times an independent fair sign.
struct Decomposition {
  std::vector<char> marked;  // marked[0] == 0
  std::vector<Bit> flip;     // flip[0] == +1
  double q = 0.0;
};

struct DecomposedBroadcast {
  BitAssignment bits;
  Decomposition decomposition;
};

inline DecomposedBroadcast assign_bits_decomposed(const Tree& tree, double q, RngStream& rng) {
  check_probability(q, "assign_bits_decomposed");
  if (q > 0.5) throw std::invalid_argument("assign_bits_decomposed: requires q <= 1/2");
  const auto count = tree.vertex_count();
  Decomposition dec{std::vector<char>(count, 0), std::vector<Bit>(count, 1), q};
  std::vector<Bit> bits(count);
  bits[0] = static_cast<Bit>(rng.sign());
  for (std::size_t i = 1; i < count; ++i) {
    dec.marked[i] = rng.bernoulli(2.0 * q);
    dec.flip[i] = static_cast<Bit>(rng.sign());
    const Bit up = bits[static_cast<std::size_t>(tree.parent(static_cast<Vertex>(i)))];
    bits[i] = dec.marked[i] ? static_cast<Bit>(dec.flip[i] * up) : up;
  }
  return {BitAssignment{std::move(bits)}, std::move(dec)};
}

// Sizes of the maximal unmarked subtrees: N[i] counts the vertices reachable
// from i downward without entering a marked vertex (i itself always counts);
// N_leaf[i] counts the tree leaves among them.
struct SubtreeCounts {
  std::vector<std::uint32_t> N;
  std::vector<std::uint32_t> N_leaf;
};

inline SubtreeCounts subtree_counts(const Tree& tree, const Decomposition& dec) {
  const auto count = tree.vertex_count();
  if (dec.marked.size() != count) throw std::invalid_argument("subtree_counts: decomposition size mismatch");
  SubtreeCounts c{std::vector<std::uint32_t>(count, 1), std::vector<std::uint32_t>(count, 0)};
  for (std::size_t v = 0; v < count; ++v) c.N_leaf[v] = tree.is_leaf(static_cast<Vertex>(v)) ? 1 : 0;
  // children have larger labels, so a reverse sweep sees every child first
  for (std::size_t i = count; i-- > 1;) {
    if (dec.marked[i]) continue;
    const auto p = static_cast<std::size_t>(tree.parent(static_cast<Vertex>(i)));
    c.N[p] += c.N[i];
    c.N_leaf[p] += c.N_leaf[i];
  }
  return c;
}

// (#vertices carrying the root bit) - (#vertices carrying the other bit).
inline std::int64_t delta_statistic(const Tree& tree, const BitAssignment& bits) {
  if (bits.visibility() != Visibility::all_vertices) {
    throw std::invalid_argument("delta_statistic: needs all vertex bits");
  }
  bits.check_size(tree);
  std::int64_t delta = 0;
  for (std::size_t v = 0; v < bits.size(); ++v) delta += bits.bit(static_cast<Vertex>(v)) * bits.root_bit();
  return delta;
}

// The same statistic through the decomposition: N_0 plus, for every marked i,
// N_i signed by the bit of the homogeneous piece it roots.
inline std::int64_t delta_from_decomposition(const Tree& tree, const BitAssignment& bits,
                                             const Decomposition& dec, const SubtreeCounts& counts) {
  bits.check_size(tree);
  std::int64_t delta = counts.N[0];
  for (std::size_t i = 1; i < bits.size(); ++i) {
    if (!dec.marked[i]) continue;
    const Bit up = bits.bit(tree.parent(static_cast<Vertex>(i)));
    delta += static_cast<std::int64_t>(counts.N[i]) * up * dec.flip[i] * bits.root_bit();
  }
  return delta;
}

}  // namespace rrtb
