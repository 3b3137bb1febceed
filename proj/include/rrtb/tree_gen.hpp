#pragma once

#include <cstdint>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "rrtb/rng.hpp"
#include "rrtb/tree.hpp"

namespace rrtb {

// Uniform random recursive tree: vertex i attaches to a uniform vertex of
// {0, ..., i-1}.
inline Tree generate_urrt(std::size_t n, RngStream& rng) {
  std::vector<Vertex> parent(n + 1);
  parent[0] = kNoVertex;
  for (std::size_t i = 1; i <= n; ++i) parent[i] = static_cast<Vertex>(rng.below(i));
  return Tree{std::move(parent)};
}

struct PaParams {
  double beta = 1.0;

  void validate() const {
    if (!(beta > 0.0)) throw std::invalid_argument("preferential attachment: beta must be > 0");
  }
};

// Linear preferential attachment: vertex i attaches to j with probability
// proportional to outdegree_j + beta.
//
// The total weight before attaching vertex i is (beta + 1) * i - 1, split into
// an outdegree part (i - 1, one unit per existing edge) and a constant part
// (beta * i). A draw from the outdegree part is the parent of a uniformly
// chosen existing edge; a draw from the constant part is a uniform vertex.
// Both are O(1) and exact, so no weight structure has to be maintained.
inline Tree generate_pa(std::size_t n, const PaParams& params, RngStream& rng) {
  params.validate();
  std::vector<Vertex> parent(n + 1);
  parent[0] = kNoVertex;
  const double beta = params.beta;
  for (std::size_t i = 1; i <= n; ++i) {
    const double edges = static_cast<double>(i - 1);
    const double total = (beta + 1.0) * static_cast<double>(i) - 1.0;
    if (i > 1 && rng.uniform() * total < edges) {
      const auto edge_child = 1 + rng.below(i - 1);
      parent[i] = parent[edge_child];
    } else {
      parent[i] = static_cast<Vertex>(rng.below(i));
    }
  }
  return Tree{std::move(parent)};
}

// Exact attachment law of the next vertex given a partial PA tree: entry j is
// the probability that the next vertex attaches to j.
inline std::vector<double> pa_attachment_probabilities(const Tree& partial, const PaParams& params) {
  params.validate();
  const auto count = partial.vertex_count();
  const double total = (params.beta + 1.0) * static_cast<double>(count) - 1.0;
  std::vector<double> p(count);
  for (std::size_t j = 0; j < count; ++j) {
    p[j] = (static_cast<double>(partial.outdegree(static_cast<Vertex>(j))) + params.beta) / total;
  }
  return p;
}

enum class ModelKind { urrt, pa };

// A tree model together with its parameters.
struct Model {
  ModelKind kind = ModelKind::urrt;
  PaParams pa{};

  static Model urrt() { return {}; }
  static Model preferential(double beta) { return {ModelKind::pa, PaParams{beta}}; }

  std::string name() const { return kind == ModelKind::urrt ? "urrt" : "pa"; }
  // beta is reported as 0 for URRT.
  double beta() const { return kind == ModelKind::urrt ? 0.0 : pa.beta; }
};

inline Tree generate(const Model& model, std::size_t n, RngStream& rng) {
  return model.kind == ModelKind::urrt ? generate_urrt(n, rng) : generate_pa(n, model.pa, rng);
}

inline constexpr std::size_t kEnumerationCap = 9;

// Enumerates all n! parent sequences (recursive trees on n + 1 vertices) in
// lexicographic order of (parent[1], ..., parent[n]).
class ParentSequences {
 public:
  explicit ParentSequences(std::size_t n) : n_{n} {
    if (n > kEnumerationCap) {
      throw std::invalid_argument("enumerate_parent_sequences: n = " + std::to_string(n) +
                                  " exceeds cap " + std::to_string(kEnumerationCap));
    }
  }

  class iterator {
   public:
    using iterator_category = std::input_iterator_tag;
    using value_type = Tree;
    using difference_type = std::ptrdiff_t;
    using pointer = const Tree*;
    using reference = const Tree&;

    iterator() = default;
    explicit iterator(std::size_t n) : parent_(n + 1, 0), done_{false} {
      parent_[0] = kNoVertex;
      current_ = Tree{parent_};
    }

    reference operator*() const { return current_; }
    pointer operator->() const { return &current_; }

    iterator& operator++() {
      // odometer with digit i ranging over 0..i-1
      std::size_t i = parent_.size();
      while (i > 1) {
        --i;
        if (static_cast<std::size_t>(++parent_[i]) < i) {
          current_ = Tree{parent_};
          return *this;
        }
        parent_[i] = 0;
      }
      done_ = true;
      return *this;
    }
    void operator++(int) { ++*this; }

    friend bool operator==(const iterator& a, const iterator& b) {
      if (a.done_ || b.done_) return a.done_ == b.done_;
      return a.parent_ == b.parent_;
    }

   private:
    std::vector<Vertex> parent_;
    Tree current_;
    bool done_ = true;
  };

  iterator begin() const { return iterator{n_}; }
  iterator end() const { return iterator{}; }

 private:
  std::size_t n_;
};

inline ParentSequences enumerate_parent_sequences(std::size_t n) { return ParentSequences{n}; }

// Calls fn(parent) for each of the n! parent sequences without materializing
// Tree objects; parent[0] is kNoVertex.
template <typename Fn>
void for_each_parent_sequence(std::size_t n, Fn&& fn) {
  if (n > kEnumerationCap) throw std::invalid_argument("for_each_parent_sequence: n exceeds cap");
  std::vector<Vertex> parent(n + 1, 0);
  parent[0] = kNoVertex;
  while (true) {
    fn(static_cast<const std::vector<Vertex>&>(parent));
    std::size_t i = n;
    for (; i >= 1; --i) {
      if (static_cast<std::size_t>(++parent[i]) < i) break;
      parent[i] = 0;
    }
    if (i == 0) return;
  }
}

}  // namespace rrtb
