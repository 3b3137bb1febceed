#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "oracles.hpp"
#include "rrtb/isomorphism.hpp"
#include "rrtb/tree_gen.hpp"

using namespace rrtb;

namespace {

Tree path(std::size_t vertices) {
  std::vector<Vertex> p(vertices);
  p[0] = kNoVertex;
  for (std::size_t i = 1; i < vertices; ++i) p[i] = static_cast<Vertex>(i - 1);
  return Tree{p};
}

Tree star(std::size_t leaves) {
  std::vector<Vertex> p(leaves + 1, 0);
  p[0] = kNoVertex;
  return Tree{p};
}

}  // namespace

TEST(CanonicalCodes, SiblingLeavesShareACode) {
  CodeTable table;
  const auto code = canonical_codes_rooted(Tree{std::vector<Vertex>{kNoVertex, 0, 0}}, 0, table);
  EXPECT_EQ(code[1], code[2]);
  EXPECT_NE(code[0], code[1]);
}

TEST(CanonicalCodes, PathOfTwoDiffersFromLeaf) {
  CodeTable table;
  const auto code = canonical_codes_rooted(Tree{std::vector<Vertex>{kNoVertex, 0, 0, 2}}, 0, table);
  EXPECT_NE(code[1], code[2]);
  EXPECT_EQ(code[1], code[3]);
  EXPECT_EQ(table.canonical_string(code[2]), "(())");
}

// One table shared across many trees, compared pairwise with a backtracking
// rooted-isomorphism check.
TEST(CanonicalCodes, MatchesBacktrackingIsomorphism) {
  RngStream rng{1, 0};
  CodeTable table;
  struct Entry {
    oracle::Adjacency adj;
    int v, up;
    CodeId code;
  };
  std::vector<Entry> entries;
  for (int rep = 0; rep < 40; ++rep) {
    const Tree t = generate_urrt(rng.below(9), rng);
    const auto view = UnrootedTree::from_tree(t);
    const auto root = static_cast<Vertex>(rng.below(t.vertex_count()));
    const auto code = canonical_codes_rooted(view, root, table);
    const auto r = bfs_from(view, root);
    const auto adj = oracle::adjacency(t);
    for (std::size_t v = 0; v < t.vertex_count(); ++v) entries.push_back({adj, static_cast<int>(v), r.parent[v], code[v]});
  }
  for (std::size_t a = 0; a < entries.size(); ++a) {
    for (std::size_t b = a; b < entries.size(); ++b) {
      const auto& x = entries[a];
      const auto& y = entries[b];
      ASSERT_EQ(x.code == y.code, oracle::rooted_isomorphic(x.adj, x.v, x.up, y.adj, y.v, y.up));
    }
  }
}

TEST(CanonicalCodes, AllRootsPassAgreesWithDirectRooting) {
  RngStream rng{2, 0};
  for (int rep = 0; rep < 100; ++rep) {
    const Tree t = generate_urrt(1 + rng.below(40), rng);
    const auto view = UnrootedTree::relabeled(t, random_permutation(t.vertex_count(), rng));
    const AllRootsCodes all{view};
    for (std::size_t u = 0; u < view.vertex_count(); ++u) {
      CodeTable table;
      const auto code = canonical_codes_rooted(view, static_cast<Vertex>(u), table);
      ASSERT_EQ(all.table().canonical_string(all.root_code(static_cast<Vertex>(u))),
                table.canonical_string(code[u]));
      std::size_t arc = view.arc_offset(static_cast<Vertex>(u));
      for (Vertex w : view.neighbors(static_cast<Vertex>(u))) {
        ASSERT_EQ(all.table().canonical_string(all.arc_code(arc)), table.canonical_string(code[static_cast<std::size_t>(w)]));
        ++arc;
      }
    }
  }
}

TEST(CanonicalCodes, UnrootedStringIgnoresLabels) {
  RngStream rng{3, 0};
  for (int rep = 0; rep < 100; ++rep) {
    const Tree t = generate_urrt(1 + rng.below(60), rng);
    const auto a = UnrootedTree::relabeled(t, random_permutation(t.vertex_count(), rng));
    const auto b = UnrootedTree::relabeled(t, random_permutation(t.vertex_count(), rng));
    EXPECT_EQ(canonical_string_unrooted(a), canonical_string_unrooted(b));
  }
}

TEST(AutBar, LeafStarAndMixedChildren) {
  const Tree s = star(4);
  EXPECT_EQ(aut_bar(s, 0, 1), 1);
  EXPECT_EQ(aut_bar(s, 0, 0), 24);
  // children subtrees {leaf, leaf, path of 2}
  const Tree mixed{std::vector<Vertex>{kNoVertex, 0, 0, 0, 3}};
  EXPECT_EQ(aut_bar(mixed, 0, 0), 2);
  EXPECT_NEAR(log_aut_bar(UnrootedTree::from_tree(mixed), 0, 0), std::log(2.0), 1e-12);
}

TEST(AutVertex, PathAndStar) {
  const Tree p = path(3);
  EXPECT_EQ(aut_vertex(p, 0), 2u);
  EXPECT_EQ(aut_vertex(p, 1), 1u);
  EXPECT_EQ(aut_vertex(p, 2), 2u);
  const Tree s = star(5);
  EXPECT_EQ(aut_vertex(s, 0), 1u);
  for (Vertex v = 1; v <= 5; ++v) EXPECT_EQ(aut_vertex(s, v), 5u);
}

TEST(AutVertex, MatchesExhaustiveOrbits) {
  RngStream rng{4, 0};
  for (int rep = 0; rep < 300; ++rep) {
    const Tree t = generate_urrt(rng.below(8), rng);
    const auto orbits = oracle::orbit_sizes(oracle::adjacency(t));
    const AllRootsCodes all{UnrootedTree::from_tree(t)};
    double orbit_count = 0.0;
    for (std::size_t v = 0; v < t.vertex_count(); ++v) {
      ASSERT_EQ(all.aut(static_cast<Vertex>(v)), static_cast<std::size_t>(orbits[v]));
      orbit_count += 1.0 / static_cast<double>(orbits[v]);
    }
    // orbit sizes over one representative per orbit add up to n + 1
    std::map<CodeId, std::size_t> reps;
    for (std::size_t v = 0; v < t.vertex_count(); ++v) reps[all.root_code(static_cast<Vertex>(v))] = all.aut(static_cast<Vertex>(v));
    std::size_t total = 0;
    for (const auto& [c, size] : reps) total += size;
    EXPECT_EQ(total, t.vertex_count());
    EXPECT_NEAR(orbit_count, static_cast<double>(reps.size()), 1e-9);
  }
}

TEST(LabelingCount, HandExamples) {
  EXPECT_EQ(labeling_count(path(3), 0), 1);
  EXPECT_EQ(labeling_count(star(3), 0), 1);
  // hung from vertex 1: a leaf and a two-vertex chain, the chain in order
  EXPECT_EQ(labeling_count(path(3), 1), 1);
  EXPECT_EQ(labeling_count(path(4), 1), 3);
}

TEST(LabelingCount, RejectsExactModeAboveCap) {
  RngStream rng{5, 0};
  const Tree t = generate_urrt(21, rng);
  EXPECT_THROW(labeling_count(t, 0), std::invalid_argument);
  EXPECT_NO_THROW(log_labeling_count(UnrootedTree::from_tree(t), 0));
}

// For every rooted shape reachable at n <= 7, the formula equals the number
// of parent sequences producing it; summed over unrooted shapes and roots it
// recovers n!.
TEST(LabelingCount, EqualsEnumerationCounts) {
  for (std::size_t n = 0; n <= 7; ++n) {
    std::map<std::string, std::pair<std::size_t, Tree>> rooted;
    for_each_parent_sequence(n, [&](const std::vector<Vertex>& parent) {
      const Tree t{parent};
      const auto key = canonical_string_rooted(UnrootedTree::from_tree(t), 0);
      auto [it, fresh] = rooted.try_emplace(key, 0, t);
      ++it->second.first;
    });
    for (const auto& [key, entry] : rooted) {
      ASSERT_EQ(labeling_count(entry.second, 0), entry.first) << key;
      ASSERT_NEAR(log_labeling_count(UnrootedTree::from_tree(entry.second), 0), std::log(static_cast<double>(entry.first)),
                  1e-9);
    }
    std::map<std::string, UnrootedTree> shapes;
    for (const auto& [key, entry] : rooted) {
      const auto view = UnrootedTree::from_tree(entry.second);
      shapes.emplace(canonical_string_unrooted(view), view);
    }
    BigRational total = 0;
    for (const auto& [key, view] : shapes) {
      for (const auto& w : exact_root_weights(view)) total += w;
    }
    BigInt nfact = 1;
    for (std::size_t i = 2; i <= n; ++i) nfact *= i;
    EXPECT_EQ(total, BigRational{nfact}) << "n = " << n;
  }
}

TEST(RootPosterior, PathOfThree) {
  const auto view = UnrootedTree::from_tree(path(3));
  const auto exact = exact_posterior(view);
  EXPECT_EQ(exact[0], BigRational(1, 4));
  EXPECT_EQ(exact[1], BigRational(1, 2));
  EXPECT_EQ(exact[2], BigRational(1, 4));
  const auto post = root_likelihoods(view).posterior;
  EXPECT_NEAR(post[0], 0.25, 1e-12);
  EXPECT_NEAR(post[1], 0.5, 1e-12);
  EXPECT_NEAR(post[2], 0.25, 1e-12);
}

TEST(RootPosterior, SingleVertex) {
  const auto post = root_likelihoods(Tree{}).posterior;
  ASSERT_EQ(post.size(), 1u);
  EXPECT_DOUBLE_EQ(post[0], 1.0);
}

// Root frequencies conditioned on the unrooted shape, from all n! sequences,
// against the exact posterior and the log-space one.
TEST(RootPosterior, EqualsConditionalRootFrequencies) {
  for (std::size_t n = 1; n <= 7; ++n) {
    struct Shape {
      UnrootedTree view;
      std::map<std::string, std::size_t> root_class;  // rooted string at vertex 0 -> count
      std::size_t total = 0;
    };
    std::map<std::string, Shape> shapes;
    for_each_parent_sequence(n, [&](const std::vector<Vertex>& parent) {
      const auto view = UnrootedTree::from_tree(Tree{parent});
      auto [it, fresh] = shapes.try_emplace(canonical_string_unrooted(view), Shape{view, {}, 0});
      ++it->second.root_class[canonical_string_rooted(view, 0)];
      ++it->second.total;
    });
    for (const auto& [key, s] : shapes) {
      const auto exact = exact_posterior(s.view);
      const auto logs = root_likelihoods(s.view);
      const AllRootsCodes all{s.view};
      BigRational sum = 0;
      for (std::size_t u = 0; u < s.view.vertex_count(); ++u) {
        const auto it = s.root_class.find(canonical_string_rooted(s.view, static_cast<Vertex>(u)));
        const std::size_t hits = it == s.root_class.end() ? 0 : it->second;
        const BigRational freq{BigInt{hits}, BigInt{s.total} * all.aut(static_cast<Vertex>(u))};
        ASSERT_EQ(exact[u], freq) << key << " u=" << u;
        ASSERT_NEAR(logs.posterior[u], freq.convert_to<double>(), 1e-12);
        sum += exact[u];
      }
      ASSERT_EQ(sum, 1);
    }
  }
}

TEST(RootPosterior, LogSpaceAgreesWithExactUpToTwenty) {
  RngStream rng{6, 0};
  for (int rep = 0; rep < 200; ++rep) {
    const Tree t = rep % 2 ? generate_urrt(1 + rng.below(20), rng) : generate_pa(1 + rng.below(20), PaParams{1.0}, rng);
    const auto view = UnrootedTree::relabeled(t, random_permutation(t.vertex_count(), rng));
    const auto exact = exact_posterior(view);
    const auto weights = exact_root_weights(view);
    const auto logs = root_likelihoods(view);
    double total = 0.0;
    for (std::size_t u = 0; u < view.vertex_count(); ++u) {
      const double e = exact[u].convert_to<double>();
      EXPECT_LE(std::abs(logs.posterior[u] - e), 1e-10 * e);
      total += logs.posterior[u];
      // (n+1)! lambda(u) = count(u) / Aut(u)
      const double lhs = std::lgamma(static_cast<double>(view.vertex_count()) + 1.0) + logs.log_lambda[u];
      EXPECT_NEAR(lhs, std::log(weights[u].convert_to<double>()), 1e-9);
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(RootPosterior, InvariantUnderRelabeling) {
  RngStream rng{7, 0};
  for (int rep = 0; rep < 50; ++rep) {
    const Tree t = generate_urrt(1 + rng.below(2000), rng);
    const auto base = root_likelihoods(t).posterior;
    const auto perm = random_permutation(t.vertex_count(), rng);
    const auto moved = root_likelihoods(UnrootedTree::relabeled(t, perm)).posterior;
    for (std::size_t v = 0; v < t.vertex_count(); ++v) {
      EXPECT_NEAR(moved[static_cast<std::size_t>(perm[v])], base[v], 1e-12 + 1e-9 * base[v]);
    }
  }
}

TEST(RootPosterior, LargeTreeIsFiniteAndNormalized) {
  RngStream rng{8, 0};
  const Tree t = generate_urrt(100000, rng);
  const auto post = root_likelihoods(t).posterior;
  double total = 0.0;
  for (double p : post) {
    ASSERT_TRUE(std::isfinite(p));
    total += p;
  }
  EXPECT_NEAR(total, 1.0, 1e-9);
}
