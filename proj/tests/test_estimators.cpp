#include <gtest/gtest.h>

#include <type_traits>

#include "instances.hpp"
#include "oracles.hpp"
#include "rrtb/estimators.hpp"
#include "rrtb/harness.hpp"
#include "rrtb/tree_gen.hpp"

using namespace rrtb;

namespace {

Tree path(std::size_t vertices) {
  std::vector<Vertex> p(vertices);
  p[0] = kNoVertex;
  for (std::size_t i = 1; i < vertices; ++i) p[i] = static_cast<Vertex>(i - 1);
  return Tree{p};
}

ObservedBits full(std::vector<Bit> bits) { return BitAssignment{std::move(bits)}.observe(); }

bool same(const Fraction& a, const Fraction& b) { return a.num * b.den == b.num * a.den; }

}  // namespace

TEST(Majority, UnanimousAndTie) {
  EXPECT_EQ(majority_estimate(full({1, 1, 1})).value, 1);
  EXPECT_EQ(majority_estimate(full({1, -1})).value, -1);
  EXPECT_EQ(majority_estimate(full({-1, -1, 1})).value, -1);
  EXPECT_FALSE(majority_estimate(full({1, -1})).used_randomness);
}

TEST(Majority, LeavesOnlyCountsLeaves) {
  const Tree t{std::vector<Vertex>{kNoVertex, 0, 0, 0, 1}};  // leaves 2, 3, 4
  const BitAssignment b{std::vector<Bit>{-1, -1, 1, 1, -1}};
  EXPECT_EQ(majority_estimate(b.observe()).value, -1);
  EXPECT_EQ(majority_estimate(b.leaves_only(t).observe()).value, 1);
}

TEST(Majority, ExhaustiveRiskMatchesEnumeration) {
  const oracle::Rational q{1, 5};
  for (std::size_t n = 1; n <= 7; ++n) {
    const auto p = exhaustive_error_profile(n, EstimatorKind::majority, Visibility::all_vertices);
    EXPECT_EQ(exhaustive_risk(p, q), oracle::enumerate_risk(n, q, oracle::Rule::majority_all)) << "n = " << n;
  }
}

TEST(Centroid, NoNoiseIsAlwaysRight) {
  RngStream rng{1, 0};
  for (int rep = 0; rep < 200; ++rep) {
    const Tree t = generate_urrt(1 + rng.below(300), rng);
    const auto b = assign_bits(t, 0.0, rng);
    const auto perm = random_permutation(t.vertex_count(), rng);
    const auto view = UnrootedTree::relabeled(t, perm);
    EXPECT_EQ(centroid_estimate(view, b.observe(perm), rng).value, b.root_bit());
    EXPECT_EQ(centroid_estimate(view, b.leaves_only(t).observe(perm), rng).value, b.root_bit());
  }
}

TEST(Centroid, PathOfThree) {
  RngStream rng{2, 0};
  const auto view = UnrootedTree::from_tree(path(3));
  const auto e = centroid_estimate(view, full({1, -1, 1}), rng);
  EXPECT_EQ(e.value, -1);
  EXPECT_FALSE(e.used_randomness);
}

TEST(Centroid, TwoCentroidsUseACoin) {
  const auto view = UnrootedTree::from_tree(path(4));
  std::size_t plus = 0;
  const std::size_t trials = 20000;
  RngStream rng{3, 0};
  for (std::size_t t = 0; t < trials; ++t) {
    const auto e = centroid_estimate(view, full({1, 1, -1, -1}), rng);
    EXPECT_TRUE(e.used_randomness);
    plus += e.value > 0;
  }
  EXPECT_NEAR(static_cast<double>(plus) / trials, 0.5, 0.02);
  ShapeContext ctx{view};
  EXPECT_TRUE(same(estimator_prob_plus(EstimatorKind::centroid, ctx, full({1, 1, -1, -1})), {1, 2}));
}

TEST(Centroid, LeavesVariantReadsNearestLeaf) {
  // path 0 - 1 - 2 - 3 - 4, leaf 5 on vertex 1, leaves 6 and 7 on vertex 2
  const Tree t{std::vector<Vertex>{kNoVertex, 0, 1, 2, 3, 1, 2, 2}};
  const auto view = UnrootedTree::from_tree(t);
  ASSERT_EQ(centroids(view), (std::vector<Vertex>{2}));
  const BitAssignment b{std::vector<Bit>{1, 1, 1, 1, 1, 1, -1, 1}};
  RngStream rng{4, 0};
  // leaves 6 and 7 are both next to the centroid; label 6 wins
  EXPECT_EQ(centroid_estimate(view, b.leaves_only(t).observe(), rng).value, -1);
  ShapeContext ctx{view};
  EXPECT_TRUE(same(estimator_prob_plus(EstimatorKind::centroid, ctx, b.leaves_only(t).observe()), {1, 2}));
}

TEST(Centroid, ExhaustiveRiskMatchesEnumeration) {
  const oracle::Rational q{3, 10};
  for (std::size_t n = 1; n <= 6; ++n) {
    const auto p = exhaustive_error_profile(n, EstimatorKind::centroid, Visibility::all_vertices);
    EXPECT_EQ(exhaustive_risk(p, q), oracle::enumerate_risk(n, q, oracle::Rule::centroid_all)) << "n = " << n;
  }
}

TEST(Centroid, SingleEdgeRiskByHand) {
  // both vertices are centroids: half the time the root is read, half the
  // time the child, which is wrong with probability q
  const auto p = exhaustive_error_profile(1, EstimatorKind::centroid, Visibility::all_vertices);
  for (int k = 0; k <= 10; ++k) {
    const BigRational q{k, 10};
    EXPECT_EQ(exhaustive_risk(p, q), q / 2);
  }
}

TEST(Centroid, LargeTreeErrorRate) {
  ExperimentConfig c;
  c.model = Model::urrt();
  c.n = 10000;
  c.q_grid = {0.1};
  c.estimators = {EstimatorKind::centroid};
  c.trials = 10000;
  c.seed = 11;
  const auto r = run_experiment(c);
  EXPECT_LE(r[0].error_rate, 0.13);
}

TEST(Bayes, UnanimousBits) {
  RngStream rng{5, 0};
  const Tree t = generate_urrt(12, rng);
  const auto view = UnrootedTree::from_tree(t);
  for (Bit b : {Bit{1}, Bit{-1}}) {
    EXPECT_EQ(bayes_estimate(view, full(std::vector<Bit>(13, b))).value, b);
  }
  const Tree big = generate_urrt(300, rng);
  EXPECT_EQ(bayes_estimate(UnrootedTree::from_tree(big), full(std::vector<Bit>(301, 1))).value, 1);
  EXPECT_EQ(bayes_estimate(UnrootedTree::from_tree(big), full(std::vector<Bit>(301, -1))).value, -1);
}

TEST(Bayes, PathOfThreeTiesToMinus) {
  const auto view = UnrootedTree::from_tree(path(3));
  EXPECT_EQ(bayes_estimate(view, full({1, -1, 1})).value, -1);
  // posterior (1/4, 1/2, 1/4) balances both patterns exactly
  EXPECT_EQ(bayes_estimate(view, full({-1, 1, -1})).value, -1);
  EXPECT_EQ(bayes_estimate(view, full({1, 1, -1})).value, 1);
}

TEST(Bayes, RejectsLeavesOnly) {
  const Tree t = path(3);
  const auto view = UnrootedTree::from_tree(t);
  const BitAssignment b{std::vector<Bit>{1, 1, 1}};
  EXPECT_THROW(bayes_estimate(view, b.leaves_only(t).observe()), std::invalid_argument);
}

TEST(Bayes, TakesNoFlipProbability) {
  static_assert(std::is_same_v<decltype(&bayes_decision), Bit (*)(ShapeContext&, const ObservedBits&)>);
  SUCCEED();
}

// The implemented rule reaches the smallest risk any rule can have, found by
// grouping outcomes by what the observer sees.
TEST(Bayes, ExactRiskEqualsOptimum) {
  for (std::size_t n = 1; n <= 6; ++n) {
    const auto p = exhaustive_error_profile(n, EstimatorKind::bayes, Visibility::all_vertices);
    for (const oracle::Rational& q : {oracle::Rational{1, 10}, oracle::Rational{3, 10}}) {
      EXPECT_EQ(exhaustive_risk(p, q), oracle::optimal_risk(n, q)) << "n = " << n;
    }
  }
}

TEST(Bayes, DominatesOtherEstimatorsExactly) {
  for (std::size_t n = 1; n <= 7; ++n) {
    const auto bayes = exhaustive_error_profile(n, EstimatorKind::bayes, Visibility::all_vertices);
    const auto maj = exhaustive_error_profile(n, EstimatorKind::majority, Visibility::all_vertices);
    const auto cent = exhaustive_error_profile(n, EstimatorKind::centroid, Visibility::all_vertices);
    const auto strc = exhaustive_error_profile(n, EstimatorKind::structured, Visibility::all_vertices);
    for (int k = 1; k <= 9; k += 2) {
      const BigRational q{k, 20};  // 0.05, 0.15, ..., 0.45
      const auto rb = exhaustive_risk(bayes, q);
      EXPECT_LE(rb, exhaustive_risk(maj, q)) << n << " " << k;
      EXPECT_LE(rb, exhaustive_risk(cent, q)) << n << " " << k;
      EXPECT_LE(rb, exhaustive_risk(strc, q)) << n << " " << k;
    }
  }
}

// Above 20 edges the decision runs on floating-point posteriors; it agrees
// with the exact one away from ties.
TEST(Bayes, FloatingDecisionAgreesWithExact) {
  RngStream rng{6, 0};
  int compared = 0;
  for (int rep = 0; rep < 300; ++rep) {
    const Tree t = generate_urrt(5 + rng.below(16), rng);
    const auto view = UnrootedTree::relabeled(t, random_permutation(t.vertex_count(), rng));
    ShapeContext ctx{view};
    const auto& post = ctx.posterior();
    for (int k = 0; k < 20; ++k) {
      std::vector<Bit> bits(t.vertex_count());
      for (auto& b : bits) b = static_cast<Bit>(rng.sign());
      const auto obs = full(bits);
      double diff = 0.0;
      for (std::size_t u = 0; u < bits.size(); ++u) diff += bits[u] * post[u];
      if (std::abs(diff) < 1e-9) continue;
      ++compared;
      EXPECT_EQ(bayes_decision(ctx, obs), diff > 0 ? 1 : -1);
    }
  }
  EXPECT_GT(compared, 3000);
}

TEST(Invariance, RelabelingLeavesEstimatesUnchanged) {
  RngStream rng{7, 0};
  for (int rep = 0; rep < 300; ++rep) {
    const Tree t = generate_urrt(1 + rng.below(rep % 3 ? 15 : 400), rng);
    const auto b = assign_bits(t, 0.25, rng);
    const auto p1 = random_permutation(t.vertex_count(), rng);
    const auto p2 = random_permutation(t.vertex_count(), rng);
    const auto v1 = UnrootedTree::relabeled(t, p1), v2 = UnrootedTree::relabeled(t, p2);
    ShapeContext c1{v1}, c2{v2};
    for (auto vis : {Visibility::all_vertices, Visibility::leaves_only}) {
      const auto bb = vis == Visibility::leaves_only ? b.leaves_only(t) : b;
      const auto o1 = bb.observe(p1), o2 = bb.observe(p2);
      for (auto kind : {EstimatorKind::majority, EstimatorKind::centroid, EstimatorKind::bayes}) {
        if (kind == EstimatorKind::bayes && vis == Visibility::leaves_only) continue;
        EXPECT_TRUE(same(estimator_prob_plus(kind, c1, o1), estimator_prob_plus(kind, c2, o2)))
            << to_string(kind) << " " << to_string(vis);
      }
      EXPECT_EQ(majority_estimate(o1).value, majority_estimate(o2).value);
      if (vis == Visibility::all_vertices) {
        EXPECT_EQ(bayes_estimate(c1, o1).value, bayes_estimate(c2, o2).value);
      }
    }
  }
}

TEST(Invariance, GlobalFlipNegatesOutsideTies) {
  RngStream rng{8, 0};
  for (int rep = 0; rep < 300; ++rep) {
    const Tree t = generate_urrt(1 + rng.below(rep % 3 ? 15 : 400), rng);
    const auto view = UnrootedTree::from_tree(t);
    ShapeContext ctx{view};
    const auto b = assign_bits(t, 0.3, rng);
    for (auto vis : {Visibility::all_vertices, Visibility::leaves_only}) {
      const auto obs = (vis == Visibility::leaves_only ? b.leaves_only(t) : b).observe();
      const auto neg = obs.negated();
      if (visible_sum(obs) != 0) {
        EXPECT_EQ(majority_estimate(obs).value, -majority_estimate(neg).value);
      }
      const auto cp = estimator_prob_plus(EstimatorKind::centroid, ctx, obs);
      const auto cn = estimator_prob_plus(EstimatorKind::centroid, ctx, neg);
      EXPECT_EQ(cp.num * cn.den + cn.num * cp.den, cp.den * cn.den);
      if (vis == Visibility::all_vertices) {
        double diff = 0.0;
        const auto& post = ctx.posterior();
        for (std::size_t u = 0; u < post.size(); ++u) diff += obs.bit(static_cast<Vertex>(u)) * post[u];
        if (std::abs(diff) > 1e-9) {
          EXPECT_EQ(bayes_estimate(ctx, obs).value, -bayes_estimate(ctx, neg).value);
        }
      }
    }
  }
}

TEST(StructParamsTest, Validation) {
  EXPECT_NO_THROW(StructParams{}.validate());
  EXPECT_DOUBLE_EQ(StructParams{}.eps, 1.0 / (4.0 * 256.0));
  EXPECT_THROW((StructParams{3, 3, 0.001, {}}).validate(), std::invalid_argument);
  EXPECT_THROW((StructParams{4, 5, 0.0001, {}}).validate(), std::invalid_argument);
  EXPECT_THROW((StructParams{4, 4, 1.0 / 512.0, {}}).validate(), std::invalid_argument);
  EXPECT_THROW((StructParams{4, 4, 0.0, {}}).validate(), std::invalid_argument);
  EXPECT_EQ(StructParams{}.d_size(), 341u);
  EXPECT_EQ(StructParams{}.internal_count(), 85u);
}

TEST(DetectStructure, PathAndSmallTrees) {
  RngStream rng{9, 0};
  EXPECT_FALSE(detect_structure(UnrootedTree::from_tree(path(500)), StructParams{}));
  for (int rep = 0; rep < 200; ++rep) {
    const Tree t = generate_urrt(rng.below(31), rng);
    EXPECT_FALSE(detect_structure(UnrootedTree::from_tree(t), StructParams{}));
  }
}

TEST(DetectStructure, HandBuiltPositive) {
  const auto built = instances::build(instances::distinct_brooms());
  ASSERT_EQ(built.witness.x0, 0);
  const auto view = UnrootedTree::from_tree(built.tree);
  const auto rep = check_structure(view, StructParams{}, built.witness);
  EXPECT_TRUE(rep.complete_subtree);
  EXPECT_TRUE(rep.part_sizes);
  EXPECT_TRUE(rep.distinct_leaf_parts);
  EXPECT_TRUE(rep.rigid);
  const auto found = detect_structure(view, StructParams{});
  ASSERT_TRUE(found);
  EXPECT_EQ(found->x0, 0);
  EXPECT_TRUE(check_structure(view, StructParams{}, *found).all());

  // hidden behind a random relabeling
  RngStream rng{10, 0};
  const auto perm = random_permutation(built.tree.vertex_count(), rng);
  const auto shuffled = detect_structure(UnrootedTree::relabeled(built.tree, perm), StructParams{});
  ASSERT_TRUE(shuffled);
  EXPECT_EQ(shuffled->x0, perm[0]);
}

TEST(DetectStructure, LiteralFloorRejectsEverything) {
  const auto built = instances::build(instances::distinct_brooms());
  const auto p = StructParams::literal(4, 4, 1.0 / 1024.0);
  const auto view = UnrootedTree::from_tree(built.tree);
  EXPECT_FALSE(check_structure(view, p, built.witness).part_sizes);
  EXPECT_FALSE(detect_structure(view, p));
}

TEST(DetectStructure, BrokenEmbeddingFailsCompleteness) {
  const auto built = instances::build(instances::distinct_brooms());
  auto w = built.witness;
  std::swap(w.d_vertices[5], w.d_vertices[300]);
  EXPECT_FALSE(check_structure(UnrootedTree::from_tree(built.tree), StructParams{}, w).complete_subtree);
}

TEST(DetectStructure, UnbalancedPartsFailSizes) {
  auto recipe = instances::distinct_brooms();
  recipe.part_size[0] = 420;
  recipe.part_size[1] = 380;
  const auto built = instances::build(recipe);
  const auto view = UnrootedTree::from_tree(built.tree);
  const auto rep = check_structure(view, StructParams{}, built.witness);
  EXPECT_TRUE(rep.complete_subtree);
  EXPECT_FALSE(rep.part_sizes);
  EXPECT_TRUE(rep.distinct_leaf_parts);
  EXPECT_FALSE(detect_structure(view, StructParams{}));
}

TEST(DetectStructure, RepeatedLeafPartsFailDistinctness) {
  auto recipe = instances::distinct_brooms();
  recipe.handle[7] = recipe.handle[200];
  const auto built = instances::build(recipe);
  const auto view = UnrootedTree::from_tree(built.tree);
  const auto rep = check_structure(view, StructParams{}, built.witness);
  EXPECT_TRUE(rep.complete_subtree);
  EXPECT_TRUE(rep.part_sizes);
  EXPECT_FALSE(rep.distinct_leaf_parts);
  EXPECT_FALSE(detect_structure(view, StructParams{}));
}

TEST(DetectStructure, TwinPendantsFailRigidity) {
  auto recipe = instances::distinct_brooms();
  recipe.pendant_leaves_at_x0 = 2;
  const auto built = instances::build(recipe);
  const auto view = UnrootedTree::from_tree(built.tree);
  const auto rep = check_structure(view, StructParams{}, built.witness);
  EXPECT_TRUE(rep.complete_subtree);
  EXPECT_TRUE(rep.part_sizes);
  EXPECT_TRUE(rep.distinct_leaf_parts);
  EXPECT_FALSE(rep.rigid);
  EXPECT_FALSE(detect_structure(view, StructParams{}));
}

TEST(Structured, NoDetectionFlipsACoin) {
  RngStream rng{11, 0};
  const Tree t = generate_urrt(50, rng);
  const auto view = UnrootedTree::from_tree(t);
  std::size_t plus = 0;
  const std::size_t trials = 20000;
  ShapeContext ctx{view};
  const auto obs = assign_bits(t, 0.9, rng).observe();
  for (std::size_t k = 0; k < trials; ++k) {
    const auto e = structured_estimate(ctx, obs, rng);
    EXPECT_TRUE(e.used_randomness);
    plus += e.value > 0;
  }
  EXPECT_NEAR(static_cast<double>(plus) / trials, 0.5, 0.02);
}

TEST(Structured, CertainFlipsOnHandBuiltInstance) {
  const auto built = instances::build(instances::distinct_brooms());
  RngStream rng{12, 0};
  for (Bit root : {Bit{1}, Bit{-1}}) {
    const auto b = assign_bits(built.tree, 1.0, root, rng);
    const auto perm = random_permutation(built.tree.vertex_count(), rng);
    const auto view = UnrootedTree::relabeled(built.tree, perm);
    const auto e = structured_estimate(view, b.observe(perm), StructParams{}, rng);
    EXPECT_EQ(e.value, root);
    EXPECT_FALSE(e.used_randomness);
  }
}

TEST(Structured, LeafVariantNeedsALeafOnX0) {
  RngStream rng{13, 0};
  {
    // no leaf touches x0: coin
    const auto built = instances::build(instances::distinct_brooms());
    const auto b = assign_bits(built.tree, 1.0, Bit{1}, rng).leaves_only(built.tree);
    const auto view = UnrootedTree::from_tree(built.tree);
    ShapeContext ctx{view};
    ASSERT_TRUE(ctx.structure());
    EXPECT_TRUE(structured_estimate(ctx, b.observe(), rng).used_randomness);
  }
  {
    auto recipe = instances::distinct_brooms();
    recipe.pendant_leaves_at_x0 = 1;
    const auto built = instances::build(recipe);
    for (Bit root : {Bit{1}, Bit{-1}}) {
      const auto b = assign_bits(built.tree, 1.0, root, rng).leaves_only(built.tree);
      const auto perm = random_permutation(built.tree.vertex_count(), rng);
      const auto view = UnrootedTree::relabeled(built.tree, perm);
      const auto e = structured_estimate(view, b.observe(perm), StructParams{}, rng);
      EXPECT_FALSE(e.used_randomness);
      EXPECT_EQ(e.value, root);
    }
  }
}

TEST(RunEstimator, DispatchesByKind) {
  const auto view = UnrootedTree::from_tree(path(3));
  ShapeContext ctx{view};
  RngStream rng{14, 0};
  const auto obs = full({1, -1, 1});
  EXPECT_EQ(run_estimator(EstimatorKind::majority, ctx, obs, rng).estimator, EstimatorKind::majority);
  EXPECT_EQ(run_estimator(EstimatorKind::majority, ctx, obs, rng).value, 1);
  EXPECT_EQ(run_estimator(EstimatorKind::centroid, ctx, obs, rng).value, -1);
  EXPECT_EQ(run_estimator(EstimatorKind::bayes, ctx, obs, rng).value, -1);
  EXPECT_TRUE(run_estimator(EstimatorKind::structured, ctx, obs, rng).used_randomness);
  EXPECT_EQ(parse_estimator("bayes"), EstimatorKind::bayes);
  EXPECT_THROW(parse_estimator("median"), std::invalid_argument);
}
