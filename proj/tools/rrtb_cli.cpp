#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "rrtb/broadcast.hpp"
#include "rrtb/estimators.hpp"
#include "rrtb/harness.hpp"
#include "rrtb/io.hpp"
#include "rrtb/isomorphism.hpp"
#include "rrtb/moments.hpp"
#include "rrtb/tree_gen.hpp"
#include "rrtb/tree_struct.hpp"

using namespace rrtb;

namespace {

constexpr int kConfigErrorExit = 2;

std::string csv_double(double x) { return detail::fmt_double(x); }

std::string csv_opt(const std::optional<double>& x) { return x ? detail::fmt_double(*x) : std::string{}; }

int cmd_gen(const std::string& model, std::size_t n, double beta, std::uint64_t seed, const std::string& out) {
  RngStream rng{seed, 0};
  TreeFileHeader h;
  h.seed = seed;
  Tree t;
  if (model == "urrt") {
    t = generate_urrt(n, rng);
  } else {
    h.model = "pa";
    h.beta = beta;
    t = generate_pa(n, PaParams{beta}, rng);
  }
  write_tree_file(out, t, h);
  return 0;
}

int cmd_broadcast(const std::string& tree_path, double q, std::uint64_t seed, const std::string& out, bool leaves) {
  const auto [tree, header] = read_tree_file(tree_path);
  RngStream rng{seed, 1};
  auto bits = assign_bits(tree, q, rng);
  if (leaves) bits = bits.leaves_only(tree);
  write_bits_file(out, bits);
  return 0;
}

std::size_t leaf_count(const Tree& t) {
  std::size_t k = 0;
  for (std::size_t v = 0; v < t.vertex_count(); ++v) k += t.is_leaf(static_cast<Vertex>(v));
  return k;
}

int cmd_stats(const std::string& tree_path) {
  const auto [tree, header] = read_tree_file(tree_path);
  const auto s = structural_summary(tree);
  const auto cs = centroids(tree);
  std::cout << "section,key,value\n";
  std::cout << "tree,model," << header.model << "\n";
  std::cout << "tree,n," << tree.edge_count() << "\n";
  std::cout << "tree,leaves," << leaf_count(tree) << "\n";
  for (Vertex c : cs) {
    std::cout << "centroid," << c << "," << s.depth[static_cast<std::size_t>(c)] << "\n";
  }
  for (std::size_t v = 0; v < s.phi.size(); ++v) std::cout << "phi," << v << "," << s.phi[v] << "\n";
  std::map<std::uint32_t, std::size_t> hist;
  for (auto d : s.depth) ++hist[d];
  for (const auto& [d, k] : hist) std::cout << "depth," << d << "," << k << "\n";
  return 0;
}

int cmd_root_posterior(const std::string& tree_path, const std::string& out_path) {
  const auto [tree, header] = read_tree_file(tree_path);
  const auto post = root_likelihoods(tree);
  auto out = open_for_write(out_path);
  out << "v,log_lambda,posterior\n";
  for (std::size_t v = 0; v < post.posterior.size(); ++v) {
    out << v << ',' << csv_double(post.log_lambda[v]) << ',' << csv_double(post.posterior[v]) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + out_path + "'");
  return 0;
}

int cmd_estimate(const std::string& tree_path, const std::string& bits_path, const std::string& estimator, bool leaves,
                 const StructParams& params, std::uint64_t seed) {
  const auto [tree, header] = read_tree_file(tree_path);
  auto obs = read_bits_file(bits_path);
  if (obs.size() != tree.vertex_count()) throw std::invalid_argument("bits file does not match the tree size");
  if (leaves && obs.visibility() == Visibility::all_vertices) {
    std::vector<Bit> b(obs.size());
    std::vector<char> vis(obs.size());
    for (std::size_t v = 0; v < obs.size(); ++v) {
      b[v] = obs.bit(static_cast<Vertex>(v));
      vis[v] = tree.is_leaf(static_cast<Vertex>(v));
    }
    obs = ObservedBits{std::move(b), std::move(vis), Visibility::leaves_only};
  }
  const auto kind = parse_estimator(estimator);
  params.validate();
  RngStream rng{seed, 2};
  // the estimator only sees the shape under fresh labels
  const auto perm = random_permutation(tree.vertex_count(), rng);
  const auto view = UnrootedTree::relabeled(tree, perm);
  ShapeContext ctx{view, params};
  const auto e = run_estimator(kind, ctx, obs.relabeled(perm), rng);
  std::cout << "estimator,visibility,estimate,used_randomness\n";
  std::cout << to_string(kind) << ',' << to_string(obs.visibility()) << ',' << int{e.value} << ','
            << (e.used_randomness ? 1 : 0) << '\n';
  return 0;
}

int cmd_moments(const std::string& lemma, double q, std::size_t i, std::size_t n, double beta) {
  BoundQuery b;
  b.q = q;
  b.i = i;
  b.n = n;
  b.beta = beta;
  const auto rows = bound_suite(parse_lemma(lemma), b);
  std::cout << "source,quantity,q,i,n,beta,lower,exact,upper,holds\n";
  for (const auto& r : rows) {
    std::cout << r.source << ',' << r.quantity << ',' << csv_double(q) << ',' << i << ',' << n << ','
              << csv_double(beta) << ',' << csv_opt(r.lower) << ',' << csv_opt(r.exact) << ',' << csv_opt(r.upper)
              << ',' << (r.holds() ? 1 : 0) << '\n';
  }
  return 0;
}

int cmd_experiment(const std::string& config_path, const std::string& out, const std::string& format,
                   unsigned threads) {
  ExperimentConfig c;
  try {
    c = load_config(config_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigErrorExit;
  }
  const auto fmt = parse_format(format);
  const auto rows = run_experiment(c, threads);
  if (out.empty()) {
    emit_results(rows, fmt, std::cout);
  } else {
    emit_results(rows, fmt, out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"root bit estimation on random recursive trees"};
  app.require_subcommand(1);

  std::string model = "urrt", out, tree_path, bits_path, estimator = "majority", lemma, config, format = "csv";
  std::size_t n = 0, i = 0;
  double beta = 1.0, q = 0.1;
  std::uint64_t seed = 0;
  bool leaves = false;
  unsigned threads = 1;
  StructParams params;

  auto* gen = app.add_subcommand("gen", "generate a random recursive tree");
  gen->add_option("--model", model)->check(CLI::IsMember({"urrt", "pa"}));
  gen->add_option("--n", n, "number of edges")->required();
  gen->add_option("--beta", beta)->check(CLI::PositiveNumber);
  gen->add_option("--seed", seed)->required();
  gen->add_option("--out", out)->required();

  auto* bc = app.add_subcommand("broadcast", "broadcast bits down a tree");
  bc->add_option("--tree", tree_path)->required()->check(CLI::ExistingFile);
  bc->add_option("--q", q)->required()->check(CLI::Range(0.0, 1.0));
  bc->add_option("--seed", seed)->required();
  bc->add_option("--out", out)->required();
  bc->add_flag("--leaves-only", leaves, "mask internal bits");

  auto* st = app.add_subcommand("stats", "centroids, phi and depth histogram");
  st->add_option("--tree", tree_path)->required()->check(CLI::ExistingFile);

  auto* rp = app.add_subcommand("root-posterior", "posterior of every vertex being the root");
  rp->add_option("--tree", tree_path)->required()->check(CLI::ExistingFile);
  rp->add_option("--out", out)->required();

  auto* est = app.add_subcommand("estimate", "estimate the root bit of a shuffled tree");
  est->add_option("--tree", tree_path)->required()->check(CLI::ExistingFile);
  est->add_option("--bits", bits_path)->required()->check(CLI::ExistingFile);
  est->add_option("--estimator", estimator)->check(CLI::IsMember({"majority", "centroid", "bayes", "structured"}));
  est->add_flag("--leaves-only", leaves);
  est->add_option("--r", params.r);
  est->add_option("--k", params.k);
  est->add_option("--eps", params.eps);
  est->add_option("--seed", seed)->required();

  auto* mom = app.add_subcommand("moments", "moment bounds next to exact values");
  mom->add_option("--lemma", lemma)->required()->check(
      CLI::IsMember({"l8", "l9", "l10", "l12", "l14", "leaf", "pa1", "pa2"}));
  mom->add_option("--q", q)->required();
  mom->add_option("--i", i)->required();
  mom->add_option("--n", n)->required();
  mom->add_option("--beta", beta);

  auto* run = app.add_subcommand("experiment", "Monte Carlo risk estimates from a JSON config");
  run->add_option("--config", config)->required();
  run->add_option("--out", out);
  run->add_option("--format", format)->check(CLI::IsMember({"csv", "json"}));
  run->add_option("--threads", threads)->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen(model, n, beta, seed, out);
    if (*bc) return cmd_broadcast(tree_path, q, seed, out, leaves);
    if (*st) return cmd_stats(tree_path);
    if (*rp) return cmd_root_posterior(tree_path, out);
    if (*est) return cmd_estimate(tree_path, bits_path, estimator, leaves, params, seed);
    if (*mom) return cmd_moments(lemma, q, i, n, beta);
    if (*run) return cmd_experiment(config, out, format, threads);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
