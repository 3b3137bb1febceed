#pragma once

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "rrtb/broadcast.hpp"
#include "rrtb/estimators.hpp"
#include "rrtb/io.hpp"
#include "rrtb/rng.hpp"
#include "rrtb/tree.hpp"
#include "rrtb/tree_gen.hpp"

namespace rrtb {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline Visibility parse_visibility(const std::string& s) {
  if (s == "all") return Visibility::all_vertices;
  if (s == "leaves") return Visibility::leaves_only;
  throw ConfigError("visibility must be 'all' or 'leaves', got '" + s + "'");
}

struct ExperimentConfig {
  Model model;
  std::size_t n = 0;
  std::vector<double> q_grid;
  std::vector<EstimatorKind> estimators;
  Visibility visibility = Visibility::all_vertices;
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  std::optional<StructParams> struct_params;

  void validate() const {
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (q_grid.empty()) throw ConfigError("q_grid must not be empty");
    for (double q : q_grid) {
      if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("q_grid entries must lie in [0, 1]");
    }
    if (estimators.empty()) throw ConfigError("estimators must not be empty");
    if (model.kind == ModelKind::pa && !(model.pa.beta > 0.0)) throw ConfigError("pa model needs beta > 0");
    for (auto e : estimators) {
      if (e == EstimatorKind::structured && !struct_params) {
        throw ConfigError("the structured estimator needs struct_params");
      }
      if (e == EstimatorKind::bayes && visibility == Visibility::leaves_only) {
        throw ConfigError("the bayes estimator needs all vertex bits");
      }
    }
    if (struct_params) {
      try {
        struct_params->validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
  }

  static ExperimentConfig from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    try {
      const auto model = j.at("model").get<std::string>();
      if (model == "urrt") {
        c.model = Model::urrt();
      } else if (model == "pa") {
        c.model = Model::preferential(j.value("beta", 1.0));
      } else {
        throw ConfigError("model must be 'urrt' or 'pa', got '" + model + "'");
      }
      c.n = j.at("n").get<std::size_t>();
      c.q_grid = j.at("q_grid").get<std::vector<double>>();
      for (const auto& name : j.at("estimators").get<std::vector<std::string>>()) {
        c.estimators.push_back(parse_estimator(name));
      }
      c.visibility = parse_visibility(j.value("visibility", std::string{"all"}));
      c.trials = j.at("trials").get<std::size_t>();
      c.seed = j.value("seed", std::uint64_t{0});
      if (j.contains("struct_params")) {
        const auto& s = j.at("struct_params");
        StructParams p;
        p.r = s.value("r", p.r);
        p.k = s.value("k", p.k);
        p.eps = s.value("eps", p.eps);
        if (s.contains("internal_floor")) p.internal_floor = s.at("internal_floor").get<double>();
        c.struct_params = p;
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config: ") + e.what());
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    c.validate();
    return c;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["model"] = model.name();
    if (model.kind == ModelKind::pa) j["beta"] = model.pa.beta;
    j["n"] = n;
    j["q_grid"] = q_grid;
    std::vector<std::string> names;
    for (auto e : estimators) names.emplace_back(to_string(e));
    j["estimators"] = names;
    j["visibility"] = to_string(visibility);
    j["trials"] = trials;
    j["seed"] = seed;
    if (struct_params) {
      j["struct_params"] = {{"r", struct_params->r}, {"k", struct_params->k}, {"eps", struct_params->eps}};
      if (struct_params->internal_floor) j["struct_params"]["internal_floor"] = *struct_params->internal_floor;
    }
    return j;
  }
};

// RBL_SEED, when set, replaces the configured seed.
inline void apply_seed_override(ExperimentConfig& c, const char* env_value) {
  if (env_value == nullptr || *env_value == '\0') return;
  std::uint64_t seed = 0;
  const char* end = env_value + std::char_traits<char>::length(env_value);
  const auto [ptr, ec] = std::from_chars(env_value, end, seed);
  if (ec != std::errc{} || ptr != end) throw ConfigError(std::string("RBL_SEED is not an integer: ") + env_value);
  c.seed = seed;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  auto c = ExperimentConfig::from_json(j);
  apply_seed_override(c, std::getenv("RBL_SEED"));
  return c;
}

struct RiskEstimate {
  std::string estimator;
  std::string model;
  double beta = 0.0;
  std::size_t n = 0;
  double q = 0.0;
  std::string visibility;
  std::size_t trials = 0;
  std::size_t errors = 0;
  double error_rate = 0.0;
  double ci_halfwidth = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const RiskEstimate&, const RiskEstimate&) = default;
};

inline double binomial_halfwidth(double p, std::size_t trials) {
  return 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

// Runs fn(task, acc) for task = 0..tasks-1 over `threads` workers, each with
// its own accumulator, then merges them. Accumulators hold integer counts, so
// the result does not depend on the thread count.
template <typename Acc, typename Fn>
Acc parallel_accumulate(std::size_t tasks, unsigned threads, const Acc& zero, Fn&& fn) {
  if (threads <= 1 || tasks <= 1) {
    Acc acc = zero;
    for (std::size_t t = 0; t < tasks; ++t) fn(t, acc);
    return acc;
  }
  std::atomic<std::size_t> next{0};
  std::vector<Acc> partial(threads, zero);
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t t; (t = next.fetch_add(1)) < tasks;) fn(t, partial[w]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = tasks;
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  Acc acc = zero;
  for (const auto& p : partial) acc.merge(p);
  return acc;
}

// One simulated observation: the generating tree and bits plus the observer's
// relabeled view.
struct Trial {
  Tree tree;
  BitAssignment bits;
  std::vector<Vertex> relabel;
  UnrootedTree view;
  ObservedBits observed;
};

inline Trial make_trial(const Model& model, std::size_t n, double q, Visibility visibility, RngStream& rng) {
  Trial t;
  t.tree = generate(model, n, rng);
  t.bits = assign_bits(t.tree, q, rng);
  if (visibility == Visibility::leaves_only) t.bits = t.bits.leaves_only(t.tree);
  t.relabel = random_permutation(t.tree.vertex_count(), rng);
  t.view = UnrootedTree::relabeled(t.tree, t.relabel);
  t.observed = t.bits.observe(t.relabel);
  return t;
}

namespace detail {
struct ErrorCounts {
  std::vector<std::size_t> errors;
  void merge(const ErrorCounts& o) {
    for (std::size_t i = 0; i < errors.size(); ++i) errors[i] += o.errors[i];
  }
};
}  // namespace detail

inline RiskEstimate make_risk(const ExperimentConfig& c, EstimatorKind e, double q, std::size_t errors) {
  RiskEstimate r;
  r.estimator = to_string(e);
  r.model = c.model.name();
  r.beta = c.model.beta();
  r.n = c.n;
  r.q = q;
  r.visibility = to_string(c.visibility);
  r.trials = c.trials;
  r.errors = errors;
  r.error_rate = static_cast<double>(errors) / static_cast<double>(c.trials);
  r.ci_halfwidth = binomial_halfwidth(r.error_rate, c.trials);
  r.seed = c.seed;
  return r;
}

// For every (q, estimator): simulate, relabel, estimate and count errors.
// Trial t at grid index k draws from stream (seed, stream_key(k, t)); all
// estimators see the same trial.
inline std::vector<RiskEstimate> run_experiment(const ExperimentConfig& c, unsigned threads = 1) {
  c.validate();
  const auto ne = c.estimators.size();
  const StructParams params = c.struct_params.value_or(StructParams{});
  const std::size_t tasks = c.q_grid.size() * c.trials;
  detail::ErrorCounts zero{std::vector<std::size_t>(c.q_grid.size() * ne, 0)};
  const auto counts = parallel_accumulate(tasks, threads, zero, [&](std::size_t task, detail::ErrorCounts& acc) {
    const std::size_t k = task / c.trials, t = task % c.trials;
    RngStream rng{c.seed, stream_key(k, t)};
    const Trial trial = make_trial(c.model, c.n, c.q_grid[k], c.visibility, rng);
    ShapeContext ctx{trial.view, params};
    for (std::size_t e = 0; e < ne; ++e) {
      const auto est = run_estimator(c.estimators[e], ctx, trial.observed, rng);
      if (est.value != trial.bits.root_bit()) ++acc.errors[k * ne + e];
    }
  });
  std::vector<RiskEstimate> out;
  for (std::size_t k = 0; k < c.q_grid.size(); ++k) {
    for (std::size_t e = 0; e < ne; ++e) out.push_back(make_risk(c, c.estimators[e], c.q_grid[k], counts.errors[k * ne + e]));
  }
  return out;
}

// ---- exhaustive risk ----

inline constexpr std::size_t kExhaustiveCap = 7;

// mass[f] = sum over the n! trees and the flip patterns with f flips of the
// error probability, averaged over the root bit and the estimator's coins.
// The risk at q is sum_f mass[f] q^f (1-q)^(n-f) / n!.
struct ErrorProfile {
  std::size_t n = 0;
  EstimatorKind estimator = EstimatorKind::majority;
  Visibility visibility = Visibility::all_vertices;
  std::vector<BigRational> mass;
};

inline ErrorProfile exhaustive_error_profile(std::size_t n, EstimatorKind kind, Visibility visibility,
                                             const StructParams& params = {}) {
  if (n > kExhaustiveCap) throw std::invalid_argument("exhaustive_risk: n must be <= 7");
  if (kind == EstimatorKind::bayes && visibility == Visibility::leaves_only) {
    throw std::invalid_argument("exhaustive_risk: the bayes estimator needs all vertex bits");
  }
  // per flip count: denominator -> summed numerators
  std::vector<std::map<std::int64_t, std::int64_t>> sums(n + 1);
  std::vector<Bit> bits(n + 1);
  for_each_parent_sequence(n, [&](const std::vector<Vertex>& parent) {
    const Tree tree{parent};
    const UnrootedTree view = UnrootedTree::from_tree(tree);
    ShapeContext ctx{view, params};
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      bits[0] = 1;
      for (std::size_t i = 1; i <= n; ++i) {
        const bool flip = (mask >> (i - 1)) & 1u;
        const Bit up = bits[static_cast<std::size_t>(parent[i])];
        bits[i] = flip ? static_cast<Bit>(-up) : up;
      }
      BitAssignment ba{bits};
      if (visibility == Visibility::leaves_only) ba = ba.leaves_only(tree);
      const ObservedBits obs = ba.observe();
      const auto plus = estimator_prob_plus(kind, ctx, obs);             // root bit +1: error if -1
      const auto minus = estimator_prob_plus(kind, ctx, obs.negated());  // root bit -1: error if +1
      auto& s = sums[static_cast<std::size_t>(__builtin_popcount(mask))];
      s[plus.den] += plus.den - plus.num;
      s[minus.den] += minus.num;
    }
  });
  ErrorProfile p{n, kind, visibility, std::vector<BigRational>(n + 1)};
  for (std::size_t f = 0; f <= n; ++f) {
    BigRational total = 0;
    for (const auto& [den, num] : sums[f]) total += BigRational{num, den};
    p.mass[f] = total / 2;
  }
  return p;
}

inline BigRational exhaustive_risk(const ErrorProfile& p, const BigRational& q) {
  BigRational risk = 0;
  const BigRational one_minus = 1 - q;
  for (std::size_t f = 0; f <= p.n; ++f) {
    BigRational term = p.mass[f];
    for (std::size_t i = 0; i < f; ++i) term *= q;
    for (std::size_t i = f; i < p.n; ++i) term *= one_minus;
    risk += term;
  }
  BigInt nfact = 1;
  for (std::size_t i = 2; i <= p.n; ++i) nfact *= i;
  return risk / nfact;
}

// q taken at its exact binary value.
inline double exhaustive_risk(const ErrorProfile& p, double q) {
  int exp = 0;
  const double mant = std::frexp(q, &exp);
  const auto scaled = static_cast<std::int64_t>(std::ldexp(mant, 53));
  BigRational qr{scaled};
  if (exp - 53 >= 0) qr *= BigRational{BigInt{1} << (exp - 53)};
  else qr /= BigRational{BigInt{1} << (53 - exp)};
  return exhaustive_risk(p, qr).convert_to<double>();
}

inline double exhaustive_risk(std::size_t n, double q, EstimatorKind kind, Visibility visibility) {
  return exhaustive_risk(exhaustive_error_profile(n, kind, visibility), q);
}

// ---- output ----

inline const char* kCsvHeader = "estimator,model,beta,n,q,visibility,trials,errors,error_rate,ci_halfwidth,seed";

namespace detail {
inline std::string fmt_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

template <typename T>
T parse_field(const std::string& s, const std::string& what) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw std::runtime_error("csv: bad " + what + " '" + s + "'");
  return v;
}
}  // namespace detail

inline void write_csv(std::ostream& out, const std::vector<RiskEstimate>& rows) {
  out << kCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.estimator << ',' << r.model << ',' << detail::fmt_double(r.beta) << ',' << r.n << ','
        << detail::fmt_double(r.q) << ',' << r.visibility << ',' << r.trials << ',' << r.errors << ','
        << detail::fmt_double(r.error_rate) << ',' << detail::fmt_double(r.ci_halfwidth) << ',' << r.seed << '\n';
  }
}

inline std::vector<RiskEstimate> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw std::runtime_error("csv: missing or unexpected header");
  std::vector<RiskEstimate> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 11) throw std::runtime_error("csv: expected 11 fields in '" + line + "'");
    RiskEstimate r;
    r.estimator = f[0];
    r.model = f[1];
    r.beta = detail::parse_field<double>(f[2], "beta");
    r.n = detail::parse_field<std::size_t>(f[3], "n");
    r.q = detail::parse_field<double>(f[4], "q");
    r.visibility = f[5];
    r.trials = detail::parse_field<std::size_t>(f[6], "trials");
    r.errors = detail::parse_field<std::size_t>(f[7], "errors");
    r.error_rate = detail::parse_field<double>(f[8], "error_rate");
    r.ci_halfwidth = detail::parse_field<double>(f[9], "ci_halfwidth");
    r.seed = detail::parse_field<std::uint64_t>(f[10], "seed");
    rows.push_back(std::move(r));
  }
  return rows;
}

inline nlohmann::json to_json(const std::vector<RiskEstimate>& rows) {
  auto arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"estimator", r.estimator}, {"model", r.model}, {"beta", r.beta}, {"n", r.n}, {"q", r.q},
                   {"visibility", r.visibility}, {"trials", r.trials}, {"errors", r.errors},
                   {"error_rate", r.error_rate}, {"ci_halfwidth", r.ci_halfwidth}, {"seed", r.seed}});
  }
  return arr;
}

inline std::vector<RiskEstimate> from_json(const nlohmann::json& arr) {
  std::vector<RiskEstimate> rows;
  for (const auto& j : arr) {
    rows.push_back({j.at("estimator"), j.at("model"), j.at("beta"), j.at("n"), j.at("q"), j.at("visibility"),
                    j.at("trials"), j.at("errors"), j.at("error_rate"), j.at("ci_halfwidth"), j.at("seed")});
  }
  return rows;
}

enum class OutputFormat { csv, json };

inline OutputFormat parse_format(const std::string& s) {
  if (s == "csv") return OutputFormat::csv;
  if (s == "json") return OutputFormat::json;
  throw std::invalid_argument("format must be csv or json, got '" + s + "'");
}

inline void emit_results(const std::vector<RiskEstimate>& rows, OutputFormat format, std::ostream& out) {
  if (format == OutputFormat::csv) write_csv(out, rows);
  else out << to_json(rows).dump(2) << '\n';
}

inline void emit_results(const std::vector<RiskEstimate>& rows, OutputFormat format, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  emit_results(rows, format, out);
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace rrtb
