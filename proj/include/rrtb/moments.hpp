#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "rrtb/rng.hpp"

namespace rrtb {

struct MomentBound {
  std::string source;    // bound identifier, e.g. "l10"
  std::string quantity;  // what is bounded, e.g. "E[N_i]"
  std::optional<double> lower;
  std::optional<double> upper;
  std::optional<double> exact;

  // lower <= exact <= upper for the parts that are present
  bool holds() const {
    if (exact && lower && *lower > *exact) return false;
    if (exact && upper && *exact > *upper) return false;
    if (lower && upper && *lower > *upper) return false;
    return true;
  }
};

struct GammaRatio {
  double product;     // prod_{t=i}^{n-1} (1 + alpha/(t+1))
  double gamma_form;  // Gamma(alpha+n+1) Gamma(i+1) / (Gamma(n+1) Gamma(alpha+i+1))
};

inline GammaRatio gamma_ratio_product(double alpha, std::size_t i, std::size_t n) {
  if (i > n) throw std::invalid_argument("gamma_ratio_product: need i <= n");
  if (!(alpha >= 0.0)) throw std::invalid_argument("gamma_ratio_product: need alpha >= 0");
  long double p = 1.0L;
  for (std::size_t t = i; t < n; ++t) p *= 1.0L + static_cast<long double>(alpha) / static_cast<long double>(t + 1);
  const double ni = static_cast<double>(n), ii = static_cast<double>(i);
  double g = 1.0;
  if (alpha > 0.0) {
    // delta form keeps alpha exact instead of rounding alpha + n + 1
    g = boost::math::tgamma_delta_ratio(ii + 1.0, alpha) / boost::math::tgamma_delta_ratio(ni + 1.0, alpha);
  }
  return {static_cast<double>(p), g};
}

inline void check_half(double q, const char* what) {
  if (!(q >= 0.0 && q <= 0.5)) throw std::invalid_argument(std::string(what) + ": q must lie in [0, 1/2]");
}

// E[N_i] for the uniform model.
inline double expected_Ni_exact(double q, std::size_t i, std::size_t n) {
  check_half(q, "expected_Ni_exact");
  return gamma_ratio_product(1.0 - 2.0 * q, i, n).product;
}

// Exact first and second moments of the homogeneous subtree rooted at i
// (size N, leaf count Nbar) after the tree has grown to n edges.
struct ExactMoments {
  double mean_N = 0.0;
  double second_N = 0.0;
  double mean_leaf = 0.0;
  double second_leaf = 0.0;
  double mean_weight = 0.0;  // preferential attachment only

  double var_N() const { return second_N - mean_N * mean_N; }
};

namespace detail {

// Moments of (w, Y, Ybar) carried through the growth steps. At each step the
// newcomer lands in the tracked subtree through one of a few events whose
// probabilities are linear in the state, so degree-two moments stay closed.
class MomentEngine {
 public:
  static constexpr int kVars = 3;  // 0: weight, 1: size, 2: leaves
  struct Event {
    std::array<long double, kVars> coef;   // probability = coef . state / denom
    std::array<long double, kVars> delta;  // state change
  };

  explicit MomentEngine(std::array<long double, kVars> start) {
    for (int a = 0; a < kVars; ++a) {
      m1_[a] = start[a];
      for (int b = 0; b < kVars; ++b) m2_[a][b] = start[a] * start[b];
    }
  }

  void step(const std::vector<Event>& events, long double denom) {
    auto m1 = m1_;
    auto m2 = m2_;
    for (const auto& e : events) {
      for (int x = 0; x < kVars; ++x) {
        const long double c = e.coef[x] / denom;
        if (c == 0.0L) continue;
        for (int a = 0; a < kVars; ++a) {
          m1[a] += c * m1_[x] * e.delta[a];
          for (int b = 0; b < kVars; ++b) {
            m2[a][b] += c * (m2_[x][a] * e.delta[b] + m2_[x][b] * e.delta[a] + m1_[x] * e.delta[a] * e.delta[b]);
          }
        }
      }
    }
    m1_ = m1;
    m2_ = m2;
  }

  long double mean(int a) const { return m1_[a]; }
  long double second(int a) const { return m2_[a][a]; }

 private:
  std::array<long double, kVars> m1_{};
  std::array<std::array<long double, kVars>, kVars> m2_{};
};

}  // namespace detail

// Uniform model. A newcomer at step t picks one of t vertices; it joins the
// subtree when it picks a member and is unmarked (probability 1 - 2q). Picking
// a leaf member removes that leaf; an unmarked newcomer is a new leaf.
inline ExactMoments exact_moments_urrt(double q, std::size_t i, std::size_t n) {
  check_half(q, "exact_moments_urrt");
  if (i > n) throw std::invalid_argument("exact_moments_urrt: need i <= n");
  const long double a = 1.0L - 2.0L * q, m = 2.0L * q;
  const std::vector<detail::MomentEngine::Event> events{
      {{0, 0, a}, {0, 1, 0}},    // leaf member, unmarked
      {{0, 0, m}, {0, 0, -1}},   // leaf member, marked
      {{0, a, -a}, {0, 1, 1}},   // internal member, unmarked
  };
  detail::MomentEngine eng{{0, 1, 1}};
  for (std::size_t t = i + 1; t <= n; ++t) eng.step(events, static_cast<long double>(t));
  return {static_cast<double>(eng.mean(1)), static_cast<double>(eng.second(1)), static_cast<double>(eng.mean(2)),
          static_cast<double>(eng.second(2)), 0.0};
}

// Preferential attachment. The subtree's weight w is beta * size plus the
// outdegrees of its members (marked children included); a newcomer at step t
// picks it with probability w / ((beta + 1) t - 1). A leaf member carries
// weight beta.
inline ExactMoments exact_moments_pa(double q, std::size_t i, std::size_t n, double beta) {
  check_half(q, "exact_moments_pa");
  if (i > n) throw std::invalid_argument("exact_moments_pa: need i <= n");
  if (!(beta > 0.0)) throw std::invalid_argument("exact_moments_pa: beta must be > 0");
  const long double a = 1.0L - 2.0L * q, m = 2.0L * q, b = beta;
  const std::vector<detail::MomentEngine::Event> events{
      {{0, 0, b * a}, {1 + b, 1, 0}},   // leaf member, unmarked
      {{0, 0, b * m}, {1, 0, -1}},      // leaf member, marked
      {{a, 0, -b * a}, {1 + b, 1, 1}},  // internal member, unmarked
      {{m, 0, -b * m}, {1, 0, 0}},      // internal member, marked
  };
  detail::MomentEngine eng{{b, 1, 1}};
  for (std::size_t t = i + 1; t <= n; ++t) eng.step(events, (b + 1) * static_cast<long double>(t) - 1);
  return {static_cast<double>(eng.mean(1)), static_cast<double>(eng.second(1)), static_cast<double>(eng.mean(2)),
          static_cast<double>(eng.second(2)), static_cast<double>(eng.mean(0))};
}

// ---- zeta sums ----

inline constexpr std::size_t kZetaTerms = 10'000;

// sum_{k>=1} k^-s for s > 1: direct sum to kZetaTerms plus an Euler-Maclaurin
// tail through the third-derivative term (remainder below 1e-15).
inline double zeta(double s) {
  if (!(s > 1.0)) throw std::invalid_argument("zeta: need s > 1");
  long double sum = 0.0L;
  for (std::size_t k = kZetaTerms; k >= 1; --k) sum += std::pow(static_cast<long double>(k), -static_cast<long double>(s));
  const long double N = kZetaTerms, S = s;
  const long double f = std::pow(N, -S);
  const long double f1 = -S * f / N;
  const long double f3 = -S * (S + 1) * (S + 2) * f / (N * N * N);
  const long double tail = std::pow(N, 1 - S) / (S - 1) - f / 2 - f1 / 12 + f3 / 720;
  return static_cast<double>(sum + tail);
}

// sum_{k>=1} log(k) k^-s for s > 1, same scheme.
inline double zeta_tilde(double s) {
  if (!(s > 1.0)) throw std::invalid_argument("zeta_tilde: need s > 1");
  long double sum = 0.0L;
  for (std::size_t k = kZetaTerms; k >= 2; --k) {
    const long double x = static_cast<long double>(k);
    sum += std::log(x) * std::pow(x, -static_cast<long double>(s));
  }
  const long double N = kZetaTerms, S = s, L = std::log(N);
  const long double f = L * std::pow(N, -S);
  const long double f1 = std::pow(N, -S - 1) * (1 - S * L);
  const long double f3 = std::pow(N, -S - 3) * (S * (S + 1) - (S + 2) * (S * (S + 1) * L - 2 * S - 1));
  const long double integral = std::pow(N, 1 - S) * (L / (S - 1) + 1 / ((S - 1) * (S - 1)));
  return static_cast<double>(sum + integral - f / 2 - f1 / 12 + f3 / 720);
}

// ---- bound suite ----

enum class LemmaId { l8, l9, l10, l12, l14, leaf, pa1, pa2 };

inline const char* to_string(LemmaId id) {
  switch (id) {
    case LemmaId::l8: return "l8";
    case LemmaId::l9: return "l9";
    case LemmaId::l10: return "l10";
    case LemmaId::l12: return "l12";
    case LemmaId::l14: return "l14";
    case LemmaId::leaf: return "leaf";
    case LemmaId::pa1: return "pa1";
    case LemmaId::pa2: return "pa2";
  }
  return "?";
}

inline LemmaId parse_lemma(std::string_view s) {
  for (auto id : {LemmaId::l8, LemmaId::l9, LemmaId::l10, LemmaId::l12, LemmaId::l14, LemmaId::leaf, LemmaId::pa1,
                  LemmaId::pa2}) {
    if (s == to_string(id)) return id;
  }
  throw std::invalid_argument("unknown lemma id '" + std::string(s) + "'");
}

struct BoundQuery {
  double q = 0.1;
  std::size_t i = 0;
  std::size_t n = 100;
  double beta = 1.0;
  // exponent for l8 and l9; defaults to 1 - 2q
  std::optional<double> alpha;
};

namespace detail {
inline double pa_ratio(const BoundQuery& b) {
  const double r1 = 1.0 / (b.beta + 1.0);
  return (static_cast<double>(b.n) + 1.0 - r1) / (static_cast<double>(b.i) + 1.0 - r1);
}
inline double second_moment_upper(double q, double ratio) {
  const double e = std::exp(1.0);
  return std::pow(ratio, 2.0 - 4.0 * q) * std::exp(2.0 * (1.0 - 2.0 * q)) * (4.0 + e) + e * (1.0 - 2.0 * q);
}
inline double pa_second_upper(const BoundQuery& b, double r) {
  const double e = std::exp(1.0), be = b.beta;
  return 4.0 / ((1.0 + be) * (1.0 + be)) * (be * e + be * e * e * (1.0 + be) + r * e * e * (1.0 + be) * (1.0 + be)) *
         std::pow(pa_ratio(b), 2.0 * r);
}
}  // namespace detail

// Evaluates the bounds of one lemma together with the exact value it
// brackets. Throws when the query is outside the lemma's domain.
inline std::vector<MomentBound> bound_suite(LemmaId id, const BoundQuery& b) {
  if (b.i > b.n) throw std::invalid_argument("bound_suite: need i <= n");
  const double e = std::exp(1.0);
  const double n1 = static_cast<double>(b.n) + 1.0;
  const double ratio = n1 / (static_cast<double>(b.i) + 1.0);
  const std::string src = to_string(id);
  std::vector<MomentBound> out;

  auto alpha = [&] {
    const double a = b.alpha.value_or(1.0 - 2.0 * b.q);
    if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument(src + ": alpha must lie in [0, 1]");
    return a;
  };

  switch (id) {
    case LemmaId::l8: {
      const auto g = gamma_ratio_product(alpha(), b.i, b.n);
      out.push_back({src, "product", std::nullopt, std::nullopt, g.product});
      out.push_back({src, "gamma form", std::nullopt, std::nullopt, g.gamma_form});
      break;
    }
    case LemmaId::l9: {
      if (b.n < 1) throw std::invalid_argument("l9: need n >= 1");
      const double a = alpha();
      const double exact = a == 0.0 ? 1.0 : boost::math::tgamma_ratio(a + n1, n1);
      out.push_back({src, "Gamma(a+n+1)/Gamma(n+1)", std::pow(n1 / e, a), std::pow(n1, a), exact});
      break;
    }
    case LemmaId::l10: {
      check_half(b.q, "l10");
      const double x = std::pow(ratio, 1.0 - 2.0 * b.q);
      out.push_back({src, "E[N_i]", x / e, e * x, expected_Ni_exact(b.q, b.i, b.n)});
      break;
    }
    case LemmaId::l12: {
      check_half(b.q, "l12");
      out.push_back({src, "E[N_i^2]", std::nullopt, detail::second_moment_upper(b.q, ratio),
                     exact_moments_urrt(b.q, b.i, b.n).second_N});
      break;
    }
    case LemmaId::l14: {
      if (!(b.q >= 0.0 && b.q < 0.25)) throw std::invalid_argument("l14: needs q < 1/4");
      const double s = 2.0 - 4.0 * b.q;
      const double nn = static_cast<double>(b.n);
      const double nlogn = b.n > 1 ? nn * std::log(nn) : 0.0;
      const double upper = 2.0 * b.q * e * e * (4.0 + e) * std::pow(n1, s) * zeta(s) + 2.0 * nn * b.q * e * e +
                           12.0 * e * e * e * b.q * b.q * std::pow(n1, s) * zeta_tilde(s) +
                           4.0 * e * e * b.q * b.q * nlogn;
      out.push_back({src, "Var(N_0)", std::nullopt, upper, exact_moments_urrt(b.q, 0, b.n).var_N()});
      break;
    }
    case LemmaId::leaf: {
      check_half(b.q, "leaf");
      const auto m = exact_moments_urrt(b.q, b.i, b.n);
      const double x = std::pow(ratio, 1.0 - 2.0 * b.q);
      const double lower = x / (32.0 * e) - static_cast<double>(b.i) / (8.0 * static_cast<double>(std::max<std::size_t>(b.n, 1)) * e);
      out.push_back({src, "E[Nbar_i]", lower, e * x, m.mean_leaf});
      out.push_back({src, "E[Nbar_i^2]", std::nullopt, detail::second_moment_upper(b.q, ratio), m.second_leaf});
      break;
    }
    case LemmaId::pa1:
    case LemmaId::pa2: {
      if (!(b.q >= 0.0 && b.q < 0.125)) throw std::invalid_argument(src + ": needs q < 1/8");
      if (!(b.beta > 0.0)) throw std::invalid_argument(src + ": beta must be > 0");
      const double r = 1.0 - 2.0 * b.beta * b.q / (b.beta + 1.0);
      const double x = std::pow(detail::pa_ratio(b), r);
      const double be = b.beta;
      const auto m = exact_moments_pa(b.q, b.i, b.n, be);
      const double upper = be * e / (1.0 + be) * x + 1.0 / (be + 1.0);
      if (id == LemmaId::pa1) {
        const double lower = 3.0 * be / (8.0 * (be + 1.0) * e) * x - 3.0 * be / (4.0 * e * (be + 1.0));
        out.push_back({src, "E[N_i]", lower, upper, m.mean_N});
        out.push_back({src, "E[N_i^2]", std::nullopt, detail::pa_second_upper(b, r), m.second_N});
      } else {
        const double lower = be / (8.0 * e * (be + 1.0)) * x - 3.0 * be / (8.0 * e * (be + 1.0));
        out.push_back({src, "E[Nbar_i]", lower, upper, m.mean_leaf});
        out.push_back({src, "E[Nbar_i^2]", std::nullopt, detail::pa_second_upper(b, r), m.second_leaf});
      }
      break;
    }
  }
  return out;
}

// ---- urns ----

enum class UrnKind { two_color, four_color_leaf, pa_weight };

// two_color:       {root-bit vertices, other-bit vertices}
// four_color_leaf: {root-bit leaves, other-bit leaves, root-bit internal, other-bit internal}
// pa_weight:       {root-bit vertices, other-bit vertices, their outdegree sums}
struct UrnState {
  UrnKind kind = UrnKind::two_color;
  double q = 0.0;
  double beta = 1.0;
  std::uint64_t steps = 0;
  std::vector<std::uint64_t> counts;

  // The state before any draw: the root alone.
  static UrnState initial(UrnKind kind, double q, double beta = 1.0) {
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("urn: q must lie in [0, 1]");
    if (kind == UrnKind::pa_weight && !(beta > 0.0)) throw std::invalid_argument("urn: beta must be > 0");
    UrnState s{kind, q, beta, 0, {}};
    s.counts = kind == UrnKind::two_color ? std::vector<std::uint64_t>{1, 0} : std::vector<std::uint64_t>{1, 0, 0, 0};
    return s;
  }

  // Vertices carrying the root bit (all colors of that bit).
  std::uint64_t same() const {
    switch (kind) {
      case UrnKind::two_color: return counts[0];
      case UrnKind::four_color_leaf: return counts[0] + counts[2];
      case UrnKind::pa_weight: return counts[0];
    }
    return 0;
  }
  std::uint64_t same_leaves() const { return kind == UrnKind::four_color_leaf ? counts[0] : 0; }

  // beta * vertices + outdegrees for the weight urn.
  double total_weight() const {
    return beta * static_cast<double>(counts[0] + counts[1]) + static_cast<double>(counts[2] + counts[3]);
  }
};

inline void urn_step(UrnState& s, RngStream& rng) {
  const bool keep = !rng.bernoulli(s.q);
  switch (s.kind) {
    case UrnKind::two_color: {
      const auto total = s.counts[0] + s.counts[1];
      const int color = rng.below(total) < s.counts[0] ? 0 : 1;
      ++s.counts[static_cast<std::size_t>(keep ? color : 1 - color)];
      break;
    }
    case UrnKind::four_color_leaf: {
      const auto total = s.counts[0] + s.counts[1] + s.counts[2] + s.counts[3];
      auto x = rng.below(total);
      std::size_t type = 0;
      while (x >= s.counts[type]) x -= s.counts[type++];
      const std::size_t bit = type % 2;
      if (type < 2) {  // a leaf gains a child
        --s.counts[type];
        ++s.counts[type + 2];
      }
      ++s.counts[keep ? bit : 1 - bit];
      break;
    }
    case UrnKind::pa_weight: {
      const double w_same = s.beta * static_cast<double>(s.counts[0]) + static_cast<double>(s.counts[2]);
      const std::size_t bit = rng.uniform() * s.total_weight() < w_same ? 0 : 1;
      ++s.counts[bit + 2];
      ++s.counts[keep ? bit : 1 - bit];
      break;
    }
  }
  ++s.steps;
}

inline UrnState urn_simulate(UrnState state, std::uint64_t steps, RngStream& rng) {
  for (std::uint64_t t = 0; t < steps; ++t) urn_step(state, rng);
  return state;
}

// Insertion depth of vertex i in a uniform recursive tree is a sum of
// independent Bernoulli(1/j), j = 1..i.
struct DepthMoments {
  double mean;
  double variance;
  double variance_bound;  // log i
};

inline DepthMoments depth_moments(std::size_t i) {
  if (i < 1) throw std::invalid_argument("depth_moments: need i >= 1");
  long double mean = 0.0L, var = 0.0L;
  for (std::size_t j = 1; j <= i; ++j) {
    const long double p = 1.0L / static_cast<long double>(j);
    mean += p;
    var += p * (1.0L - p);
  }
  return {static_cast<double>(mean), static_cast<double>(var), std::log(static_cast<double>(i))};
}

}  // namespace rrtb
