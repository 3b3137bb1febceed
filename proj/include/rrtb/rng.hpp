#pragma once

#include <cstdint>
#include <random>

namespace rrtb {

// A reproducible random stream identified by (seed, stream_id). Two streams
// with the same pair produce identical draws; distinct stream ids are mixed
// through std::seed_seq so that per-trial streams are independent.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_{seed}, stream_id_{stream_id} {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_id),
                      static_cast<std::uint32_t>(stream_id >> 32), 0x9e3779b9u};
    engine_.seed(seq);
  }

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  // Uniform on {0, ..., bound - 1}; bound must be positive.
  std::uint64_t below(std::uint64_t bound) {
    return std::uniform_int_distribution<std::uint64_t>{0, bound - 1}(engine_);
  }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  // Fair +1 / -1.
  int sign() { return (engine_() >> 63) ? 1 : -1; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
};

// Packs two counters into one stream id; the harness keys per-trial streams
// by (grid index, trial index).
constexpr std::uint64_t stream_key(std::uint64_t major, std::uint64_t minor) {
  return (major << 40) ^ minor;
}

}  // namespace rrtb
