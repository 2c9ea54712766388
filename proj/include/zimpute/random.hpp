#pragma once

#include <cstdint>
#include <random>

namespace zimpute {

/// Seeded random stream. The pair (seed, stream_id) fully determines the draw
/// sequence; copies continue from the same state independently.
class RandomStream {
 public:
  using engine_type = std::mt19937_64;

  explicit RandomStream(std::uint64_t seed = 0, std::uint64_t stream_id = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  /// Fresh stream for a sub-process (replicate, method, bootstrap draw).
  /// Depends only on (seed, stream_id, child_id), never on consumed state.
  RandomStream child(std::uint64_t child_id) const;

  engine_type& engine() noexcept { return engine_; }

  double uniform();                       // U[0,1)
  bool bernoulli(double p);               // P(true) = p
  double normal(double mean, double sd);
  double gamma(double shape, double scale);
  double lognormal(double log_mean, double log_sd);
  std::size_t uniform_index(std::size_t n);  // uniform on {0,...,n-1}

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  engine_type engine_;
};

}  // namespace zimpute
