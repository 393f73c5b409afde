#ifndef ALIVE_RNG_HPP
#define ALIVE_RNG_HPP

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace alive {

/// Identifies one reproducible random stream: a run-wide master seed plus the
/// index of the replicate or chain that owns the stream.
struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;

  /// A new master seed for an independent family of streams (one per grid
  /// cell, algorithm, dataset...). The stream id is carried over unchanged.
  SeedSpec child(std::uint64_t salt) const;
  SeedSpec with_stream(std::uint64_t id) const { return {master_seed, id}; }

  friend bool operator==(const SeedSpec&, const SeedSpec&) = default;
};

/// Stateful uniform-variate generator. Streams are derived directly from the
/// SeedSpec (no sequential draws needed), so replicate k can be created on any
/// thread without touching replicates 0..k-1.
///
/// A stream must not be shared between threads.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(SeedSpec seed);

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform on the open interval (0, 1).
  double uniform();
  double gaussian(double mean, double variance);
  double exponential();
  /// Uniform on {0, ..., n-1}.
  std::size_t uniform_int(std::size_t n);
  /// Index drawn with probability proportional to weights[i].
  std::size_t categorical(std::span<const double> weights);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

Stream derive_stream(SeedSpec seed);

/// Throws InvalidArgument("invalid categorical weights") unless every weight is
/// finite and non-negative and at least one is positive.
void check_categorical_weights(std::span<const double> weights);

}  // namespace alive

#endif  // ALIVE_RNG_HPP
