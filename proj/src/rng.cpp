#include "alive/rng.hpp"

#include <cmath>

#include "alive/error.hpp"

namespace alive {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 make_engine(SeedSpec seed) {
  // Both halves of the seed go through the mixer before seed_seq so that
  // neighbouring ids do not produce correlated initial states.
  const std::uint64_t a = splitmix64(seed.master_seed);
  const std::uint64_t b = splitmix64(seed.stream_id ^ 0xd1b54a32d192ed03ULL);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

SeedSpec SeedSpec::child(std::uint64_t salt) const {
  return {splitmix64(master_seed ^ splitmix64(salt + 0x632be59bd9b4e019ULL)), stream_id};
}

Stream::Stream(SeedSpec seed) : engine_(make_engine(seed)) {}

Stream derive_stream(SeedSpec seed) { return Stream(seed); }

double Stream::uniform() {
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double Stream::gaussian(double mean, double variance) {
  if (variance < 0.0 || !std::isfinite(variance)) {
    throw InvalidArgument("gaussian variance must be finite and non-negative");
  }
  if (variance == 0.0) return mean;
  return normal_(engine_, std::normal_distribution<double>::param_type(mean, std::sqrt(variance)));
}

double Stream::exponential() { return -std::log(uniform()); }

std::size_t Stream::uniform_int(std::size_t n) {
  if (n == 0) throw InvalidArgument("uniform_int needs n >= 1");
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

void check_categorical_weights(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("invalid categorical weights");
    total += w;
  }
  if (!(total > 0.0)) throw InvalidArgument("invalid categorical weights");
}

std::size_t Stream::categorical(std::span<const double> weights) {
  check_categorical_weights(weights);
  double total = 0.0;
  for (double w : weights) total += w;
  const double target = uniform() * total;
  double running = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    running += weights[i];
    last_positive = i;
    if (target < running) return i;
  }
  return last_positive;
}

}  // namespace alive
