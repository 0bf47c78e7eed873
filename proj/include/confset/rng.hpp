#pragma once

#include <cstdint>
#include <random>

namespace confset {

/// SplitMix64 finalizer; used to derive independent seeds from a master seed.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of replication `index` under `master`. Streams depend only on the
/// pair, so execution order never changes what a replication sees.
constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) noexcept
{
  return mix64(mix64(master) ^ mix64(index + 0x632BE59BD9B4E019ULL));
}

/// Explicit generator state. There is no global RNG anywhere in the library.
class Rng
{
public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// +1 or -1 with equal probability.
  int sign() { return (engine_() >> 63) ? 1 : -1; }

  /// Child generator for a sub-task; does not advance this one.
  Rng split(std::uint64_t tag) const
  {
    auto copy = engine_;
    return Rng(stream_seed(copy(), tag));
  }

private:
  std::mt19937_64 engine_;
};

} // namespace confset
