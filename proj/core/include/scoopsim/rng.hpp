#pragma once

#include <cstdint>
#include <string_view>

namespace scoopsim {

// Deterministic random stream. The generator is xoshiro256** seeded through
// splitmix64; draws are produced from raw 64-bit outputs so results do not
// depend on the standard library's distribution implementations.
class RandomStream {
 public:
  RandomStream() : RandomStream(0, "default") {}
  RandomStream(std::uint64_t seed, std::string_view name);

  std::uint64_t next_u64();
  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double gaussian(double mean = 0.0, double stddev = 1.0);
  bool bernoulli(double p) { return uniform() < p; }

  bool operator==(const RandomStream&) const = default;

 private:
  std::uint64_t s_[4]{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// One stream per concern. Adding a consumer never perturbs another stream.
struct RngStreams {
  RandomStream placement;
  RandomStream properties;
  RandomStream perception;
  RandomStream augmentation;

  RngStreams() = default;
  explicit RngStreams(std::uint64_t seed)
      : placement(seed, "placement"),
        properties(seed, "properties"),
        perception(seed, "perception"),
        augmentation(seed, "augmentation") {}

  bool operator==(const RngStreams&) const = default;
};

std::uint64_t hash_name(std::string_view name);

}  // namespace scoopsim
