#pragma once

// Reproducible random streams.
//
// Algorithm (pinned; the test suite's statistical tolerances assume it):
//   * substream seed = splitmix64(seed XOR fnv1a64(label)), where fnv1a64 is
//     the 64-bit FNV-1a hash of the label bytes;
//   * each substream is a std::mt19937_64 seeded with that value (the engine
//     and its single-value seeding are fully specified by the standard);
//   * uniforms use the top 53 bits: u = ((x >> 11) + 0.5) * 2^-53, in (0, 1);
//   * normals use the Box-Muller transform, emitting cos then sin branches.
//
// Labels used by the simulator: "factor" and "unique:<i>" (0-based i).
// Replication r of an experiment uses seed splitmix64(base + r * golden).

#include <cstdint>
#include <optional>
#include <random>
#include <string_view>

namespace factorsde {

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::uint64_t substream_seed(std::uint64_t seed, std::string_view label) noexcept;
std::uint64_t replication_seed(std::uint64_t base, std::uint64_t replication) noexcept;

class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::string_view label);

  double uniform() noexcept;
  double normal() noexcept;

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

}  // namespace factorsde
