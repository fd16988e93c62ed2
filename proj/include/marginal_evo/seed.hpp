#pragma once

#include <cstdint>

namespace marginal_evo {

/// Independent random streams drawn for one (generation, individual, replica)
/// tuple. Each purpose gets its own seed so that e.g. the connectivity draw
/// and the dynamics noise never share a generator state.
enum class Stream : std::uint64_t {
  Evaluate = 0,
  Matrix = 1,
  Noise = 2,
  Select = 3,
  Mutate = 4,
  Init = 5,
  Snapshot = 6,
  Sweep = 7,
  Replica = 8,
  Phase = 9,
};

namespace detail {

// splitmix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t absorb(std::uint64_t state, std::uint64_t word, std::uint64_t lane) noexcept {
  return mix64(state ^ mix64(word + 0xD1B54A32D192ED03ULL * (lane + 1)));
}

}  // namespace detail

/// Deterministic seed for one (generation, individual, replica) tuple.
///
/// Every coordinate is absorbed through its own splitmix64 round, so equal
/// tuples map to equal seeds and distinct tuples collide only with
/// probability ~2^-64.
constexpr std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t generation,
                                    std::uint64_t individual, std::uint64_t replica,
                                    Stream stream = Stream::Evaluate) noexcept {
  std::uint64_t h = detail::mix64(master_seed);
  h = detail::absorb(h, generation, 0);
  h = detail::absorb(h, individual, 1);
  h = detail::absorb(h, replica, 2);
  h = detail::absorb(h, static_cast<std::uint64_t>(stream), 3);
  return h;
}

/// Sub-seed of an already derived seed for a given purpose.
constexpr std::uint64_t sub_seed(std::uint64_t seed, Stream stream) noexcept {
  return detail::absorb(detail::mix64(seed), static_cast<std::uint64_t>(stream), 4);
}

}  // namespace marginal_evo
