#ifndef PATHFINDER_RANDOM_HPP
#define PATHFINDER_RANDOM_HPP

#include <cstdint>
#include <random>

namespace pathfinder {

using rng_type = std::mt19937_64;

/// Purpose tag for a derived random stream, so that e.g. the ELBO draws and
/// the output draws of the same candidate never share a stream.
enum class stream_kind : std::uint64_t {
  init = 1,
  elbo = 2,
  output = 3,
  resample = 4,
};

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Counter-based seed derivation: the seed of a substream depends only on
/// the master seed and the (path, candidate, kind) coordinates, never on the
/// order in which work is scheduled.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t path,
                                    std::uint64_t candidate,
                                    stream_kind kind) noexcept {
  std::uint64_t h = detail::splitmix64(master);
  h = detail::splitmix64(h ^ path);
  h = detail::splitmix64(h ^ (candidate * 0x2545f4914f6cdd1dULL));
  h = detail::splitmix64(h ^ static_cast<std::uint64_t>(kind));
  return h;
}

inline rng_type make_rng(std::uint64_t master, std::uint64_t path,
                         std::uint64_t candidate, stream_kind kind) {
  const std::uint64_t s = derive_seed(master, path, candidate, kind);
  std::seed_seq seq{static_cast<std::uint32_t>(s),
                    static_cast<std::uint32_t>(s >> 32)};
  return rng_type(seq);
}

}  // namespace pathfinder

#endif  // PATHFINDER_RANDOM_HPP
