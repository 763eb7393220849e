#ifndef SECLOC_RANDOM_HPP
#define SECLOC_RANDOM_HPP

#include <cstdint>
#include <random>

namespace secloc {

using Rng = std::mt19937_64;

/// Purposes for which a trial derives its own independent stream.
enum class StreamTag : std::uint32_t {
  topology = 1,
  malicious = 2,
  measurements = 3,
  lmds = 4,
  generic = 5,
};

/// Derives a 64-bit seed from (master, index, tag). The result depends only
/// on its arguments, so trials can be scheduled in any order.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index,
                                 StreamTag tag = StreamTag::generic) {
  std::seed_seq seq{static_cast<std::uint32_t>(master),
                    static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(tag)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

inline Rng make_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32)};
  return Rng(seq);
}

}  // namespace secloc

#endif  // SECLOC_RANDOM_HPP
