// SPDX-License-Identifier: Apache-2.0
//
// Deterministic random number plumbing.
//
// All randomness in the library flows through SeedKey / RngStream. A SeedKey
// is a 64-bit value that can be split into independent child keys with
// derive(); every experiment cell derives its own key from the master seed so
// results are reproducible and independent of scheduling. Draws come from
// std::mt19937_64 whose output sequence is fixed by the standard, and doubles
// are built directly from the high 53 bits, so sequences are identical across
// standard libraries on the same platform.
#ifndef STARBEAM_RNG_HPP
#define STARBEAM_RNG_HPP

#include <cstdint>
#include <random>

namespace starbeam {

namespace detail {
// SplitMix64 finalizer, used only to mix keys, never to produce draws.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}
}  // namespace detail

struct SeedKey {
    std::uint64_t value = 0;

    // Child key for a labeled substream. derive(a) != derive(b) for a != b in
    // practice, and children are decorrelated from the parent.
    SeedKey derive(std::uint64_t label) const {
        return SeedKey{detail::splitmix64(value ^ detail::splitmix64(label))};
    }
};

// Substream labels used across the library. Kept in one place so the seed
// tree is documented and collisions are avoided by construction.
namespace seed_label {
inline constexpr std::uint64_t placement = 0x01;
inline constexpr std::uint64_t clusters = 0x02;
inline constexpr std::uint64_t trc_init = 0x03;
inline constexpr std::uint64_t trial_base = 0x100;  // + trial index
}  // namespace seed_label

class RngStream {
  public:
    explicit RngStream(SeedKey key) : gen_(detail::splitmix64(key.value)) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  private:
    std::mt19937_64 gen_;
};

}  // namespace starbeam

#endif
