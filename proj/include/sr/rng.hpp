#ifndef SR_RNG_HPP
#define SR_RNG_HPP

#include <cstdint>

namespace sr {

/// Counter-based RNG with explicit, value-semantic state.
/// Identical seed + identical call sequence yields identical outputs,
/// independent of platform or thread scheduling.
struct RngState {
    std::uint64_t seed = 0;
    std::uint64_t counter = 0;

    explicit RngState(std::uint64_t s = 0) : seed(s) {}

    /// Independent stream derived from (seed, stream index), e.g. one per slice.
    RngState derive(std::uint64_t stream) const;

    std::uint64_t next_u64();
    /// Uniform in [0, 1).
    double uniform();
    /// Standard normal via Box-Muller; consumes exactly two counter steps.
    double normal();
    /// Uniform integer in [0, n).
    std::uint64_t uniform_below(std::uint64_t n);
};

} // namespace sr

#endif
