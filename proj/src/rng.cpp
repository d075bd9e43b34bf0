#include "sr/rng.hpp"

#include <cmath>

namespace sr {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

} // namespace

RngState RngState::derive(std::uint64_t stream) const {
    RngState out(mix(seed ^ mix(stream + kGolden)));
    return out;
}

std::uint64_t RngState::next_u64() {
    return mix(seed + kGolden * ++counter);
}

double RngState::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngState::normal() {
    // (0, 1] for the log argument.
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::uint64_t RngState::uniform_below(std::uint64_t n) {
    // Modulo bias is < 2^-53 for any n used here.
    return next_u64() % n;
}

} // namespace sr
