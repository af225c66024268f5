#include "strop/rng.hpp"

#include <cmath>

#include "strop/errors.hpp"

namespace strop {
namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull; // 2^64 / golden ratio

// SplitMix64 finalizer (Steele, Lea, Flood 2014).
std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

} // namespace

CounterRng::CounterRng(std::uint64_t seed, RngStream stream)
    : key_(mix64(seed + kGamma * mix64(static_cast<std::uint64_t>(stream) + kGamma))) {}

std::uint64_t CounterRng::next_u64() {
    ++counter_;
    return mix64(key_ + counter_ * kGamma);
}

double CounterRng::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::next_gaussian() {
    // u1 in (0, 1] so the log is finite; u2 in [0, 1).
    double u1 = 1.0 - next_double();
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::size_t CounterRng::next_index(std::size_t n) {
    if (n == 0) {
        throw IndexOutOfRange("next_index requires n >= 1");
    }
    // Multiply-shift map of a 64-bit draw onto [0, n); bias is O(n / 2^64).
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

} // namespace strop
