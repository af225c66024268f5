#pragma once

#include <cstdint>
#include <cstddef>

namespace strop {

// Purpose-keyed random streams. Every consumer of randomness names its stream,
// so changing how one stage draws numbers never perturbs another stage.
enum class RngStream : std::uint64_t {
    data = 1,     // synthetic data generation
    init = 2,     // iterate initialization
    sampling = 3, // per-iteration sample index draws
    probe = 4,    // diagnostic probe points
};

// Counter-based generator (SplitMix64): the i-th output is a fixed avalanche
// mix of key + i*gamma, where the key is derived from (seed, stream). State is
// just (key, counter), so identical (seed, stream) always replays the same
// sequence regardless of what other streams consumed.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, RngStream stream);

    std::uint64_t next_u64();

    // Uniform in [0, 1) with 53 random bits.
    double next_double();

    // Standard normal via Box-Muller on two fresh uniforms.
    double next_gaussian();

    // Uniform in [0, n). Requires n >= 1.
    std::size_t next_index(std::size_t n);

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace strop
