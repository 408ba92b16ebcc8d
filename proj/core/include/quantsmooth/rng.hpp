// Copyright (c) 2026 quantsmooth authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>

namespace quantsmooth {

// Counter-based generator: output n is mix64(seed + n * golden_gamma), the
// splitmix64 finalizer over an affine counter sequence. The u64/uniform
// streams are pure integer/exact-float arithmetic, so a given seed yields
// the same stream on every platform. All stochastic code in this repo takes
// one of these explicitly; there is no global RNG state.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller (cosine branch). Consumes two uniforms.
    double next_gaussian() {
        double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
        double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // +1 or -1 with equal probability.
    int next_sign() { return (next_u64() & 1u) ? 1 : -1; }

    // Integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

    // Independent child stream; mixing the tag through the finalizer keeps
    // sibling streams decorrelated.
    SeededRng fork(std::uint64_t tag) const {
        SeededRng t(state_ ^ (0x8f1bbcdcbfa53e0bull * (tag + 1)));
        return SeededRng(t.next_u64());
    }

    std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_;
};

} // namespace quantsmooth
