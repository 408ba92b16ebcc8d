// Copyright (c) 2026 quantsmooth authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "quantsmooth/rng.hpp"
#include "quantsmooth/tensor.hpp"

namespace quantsmooth {

// Normalized randomized Hadamard transform, dim a power of two. Represents
// Hhat = diag(signs) * H_sylvester / sqrt(d): the random +-1 diagonal flips
// input coordinates before mixing, which keeps one-sided activations from
// concentrating their mean into a single output channel. Hhat^T Hhat = I.
class RotationOp {
public:
    RotationOp() = default;
    RotationOp(std::size_t dim, std::vector<std::int8_t> signs, std::uint64_t seed);

    // All signs +1: the plain normalized Sylvester transform (symmetric, so
    // applying it twice is the identity).
    static RotationOp identity_signs(std::size_t dim);

    std::size_t dim() const { return dim_; }
    const std::vector<std::int8_t>& signs() const { return signs_; }
    std::uint64_t seed() const { return seed_; }

    // Dense d x d matrix of the represented transform (for tests/oracles).
    Tensor matrix() const;

private:
    std::size_t dim_ = 0;
    std::vector<std::int8_t> signs_;
    std::uint64_t seed_ = 0;
};

bool is_power_of_two(std::size_t d);

// Sylvester construction scaled by 1/sqrt(d); entries +-1/sqrt(d), orthonormal.
Tensor hadamard_matrix(std::size_t d);

// Signs drawn iid +-1 from the seeded stream.
RotationOp random_rotation(std::size_t d, std::uint64_t seed);

// X * Hhat via in-place fast Walsh-Hadamard per row, O(d log d).
Tensor apply_rotation(const Tensor& x, const RotationOp& rot);

// Single row in place (scratch-free hot path for the quantized forward).
void apply_rotation_row(double* row, const RotationOp& rot);

// Unnormalized in-place FWHT butterfly of length n (power of two).
void fwht_inplace(double* v, std::size_t n);

} // namespace quantsmooth
