// Copyright (c) 2026 quantsmooth authors
// SPDX-License-Identifier: Apache-2.0

#include "quantsmooth/rotation.hpp"

#include <cmath>

#include "quantsmooth/errors.hpp"

namespace quantsmooth {

bool is_power_of_two(std::size_t d) { return d != 0 && (d & (d - 1)) == 0; }

RotationOp::RotationOp(std::size_t dim, std::vector<std::int8_t> signs, std::uint64_t seed)
    : dim_(dim), signs_(std::move(signs)), seed_(seed) {
    if (!is_power_of_two(dim_)) throw DimError("RotationOp: dim must be a power of two");
    if (signs_.size() != dim_) throw DimError("RotationOp: signs length mismatch");
    for (auto s : signs_)
        if (s != 1 && s != -1) throw NumericError("RotationOp: signs must be +-1");
}

RotationOp RotationOp::identity_signs(std::size_t dim) {
    return RotationOp(dim, std::vector<std::int8_t>(dim, 1), 0);
}

Tensor hadamard_matrix(std::size_t d) {
    if (!is_power_of_two(d)) throw DimError("hadamard_matrix: dim must be a power of two");
    Tensor h({d, d});
    h.at(0, 0) = 1.0;
    for (std::size_t n = 1; n < d; n *= 2) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                double v = h.at(i, j);
                h.at(i, j + n) = v;
                h.at(i + n, j) = v;
                h.at(i + n, j + n) = -v;
            }
        }
    }
    const double norm = 1.0 / std::sqrt(static_cast<double>(d));
    for (std::size_t i = 0; i < d * d; ++i) h[i] *= norm;
    return h;
}

Tensor RotationOp::matrix() const {
    Tensor h = hadamard_matrix(dim_);
    // diag(signs) * H scales row i of H by signs[i].
    for (std::size_t i = 0; i < dim_; ++i)
        for (std::size_t j = 0; j < dim_; ++j) h.at(i, j) *= signs_[i];
    return h;
}

RotationOp random_rotation(std::size_t d, std::uint64_t seed) {
    if (!is_power_of_two(d)) throw DimError("random_rotation: dim must be a power of two");
    SeededRng rng(seed);
    std::vector<std::int8_t> signs(d);
    for (auto& s : signs) s = static_cast<std::int8_t>(rng.next_sign());
    return RotationOp(d, std::move(signs), seed);
}

void fwht_inplace(double* v, std::size_t n) {
    for (std::size_t len = 1; len < n; len <<= 1) {
        for (std::size_t i = 0; i < n; i += len << 1) {
            for (std::size_t j = i; j < i + len; ++j) {
                double a = v[j], b = v[j + len];
                v[j] = a + b;
                v[j + len] = a - b;
            }
        }
    }
}

void apply_rotation_row(double* row, const RotationOp& rot) {
    const std::size_t d = rot.dim();
    const auto& s = rot.signs();
    for (std::size_t j = 0; j < d; ++j)
        if (s[j] < 0) row[j] = -row[j];
    fwht_inplace(row, d);
    const double norm = 1.0 / std::sqrt(static_cast<double>(d));
    for (std::size_t j = 0; j < d; ++j) row[j] *= norm;
}

Tensor apply_rotation(const Tensor& x, const RotationOp& rot) {
    if (x.rank() != 2) throw DimError("apply_rotation: rank-2 required");
    if (x.cols() != rot.dim()) throw DimError("apply_rotation: column count != rotation dim");
    Tensor y = x;
    for (std::size_t i = 0; i < y.rows(); ++i) apply_rotation_row(y.row_ptr(i), rot);
    return y;
}

} // namespace quantsmooth
