// Copyright (c) 2026 quantsmooth authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "quantsmooth/rng.hpp"

namespace quantsmooth {

// Dense row-major array of doubles, rank 1..3. Immutable by convention once
// built by a public op; all ops here are pure functions. Compute precision is
// f64 throughout, the on-disk format (tensor_io) is f32.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor matrix(std::size_t rows, std::size_t cols) {
        return Tensor({rows, cols});
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }

    // rank-2 accessors
    std::size_t rows() const;
    std::size_t cols() const;
    double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double* row_ptr(std::size_t i) { return data_.data() + i * shape_[1]; }
    const double* row_ptr(std::size_t i) const { return data_.data() + i * shape_[1]; }

    bool all_finite() const;
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

enum class Axis { Rows, Cols };

// Per-slice statistics. axis names the retained slices: Rows means one entry
// per row (reduction over columns).
struct AxisStats {
    Axis axis = Axis::Rows;
    std::vector<double> mean;
    std::vector<double> var;     // population variance
    std::vector<double> max_abs;
};

// C = A * B^T given B already stored transposed (n x k). 64-bit accumulation.
Tensor matmul(const Tensor& a, const Tensor& b_transposed);

AxisStats axis_stats(const Tensor& x, Axis axis);

// E[(x-mu)^4]/sigma^4 - 3 over all entries. Needs >= 4 elements, var > 0.
double excess_kurtosis(const Tensor& x);

// Whole-tensor helpers used across modules.
double mean_of(const Tensor& x);
double population_var(const Tensor& x);
double max_abs_of(const Tensor& x);
double frobenius_norm(const Tensor& x);

Tensor gen_gaussian(SeededRng& rng, std::vector<std::size_t> shape);

// Gaussian base with the listed columns multiplied by outlier_scale.
// Rank-2 only; synthesizes channel-outlier activations.
Tensor gen_heavy_tailed(SeededRng& rng, std::size_t rows, std::size_t cols,
                        const std::vector<std::size_t>& outlier_channels,
                        double outlier_scale);

} // namespace quantsmooth
