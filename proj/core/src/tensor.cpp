// Copyright (c) 2026 quantsmooth authors
// SPDX-License-Identifier: Apache-2.0

#include "quantsmooth/tensor.hpp"

#include <cmath>
#include <stdexcept>

#include "quantsmooth/errors.hpp"

namespace quantsmooth {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    if (shape.empty() || shape.size() > 3)
        throw DimError("tensor rank must be 1..3");
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) throw DimError("tensor dims must be positive");
        n *= d;
    }
    return n;
}

} // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_product(shape_) != data_.size())
        throw DimError("tensor data length does not match shape");
}

std::size_t Tensor::rows() const {
    if (rank() != 2) throw DimError("rows(): tensor is not rank-2");
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) throw DimError("cols(): tensor is not rank-2");
    return shape_[1];
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor matmul(const Tensor& a, const Tensor& b_transposed) {
    if (a.rank() != 2 || b_transposed.rank() != 2)
        throw DimError("matmul: both operands must be rank-2");
    const std::size_t m = a.rows(), k = a.cols();
    const std::size_t n = b_transposed.rows();
    if (b_transposed.cols() != k)
        throw DimError("matmul: inner dimensions mismatch");
    if (!a.all_finite() || !b_transposed.all_finite())
        throw NumericError("matmul: non-finite input");

    Tensor c({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a.row_ptr(i);
        double* ci = c.row_ptr(i);
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b_transposed.row_ptr(j);
            double acc = 0.0;
            for (std::size_t t = 0; t < k; ++t) acc += ai[t] * bj[t];
            ci[j] = acc;
        }
    }
    return c;
}

AxisStats axis_stats(const Tensor& x, Axis axis) {
    if (x.rank() != 2) throw DimError("axis_stats: rank-2 required");
    const std::size_t m = x.rows(), n = x.cols();
    AxisStats st;
    st.axis = axis;
    const std::size_t slices = (axis == Axis::Rows) ? m : n;
    const std::size_t width = (axis == Axis::Rows) ? n : m;
    st.mean.resize(slices);
    st.var.resize(slices);
    st.max_abs.resize(slices);
    for (std::size_t s = 0; s < slices; ++s) {
        double sum = 0.0, ma = 0.0;
        for (std::size_t t = 0; t < width; ++t) {
            double v = (axis == Axis::Rows) ? x.at(s, t) : x.at(t, s);
            sum += v;
            ma = std::max(ma, std::fabs(v));
        }
        double mu = sum / static_cast<double>(width);
        double acc = 0.0;
        for (std::size_t t = 0; t < width; ++t) {
            double v = (axis == Axis::Rows) ? x.at(s, t) : x.at(t, s);
            acc += (v - mu) * (v - mu);
        }
        st.mean[s] = mu;
        st.var[s] = acc / static_cast<double>(width);
        st.max_abs[s] = ma;
    }
    return st;
}

double mean_of(const Tensor& x) {
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) sum += x[i];
    return sum / static_cast<double>(x.size());
}

double population_var(const Tensor& x) {
    double mu = mean_of(x), acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - mu) * (x[i] - mu);
    return acc / static_cast<double>(x.size());
}

double max_abs_of(const Tensor& x) {
    double ma = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) ma = std::max(ma, std::fabs(x[i]));
    return ma;
}

double frobenius_norm(const Tensor& x) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * x[i];
    return std::sqrt(acc);
}

double excess_kurtosis(const Tensor& x) {
    if (x.size() < 4) throw DimError("excess_kurtosis: need >= 4 elements");
    double mu = mean_of(x);
    double m2 = 0.0, m4 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double d = x[i] - mu, d2 = d * d;
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= static_cast<double>(x.size());
    m4 /= static_cast<double>(x.size());
    if (m2 <= 0.0) throw NumericError("excess_kurtosis: zero variance");
    return m4 / (m2 * m2) - 3.0;
}

Tensor gen_gaussian(SeededRng& rng, std::vector<std::size_t> shape) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.next_gaussian();
    return t;
}

Tensor gen_heavy_tailed(SeededRng& rng, std::size_t rows, std::size_t cols,
                        const std::vector<std::size_t>& outlier_channels,
                        double outlier_scale) {
    if (outlier_scale < 1.0)
        throw NumericError("gen_heavy_tailed: outlier_scale must be >= 1");
    for (std::size_t c : outlier_channels)
        if (c >= cols) throw DimError("gen_heavy_tailed: outlier channel out of range");
    Tensor t = gen_gaussian(rng, {rows, cols});
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t c : outlier_channels)
            t.at(i, c) *= outlier_scale;
    return t;
}

} // namespace quantsmooth
