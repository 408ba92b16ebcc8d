// Copyright (c) 2026 quantsmooth authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "quantsmooth/tensor.hpp"

namespace quantsmooth {

// Slice sharing one step: whole tensor, one per row (token), or one per
// column (output channel of the GEMM's right factor).
enum class Granularity : std::uint8_t { PerTensor = 0, PerRow = 1, PerColumn = 2 };

// Static freezes steps from calibration; Dynamic recomputes per input.
// Dynamic is an activation-side mode only.
enum class QuantMode : std::uint8_t { Static = 0, Dynamic = 1 };

struct QuantSpec {
    int bits = 8; // one of {4, 6, 8}
    Granularity granularity = Granularity::PerTensor;
    QuantMode mode = QuantMode::Static;

    std::int64_t qmin() const { return -(std::int64_t(1) << (bits - 1)); }
    std::int64_t qmax() const { return (std::int64_t(1) << (bits - 1)) - 1; }
    void validate() const;
};

struct QuantizedTensor {
    std::vector<std::size_t> shape;
    std::vector<std::int8_t> codes;  // row-major, same shape as source
    std::vector<double> deltas;      // one per quantization group
    QuantSpec spec;

    std::size_t rows() const { return shape[0]; }
    std::size_t cols() const { return shape.size() > 1 ? shape[1] : 1; }
};

// Delta = max|x| / (2^(N-1) - 1); all-zero slices fall back to 1e-8.
double compute_delta(const double* x, std::size_t n, int bits);
double compute_delta(const Tensor& x, int bits);

// Rounding is half-away-from-zero (std::round), pinned for cross-platform
// determinism.
std::int8_t quantize_value(double x, double delta, int bits);
void quantize(const double* x, std::size_t n, double delta, int bits, std::int8_t* codes);
Tensor dequantize(const QuantizedTensor& q);

QuantizedTensor quantize_tensor(const Tensor& x, const QuantSpec& spec);

// Mean squared reconstruction error of quantize->dequantize under spec.
double quant_mse(const Tensor& x, const QuantSpec& spec);

// mu-coherence max|x| * sqrt(g) / ||x||_F; scale-free outlier-dominance
// measure, in [1, sqrt(g)].
double coherence(const Tensor& x);
double coherence(const double* x, std::size_t n);

// QQTS file: magic "QQTS", bits u8, granularity u8, mode u8, rank u8,
// u32-LE dims, deltas as LE f64, codes as i8. Bit-exact round-trip.
void save_qqts(const QuantizedTensor& q, std::ostream& out);
void save_qqts_file(const QuantizedTensor& q, const std::string& path);
QuantizedTensor load_qqts(std::istream& in);
QuantizedTensor load_qqts_file(const std::string& path);

} // namespace quantsmooth
