// Copyright (c) 2026 quantsmooth authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "quantsmooth/quantize.hpp"
#include "quantsmooth/rotation.hpp"
#include "quantsmooth/smoothing.hpp"
#include "quantsmooth/tensor.hpp"

namespace quantsmooth {

// Ablation arms: no smoothing at all, Hadamard rotation only, channel scale
// only, or the full rotate-then-scale pipeline.
enum class SchemeVariant : std::uint8_t { Naive = 0, RotationOnly = 1, ScaleOnly = 2, DSFQ = 3 };

// Rotate-then-scale is the shipping order; scale-then-rotate exists for the
// ablation harness only (both preserve the product).
enum class TransformOrder : std::uint8_t { RotateScale = 0, ScaleRotate = 1 };

const char* scheme_name(SchemeVariant v);
SchemeVariant scheme_from_name(const std::string& name);

struct QuantScheme {
    SchemeVariant variant = SchemeVariant::Naive;
    QuantSpec act_spec{8, Granularity::PerRow, QuantMode::Dynamic};
    QuantSpec weight_spec{8, Granularity::PerRow, QuantMode::Static};
    double alpha = 0.5;
    std::uint64_t rotation_seed = 0;
    TransformOrder order = TransformOrder::RotateScale;

    // Realized per-layer transforms. build_quant_linear fills whichever the
    // variant requires and leaves the rest empty.
    std::optional<RotationOp> rotation;
    std::optional<SmoothScale> smooth;

    bool wants_rotation() const {
        return variant == SchemeVariant::RotationOnly || variant == SchemeVariant::DSFQ;
    }
    bool wants_scale() const {
        return variant == SchemeVariant::ScaleOnly || variant == SchemeVariant::DSFQ;
    }

    static QuantScheme make(SchemeVariant v, int act_bits, int weight_bits,
                            std::uint64_t rotation_seed);
};

// Simulated low-bit linear layer y = x W^T with the stored weight already
// transformed (fused) per scheme. Weight grid: one delta per output channel,
// i.e. per row of the stored d_out x d_in tensor (the out-dimension of the
// GEMM). Activations are quantized per token (row) by default, dynamically.
class QuantLinear {
public:
    std::size_t in_features = 0;
    std::size_t out_features = 0;
    QuantScheme scheme;

    Tensor w_fused;      // transformed float weights W', d_out x d_in
    QuantizedTensor w_q; // quantized W', deltas.size() == out_features

    // Static activation mode: frozen per-group max|x'| from calibration
    // (1 value for PerTensor, one per token position for PerRow).
    std::vector<double> act_group_max;
    // Per-channel running max of the rotated (pre-scale) calibration
    // activations; lets the optimizer refresh things after c_hat updates.
    std::vector<double> rot_act_colmax;

    // Applies the scheme's activation-side transform to a row in place.
    void transform_row(double* row) const;
    Tensor transform_acts(const Tensor& x) const;

    // Re-derive weight codes/deltas from w_fused (used after c_hat updates).
    void requantize_weights();
};

// calib_acts: rows of representative activations for this layer (m x d_in).
QuantLinear build_quant_linear(const Tensor& w, const Tensor& calib_acts,
                               const QuantScheme& scheme);

// Integer-path forward: per-scheme transform, activation quantization,
// int64-accumulated code GEMM, then per-(token, channel) rescale.
Tensor forward_quantized(const QuantLinear& layer, const Tensor& x);

// Full-precision reference x W^T on the untransformed weights.
Tensor forward_reference(const Tensor& w, const Tensor& x);

// Mean squared error between the reference and quantized forwards.
double quant_layer_loss(const QuantLinear& layer, const Tensor& w, const Tensor& x);

} // namespace quantsmooth
