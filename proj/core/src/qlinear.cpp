// Copyright (c) 2026 quantsmooth authors
// SPDX-License-Identifier: Apache-2.0

#include "quantsmooth/qlinear.hpp"

#include <cmath>
#include <limits>

#include "quantsmooth/errors.hpp"

namespace quantsmooth {

const char* scheme_name(SchemeVariant v) {
    switch (v) {
        case SchemeVariant::Naive: return "naive";
        case SchemeVariant::RotationOnly: return "rotation";
        case SchemeVariant::ScaleOnly: return "scale";
        case SchemeVariant::DSFQ: return "dsfq";
    }
    return "?";
}

SchemeVariant scheme_from_name(const std::string& name) {
    if (name == "naive") return SchemeVariant::Naive;
    if (name == "rotation") return SchemeVariant::RotationOnly;
    if (name == "scale") return SchemeVariant::ScaleOnly;
    if (name == "dsfq") return SchemeVariant::DSFQ;
    throw UsageError("unknown scheme: " + name);
}

QuantScheme QuantScheme::make(SchemeVariant v, int act_bits, int weight_bits,
                              std::uint64_t rotation_seed) {
    QuantScheme s;
    s.variant = v;
    s.act_spec = QuantSpec{act_bits, Granularity::PerRow, QuantMode::Dynamic};
    s.weight_spec = QuantSpec{weight_bits, Granularity::PerRow, QuantMode::Static};
    s.rotation_seed = rotation_seed;
    return s;
}

void QuantLinear::transform_row(double* row) const {
    const bool rot = scheme.rotation.has_value();
    const bool scl = scheme.smooth.has_value();
    if (scheme.order == TransformOrder::RotateScale) {
        if (rot) apply_rotation_row(row, *scheme.rotation);
        if (scl) apply_channel_scale_row(row, in_features, scheme.smooth->c_hat, /*invert=*/true);
    } else {
        if (scl) apply_channel_scale_row(row, in_features, scheme.smooth->c_hat, /*invert=*/true);
        if (rot) apply_rotation_row(row, *scheme.rotation);
    }
}

Tensor QuantLinear::transform_acts(const Tensor& x) const {
    Tensor y = x;
    for (std::size_t i = 0; i < y.rows(); ++i) transform_row(y.row_ptr(i));
    return y;
}

void QuantLinear::requantize_weights() {
    QuantSpec ws = scheme.weight_spec;
    ws.granularity = Granularity::PerRow; // one delta per output channel
    w_q = quantize_tensor(w_fused, ws);
}

QuantLinear build_quant_linear(const Tensor& w, const Tensor& calib_acts,
                               const QuantScheme& scheme_in) {
    if (w.rank() != 2 || calib_acts.rank() != 2)
        throw DimError("build_quant_linear: rank-2 inputs required");
    if (calib_acts.cols() != w.cols())
        throw DimError("build_quant_linear: calib activation width != in_features");
    scheme_in.act_spec.validate();
    scheme_in.weight_spec.validate();
    if (scheme_in.act_spec.mode == QuantMode::Dynamic &&
        scheme_in.act_spec.granularity == Granularity::PerColumn)
        throw NumericError("build_quant_linear: dynamic activations are per-token or per-tensor");

    QuantLinear layer;
    layer.in_features = w.cols();
    layer.out_features = w.rows();
    layer.scheme = scheme_in;

    QuantScheme& scheme = layer.scheme;
    if (scheme.wants_rotation()) {
        if (!is_power_of_two(layer.in_features))
            throw DimError("build_quant_linear: rotation requires power-of-two in_features");
        if (!scheme.rotation) scheme.rotation = random_rotation(layer.in_features, scheme.rotation_seed);
    } else {
        scheme.rotation.reset();
    }

    // Stats for the scale step come from the space the scale is applied in:
    // rotated activations/weights for rotate-then-scale, raw for the
    // scale-then-rotate ablation arm.
    Tensor acts_stat = calib_acts;
    Tensor w_stat = w;
    if (scheme.order == TransformOrder::RotateScale && scheme.rotation) {
        acts_stat = apply_rotation(calib_acts, *scheme.rotation);
        w_stat = apply_rotation(w, *scheme.rotation);
    }
    layer.rot_act_colmax = axis_stats(acts_stat, Axis::Cols).max_abs;

    if (scheme.wants_scale()) {
        if (!scheme.smooth)
            scheme.smooth = compute_smooth_scale(acts_stat, w_stat, scheme.alpha);
    } else {
        scheme.smooth.reset();
    }

    // Fused weights: W' = per-scheme transform of W (rotation mixes the
    // input dimension; the scale multiplies channels, mirroring the inverse
    // applied to activations).
    Tensor wf = w;
    if (scheme.order == TransformOrder::RotateScale) {
        if (scheme.rotation) wf = apply_rotation(wf, *scheme.rotation);
        if (scheme.smooth) wf = apply_channel_scale(wf, scheme.smooth->c_hat, /*invert=*/false);
    } else {
        if (scheme.smooth) wf = apply_channel_scale(wf, scheme.smooth->c_hat, /*invert=*/false);
        if (scheme.rotation) wf = apply_rotation(wf, *scheme.rotation);
    }
    layer.w_fused = std::move(wf);
    layer.requantize_weights();

    if (scheme.act_spec.mode == QuantMode::Static) {
        Tensor xprime = layer.transform_acts(calib_acts);
        switch (scheme.act_spec.granularity) {
            case Granularity::PerTensor:
                layer.act_group_max = {max_abs_of(xprime)};
                break;
            case Granularity::PerRow:
                layer.act_group_max = axis_stats(xprime, Axis::Rows).max_abs;
                break;
            case Granularity::PerColumn:
                throw NumericError("build_quant_linear: per-column activations unsupported");
        }
    }
    return layer;
}

Tensor forward_reference(const Tensor& w, const Tensor& x) { return matmul(x, w); }

Tensor forward_quantized(const QuantLinear& layer, const Tensor& x) {
    if (x.rank() != 2) throw DimError("forward_quantized: rank-2 input required");
    if (x.cols() != layer.in_features)
        throw DimError("forward_quantized: input width != in_features");
    if (!x.all_finite()) throw NumericError("forward_quantized: non-finite input");

    const std::size_t m = x.rows(), k = layer.in_features, n = layer.out_features;
    const QuantSpec& aspec = layer.scheme.act_spec;

    // Accumulator guard: worst case |code_a * code_w| * k must fit.
    const double worst = static_cast<double>(std::int64_t(1) << (aspec.bits - 1)) *
                         static_cast<double>(std::int64_t(1) << (layer.scheme.weight_spec.bits - 1)) *
                         static_cast<double>(k);
    if (worst >= static_cast<double>(std::numeric_limits<std::int64_t>::max()))
        throw NumericError("forward_quantized: accumulator would overflow");

    Tensor xprime = layer.transform_acts(x);

    // Activation quantization.
    std::vector<std::int8_t> acodes(m * k);
    std::vector<double> adelta; // per group
    const std::int64_t levels = aspec.qmax();
    switch (aspec.granularity) {
        case Granularity::PerRow: {
            adelta.resize(m);
            if (aspec.mode == QuantMode::Dynamic) {
                for (std::size_t i = 0; i < m; ++i)
                    adelta[i] = compute_delta(xprime.row_ptr(i), k, aspec.bits);
            } else {
                if (layer.act_group_max.size() != m)
                    throw DimError("forward_quantized: static per-token ranges need fixed token count");
                for (std::size_t i = 0; i < m; ++i) {
                    double ma = layer.act_group_max[i];
                    adelta[i] = ma > 0.0 ? ma / static_cast<double>(levels) : 1e-8;
                }
            }
            for (std::size_t i = 0; i < m; ++i)
                quantize(xprime.row_ptr(i), k, adelta[i], aspec.bits, acodes.data() + i * k);
            break;
        }
        case Granularity::PerTensor: {
            double d;
            if (aspec.mode == QuantMode::Dynamic) {
                d = compute_delta(xprime.data(), m * k, aspec.bits);
            } else {
                if (layer.act_group_max.size() != 1)
                    throw DimError("forward_quantized: missing static range");
                double ma = layer.act_group_max[0];
                d = ma > 0.0 ? ma / static_cast<double>(levels) : 1e-8;
            }
            adelta.assign(m, d);
            quantize(xprime.data(), m * k, d, aspec.bits, acodes.data());
            break;
        }
        case Granularity::PerColumn:
            throw NumericError("forward_quantized: per-column activations unsupported");
    }

    // Integer GEMM over codes, 64-bit accumulation, then one rescale per
    // output element: out[i][j] = acc * adelta[i] * wdelta[j].
    Tensor out({m, n});
    const std::int8_t* wc = layer.w_q.codes.data();
    for (std::size_t i = 0; i < m; ++i) {
        const std::int8_t* ai = acodes.data() + i * k;
        double* oi = out.row_ptr(i);
        const double da = adelta[i];
        for (std::size_t j = 0; j < n; ++j) {
            const std::int8_t* wj = wc + j * k;
            std::int64_t acc = 0;
            for (std::size_t t = 0; t < k; ++t)
                acc += static_cast<std::int32_t>(ai[t]) * static_cast<std::int32_t>(wj[t]);
            oi[j] = static_cast<double>(acc) * da * layer.w_q.deltas[j];
        }
    }
    return out;
}

double quant_layer_loss(const QuantLinear& layer, const Tensor& w, const Tensor& x) {
    Tensor ref = forward_reference(w, x);
    Tensor got = forward_quantized(layer, x);
    double acc = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        double d = ref[i] - got[i];
        acc += d * d;
    }
    return acc / static_cast<double>(ref.size());
}

} // namespace quantsmooth
