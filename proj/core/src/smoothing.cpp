// Copyright (c) 2026 quantsmooth authors
// SPDX-License-Identifier: Apache-2.0

#include "quantsmooth/smoothing.hpp"

#include <cmath>

#include "quantsmooth/errors.hpp"

namespace quantsmooth {

namespace {
constexpr double kScaleClipLo = 1e-4;
constexpr double kScaleClipHi = 1e4;
} // namespace

SmoothScale SmoothScale::unit(std::size_t d, double alpha) {
    SmoothScale sc;
    sc.c_hat.assign(d, 1.0);
    sc.alpha = alpha;
    return sc;
}

SmoothScale compute_smooth_scale_from_max(const std::vector<double>& x_max,
                                          const std::vector<double>& w_max, double alpha) {
    if (x_max.size() != w_max.size())
        throw DimError("compute_smooth_scale: channel count mismatch");
    if (alpha < 0.0 || alpha > 1.0)
        throw NumericError("compute_smooth_scale: alpha must be in [0, 1]");
    SmoothScale sc;
    sc.alpha = alpha;
    sc.c_hat.resize(x_max.size());
    for (std::size_t i = 0; i < x_max.size(); ++i) {
        double mx = x_max[i], mw = w_max[i];
        double c = 1.0;
        if (mx > 0.0 && mw > 0.0) c = std::pow(mx, alpha) / std::pow(mw, 1.0 - alpha);
        if (!std::isfinite(c)) c = 1.0;
        if (c < kScaleClipLo) c = kScaleClipLo;
        if (c > kScaleClipHi) c = kScaleClipHi;
        sc.c_hat[i] = c;
    }
    return sc;
}

SmoothScale compute_smooth_scale(const Tensor& x_rot, const Tensor& w_rot, double alpha) {
    if (x_rot.rank() != 2 || w_rot.rank() != 2)
        throw DimError("compute_smooth_scale: rank-2 inputs required");
    if (x_rot.cols() != w_rot.cols())
        throw DimError("compute_smooth_scale: channel count mismatch");
    AxisStats xs = axis_stats(x_rot, Axis::Cols);
    AxisStats ws = axis_stats(w_rot, Axis::Cols);
    return compute_smooth_scale_from_max(xs.max_abs, ws.max_abs, alpha);
}

void apply_channel_scale_row(double* row, std::size_t d, const std::vector<double>& c_hat,
                             bool invert) {
    if (invert) {
        for (std::size_t j = 0; j < d; ++j) row[j] /= c_hat[j];
    } else {
        for (std::size_t j = 0; j < d; ++j) row[j] *= c_hat[j];
    }
}

Tensor apply_channel_scale(const Tensor& x, const std::vector<double>& c_hat, bool invert) {
    if (x.rank() != 2) throw DimError("apply_channel_scale: rank-2 required");
    if (x.cols() != c_hat.size()) throw DimError("apply_channel_scale: channel count mismatch");
    for (double c : c_hat)
        if (!(c > 0.0) || !std::isfinite(c))
            throw NumericError("apply_channel_scale: scales must be positive finite");
    Tensor y = x;
    for (std::size_t i = 0; i < y.rows(); ++i)
        apply_channel_scale_row(y.row_ptr(i), y.cols(), c_hat, invert);
    return y;
}

DualSmoothed apply_dual_smooth(const Tensor& x, const Tensor& w, const RotationOp& rot,
                               const SmoothScale& sc) {
    if (x.cols() != rot.dim() || w.cols() != rot.dim())
        throw DimError("apply_dual_smooth: dims must match rotation");
    DualSmoothed out;
    out.x = apply_channel_scale(apply_rotation(x, rot), sc.c_hat, /*invert=*/true);
    out.w = apply_channel_scale(apply_rotation(w, rot), sc.c_hat, /*invert=*/false);
    return out;
}

Tensor fuse_offline(const Tensor& w, const RotationOp& rot, const SmoothScale& sc) {
    return apply_channel_scale(apply_rotation(w, rot), sc.c_hat, /*invert=*/false);
}

} // namespace quantsmooth
