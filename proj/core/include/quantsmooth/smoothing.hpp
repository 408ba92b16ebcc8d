// Copyright (c) 2026 quantsmooth authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "quantsmooth/rotation.hpp"
#include "quantsmooth/tensor.hpp"

namespace quantsmooth {

// Per-channel smoothing scale c_hat computed in the rotated space.
// c_hat_i = max|X_i|^alpha / max|W_i|^(1-alpha) over channel i, dead
// channels fall back to 1, values clipped to [1e-4, 1e4] before use.
struct SmoothScale {
    std::vector<double> c_hat;
    double alpha = 0.5;

    static SmoothScale unit(std::size_t d, double alpha = 0.5);
};

// x_rot (m x d) and w_rot (n x d) must already be rotated; stats never come
// from pre-rotation tensors.
SmoothScale compute_smooth_scale(const Tensor& x_rot, const Tensor& w_rot, double alpha);

// Same formula when only per-channel running maxima are known (the
// calibration path keeps a running max instead of the stacked activations).
SmoothScale compute_smooth_scale_from_max(const std::vector<double>& x_max,
                                          const std::vector<double>& w_max, double alpha);

// Divides (or multiplies, for the weight side) each column by c_hat.
Tensor apply_channel_scale(const Tensor& x, const std::vector<double>& c_hat, bool invert);
void apply_channel_scale_row(double* row, std::size_t d, const std::vector<double>& c_hat,
                             bool invert);

// X' = X Hhat diag(c)^-1, W' = W Hhat diag(c); matmul(X', W') preserves
// matmul(X, W). W stored d_out x d_in.
struct DualSmoothed {
    Tensor x;
    Tensor w;
};
DualSmoothed apply_dual_smooth(const Tensor& x, const Tensor& w, const RotationOp& rot,
                               const SmoothScale& sc);

// Precomputes the transformed weight once; byte-identical to the W' of
// apply_dual_smooth.
Tensor fuse_offline(const Tensor& w, const RotationOp& rot, const SmoothScale& sc);

} // namespace quantsmooth
