// Copyright (c) 2026 quantsmooth authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "quantsmooth/qlinear.hpp"
#include "quantsmooth/toy_model.hpp"

namespace quantsmooth {

// Derivative-free refinement of the per-channel smooth scales and weight
// quantization steps, targeting block output MSE. Every grid contains 1.0,
// updates are accepted only on strict improvement, so the loss sequence is
// non-increasing.
struct CalibConfig {
    std::vector<double> coarse_grid{0.5, 0.8, 1.0, 1.25, 2.0};
    std::vector<double> refine_grid{0.9, 0.95, 1.0, 1.05, 1.1};
    int passes = 3;               // the final pass runs the refine grid
    std::size_t c_hat_chunk = 8;  // channels sharing one multiplier
    std::size_t delta_chunk = 1;  // one weight step per output channel
    // Scenes used for search loss evaluations; the full calibration set
    // still drives ranges, scales and inter-block propagation.
    std::size_t max_search_samples = 8;
    // Recorded for reference only: the gradient-trained variant this search
    // stands in for used lr 5e-3 (c_hat) and 5e-2 (delta).
    double reference_lr_c_hat = 5e-3;
    double reference_lr_delta = 5e-2;

    void validate() const;
};

// MSE between the full-precision and quantized block outputs, both applied
// to the same input streams.
double block_recon_loss(const ToyModel& fp_model, const QuantizedModel& qm, std::size_t block,
                        const std::vector<Tensor>& streams_in);

// Coordinate search over one standalone linear (loss = quant_layer_loss
// against w_ref on x_calib). Returns the final loss; the trace records the
// loss after every accepted update.
double coordinate_search_linear(QuantLinear& layer, const Tensor& w_ref, const Tensor& x_calib,
                                const CalibConfig& cfg, std::vector<double>* trace = nullptr);

// Coordinate search over all parameter groups of one model block. Groups run
// in fixed order (site q,k,v,o,fc1,fc2; c_hat chunks then weight steps,
// channels ascending). Returns the final loss on the given streams.
double coordinate_search_block(const ToyModel& base, std::size_t block, QuantBlock& qb,
                               const std::vector<Tensor>& streams_in, const CalibConfig& cfg,
                               std::vector<double>* trace = nullptr);

struct BlockCalibLog {
    std::size_t block = 0;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    int passes = 0;
    double wall_ms = 0.0;
};

struct CalibResult {
    QuantizedModel model;
    std::vector<BlockCalibLog> log;
};

// Blocks are calibrated front to back; each block's inputs are the quantized
// outputs of the already-calibrated prefix, for the whole calibration set.
CalibResult calibrate_blockwise(const ToyModel& model, const std::vector<Scene>& calib_set,
                                const ModelQuantConfig& qcfg, const CalibConfig& ccfg);

} // namespace quantsmooth
