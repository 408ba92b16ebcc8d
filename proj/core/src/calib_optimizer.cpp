// Copyright (c) 2026 quantsmooth authors
// SPDX-License-Identifier: Apache-2.0

#include "quantsmooth/calib_optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "quantsmooth/errors.hpp"
#include "quantsmooth/parallel.hpp"

namespace quantsmooth {

namespace {

bool grid_has_identity(const std::vector<double>& g) {
    for (double v : g)
        if (v == 1.0) return true;
    return false;
}

double sse_against(const Tensor& got, const Tensor& want) {
    double acc = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        double d = got[i] - want[i];
        acc += d * d;
    }
    return acc;
}

// Scales one chunk of c_hat (and the matching fused-weight columns) by m,
// then rebuilds the weight grid. Restores exactly from the backup on reject.
struct ChatBackup {
    std::vector<double> c_vals;
    std::vector<double> w_cols; // column-major chunk snapshot
    QuantizedTensor w_q;
};

ChatBackup apply_chat_multiplier(QuantLinear& layer, std::size_t c0, std::size_t c1, double m) {
    ChatBackup bk;
    auto& c_hat = layer.scheme.smooth->c_hat;
    bk.w_q = layer.w_q;
    for (std::size_t c = c0; c < c1; ++c) bk.c_vals.push_back(c_hat[c]);
    for (std::size_t c = c0; c < c1; ++c)
        for (std::size_t r = 0; r < layer.out_features; ++r)
            bk.w_cols.push_back(layer.w_fused.at(r, c));
    for (std::size_t c = c0; c < c1; ++c) {
        c_hat[c] *= m;
        for (std::size_t r = 0; r < layer.out_features; ++r) layer.w_fused.at(r, c) *= m;
    }
    layer.requantize_weights();
    return bk;
}

void revert_chat(QuantLinear& layer, std::size_t c0, std::size_t c1, const ChatBackup& bk) {
    auto& c_hat = layer.scheme.smooth->c_hat;
    std::size_t t = 0;
    for (std::size_t c = c0; c < c1; ++c) c_hat[c] = bk.c_vals[c - c0];
    for (std::size_t c = c0; c < c1; ++c)
        for (std::size_t r = 0; r < layer.out_features; ++r)
            layer.w_fused.at(r, c) = bk.w_cols[t++];
    layer.w_q = bk.w_q;
}

} // namespace

void CalibConfig::validate() const {
    if (!grid_has_identity(coarse_grid) || !grid_has_identity(refine_grid))
        throw NumericError("CalibConfig: grids must contain 1.0");
    for (double v : coarse_grid)
        if (!(v > 0.0)) throw NumericError("CalibConfig: multipliers must be positive");
    for (double v : refine_grid)
        if (!(v > 0.0)) throw NumericError("CalibConfig: multipliers must be positive");
    if (passes < 1) throw NumericError("CalibConfig: passes >= 1");
    if (c_hat_chunk == 0 || delta_chunk == 0) throw NumericError("CalibConfig: zero chunk");
    if (max_search_samples == 0) throw NumericError("CalibConfig: zero search samples");
}

double block_recon_loss(const ToyModel& fp_model, const QuantizedModel& qm, std::size_t block,
                        const std::vector<Tensor>& streams_in) {
    if (streams_in.empty()) throw DimError("block_recon_loss: no input streams");
    std::vector<double> sse(streams_in.size());
    std::size_t elems = 0;
    for (const auto& s : streams_in) elems += s.size();
    parallel_for(streams_in.size(), [&](std::size_t i) {
        Tensor want = fp_block_forward(fp_model, block, streams_in[i]);
        Tensor got = q_block_forward(qm, block, streams_in[i]);
        sse[i] = sse_against(got, want);
    });
    double acc = 0.0;
    for (double v : sse) acc += v;
    return acc / static_cast<double>(elems);
}

double coordinate_search_linear(QuantLinear& layer, const Tensor& w_ref, const Tensor& x_calib,
                                const CalibConfig& cfg, std::vector<double>* trace) {
    cfg.validate();
    double current = quant_layer_loss(layer, w_ref, x_calib);
    if (trace) trace->push_back(current);

    for (int pass = 0; pass < cfg.passes; ++pass) {
        const auto& grid =
            (cfg.passes > 1 && pass == cfg.passes - 1) ? cfg.refine_grid : cfg.coarse_grid;

        if (layer.scheme.smooth) {
            for (std::size_t c0 = 0; c0 < layer.in_features; c0 += cfg.c_hat_chunk) {
                std::size_t c1 = std::min(layer.in_features, c0 + cfg.c_hat_chunk);
                double best_m = 1.0, best_loss = current;
                for (double m : grid) {
                    if (m == 1.0) continue;
                    ChatBackup bk = apply_chat_multiplier(layer, c0, c1, m);
                    double loss = quant_layer_loss(layer, w_ref, x_calib);
                    revert_chat(layer, c0, c1, bk);
                    if (loss < best_loss) {
                        best_loss = loss;
                        best_m = m;
                    }
                }
                if (best_m != 1.0) {
                    apply_chat_multiplier(layer, c0, c1, best_m);
                    current = best_loss;
                    if (trace) trace->push_back(current);
                }
            }
        }

        for (std::size_t j0 = 0; j0 < layer.out_features; j0 += cfg.delta_chunk) {
            std::size_t j1 = std::min(layer.out_features, j0 + cfg.delta_chunk);
            double best_m = 1.0, best_loss = current;
            std::vector<double> saved(layer.w_q.deltas.begin() + j0, layer.w_q.deltas.begin() + j1);
            for (double m : grid) {
                if (m == 1.0) continue;
                for (std::size_t j = j0; j < j1; ++j) layer.w_q.deltas[j] = saved[j - j0] * m;
                double loss = quant_layer_loss(layer, w_ref, x_calib);
                if (loss < best_loss) {
                    best_loss = loss;
                    best_m = m;
                }
            }
            for (std::size_t j = j0; j < j1; ++j)
                layer.w_q.deltas[j] = saved[j - j0] * best_m;
            if (best_m != 1.0) {
                current = best_loss;
                if (trace) trace->push_back(current);
            }
        }
    }
    return current;
}

double coordinate_search_block(const ToyModel& base, std::size_t block, QuantBlock& qb,
                               const std::vector<Tensor>& streams_in, const CalibConfig& cfg,
                               std::vector<double>* trace) {
    cfg.validate();
    if (streams_in.empty()) throw DimError("coordinate_search_block: no input streams");

    std::size_t elems = 0;
    for (const auto& s : streams_in) elems += s.size();
    const double inv_elems = 1.0 / static_cast<double>(elems);

    // Targets: full-precision block on the same (already propagated) inputs.
    std::vector<Tensor> targets(streams_in.size());
    parallel_for(streams_in.size(), [&](std::size_t i) {
        targets[i] = fp_block_forward(base, block, streams_in[i]);
    });

    // y1 cache for MLP-side sweeps; valid while the attention half is fixed.
    std::vector<Tensor> y1_cache(streams_in.size());
    auto refresh_y1 = [&] {
        parallel_for(streams_in.size(), [&](std::size_t i) {
            y1_cache[i] = q_block_attn_half_with(base, qb, block, streams_in[i]);
        });
    };

    std::vector<double> sse(streams_in.size());
    auto loss_full = [&] {
        parallel_for(streams_in.size(), [&](std::size_t i) {
            Tensor y1 = q_block_attn_half_with(base, qb, block, streams_in[i]);
            sse[i] = sse_against(q_block_mlp_half_with(base, qb, block, y1), targets[i]);
        });
        double acc = 0.0;
        for (double v : sse) acc += v;
        return acc * inv_elems;
    };
    auto loss_mlp_only = [&] {
        parallel_for(streams_in.size(), [&](std::size_t i) {
            sse[i] = sse_against(q_block_mlp_half_with(base, qb, block, y1_cache[i]), targets[i]);
        });
        double acc = 0.0;
        for (double v : sse) acc += v;
        return acc * inv_elems;
    };

    refresh_y1();
    double current = loss_mlp_only();
    if (trace) trace->push_back(current);

    static const LinearSite kOrder[kLinearSites] = {LinearSite::Q,  LinearSite::K,
                                                    LinearSite::V,  LinearSite::O,
                                                    LinearSite::Fc1, LinearSite::Fc2};

    for (int pass = 0; pass < cfg.passes; ++pass) {
        const auto& grid =
            (cfg.passes > 1 && pass == cfg.passes - 1) ? cfg.refine_grid : cfg.coarse_grid;

        for (LinearSite site : kOrder) {
            const bool mlp_side = (site == LinearSite::Fc1 || site == LinearSite::Fc2);
            QuantLinear& layer = qb.linears[int(site)];
            auto eval = [&]() { return mlp_side ? loss_mlp_only() : loss_full(); };

            if (layer.scheme.smooth) {
                for (std::size_t c0 = 0; c0 < layer.in_features; c0 += cfg.c_hat_chunk) {
                    std::size_t c1 = std::min(layer.in_features, c0 + cfg.c_hat_chunk);
                    double best_m = 1.0, best_loss = current;
                    for (double m : grid) {
                        if (m == 1.0) continue;
                        ChatBackup bk = apply_chat_multiplier(layer, c0, c1, m);
                        double loss = eval();
                        revert_chat(layer, c0, c1, bk);
                        if (loss < best_loss) {
                            best_loss = loss;
                            best_m = m;
                        }
                    }
                    if (best_m != 1.0) {
                        apply_chat_multiplier(layer, c0, c1, best_m);
                        current = best_loss;
                        if (!mlp_side) refresh_y1();
                        if (trace) trace->push_back(current);
                    }
                }
            }

            for (std::size_t j0 = 0; j0 < layer.out_features; j0 += cfg.delta_chunk) {
                std::size_t j1 = std::min(layer.out_features, j0 + cfg.delta_chunk);
                double best_m = 1.0, best_loss = current;
                std::vector<double> saved(layer.w_q.deltas.begin() + j0,
                                          layer.w_q.deltas.begin() + j1);
                for (double m : grid) {
                    if (m == 1.0) continue;
                    for (std::size_t j = j0; j < j1; ++j)
                        layer.w_q.deltas[j] = saved[j - j0] * m;
                    double loss = eval();
                    if (loss < best_loss) {
                        best_loss = loss;
                        best_m = m;
                    }
                }
                for (std::size_t j = j0; j < j1; ++j)
                    layer.w_q.deltas[j] = saved[j - j0] * best_m;
                if (best_m != 1.0) {
                    current = best_loss;
                    if (!mlp_side) refresh_y1();
                    if (trace) trace->push_back(current);
                }
            }
        }
    }
    return current;
}

CalibResult calibrate_blockwise(const ToyModel& model, const std::vector<Scene>& calib_set,
                                const ModelQuantConfig& qcfg, const CalibConfig& ccfg) {
    if (calib_set.empty()) throw DimError("calibrate_blockwise: empty calibration set");
    ccfg.validate();

    CalibResult result;
    result.model = quantize_model(model, calib_set, qcfg);
    if (result.model.passthrough) return result;

    // Quantized streams for the whole calibration set, propagated block by
    // block through the already-calibrated prefix.
    std::vector<Tensor> streams(calib_set.size());
    for (std::size_t i = 0; i < calib_set.size(); ++i)
        streams[i] = register_tokens(model, calib_set[i]);

    const std::size_t n_search = std::min(ccfg.max_search_samples, streams.size());

    for (std::size_t b = 0; b < model.cfg.n_blocks; ++b) {
        auto t0 = std::chrono::steady_clock::now();
        std::vector<Tensor> search(streams.begin(), streams.begin() + n_search);

        std::vector<double> trace;
        double final_loss =
            coordinate_search_block(model, b, result.model.blocks[b], search, ccfg, &trace);

        BlockCalibLog log;
        log.block = b;
        log.initial_loss = trace.empty() ? final_loss : trace.front();
        log.final_loss = final_loss;
        log.passes = ccfg.passes;

        parallel_for(streams.size(), [&](std::size_t i) {
            streams[i] = q_block_forward(result.model, b, streams[i]);
        });

        log.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        result.log.push_back(log);
    }
    return result;
}

} // namespace quantsmooth
