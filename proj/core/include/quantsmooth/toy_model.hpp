// Copyright (c) 2026 quantsmooth authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "quantsmooth/qlinear.hpp"
#include "quantsmooth/rng.hpp"
#include "quantsmooth/tensor.hpp"

namespace quantsmooth {

// Miniature alternating-attention transformer over multi-frame token
// sequences: per frame, s patch tokens plus 1 camera and 4 register tokens
// (distinct sets for the first and the following frames). Blocks alternate
// frame-local and global self-attention; only the six linear maps per block
// are quantization targets, attention and normalization stay full precision.
struct ToyModelConfig {
    std::size_t d = 64;        // embed dim, power of two
    std::size_t s = 16;        // patch tokens per frame
    std::size_t f = 4;         // frames per scene
    std::size_t n_blocks = 8;
    std::size_t heads = 4;
    double special_token_scale = 20.0;
    std::uint64_t seed = 1;

    std::size_t tokens_per_frame() const { return s + 5; }
    std::size_t tokens_total() const { return tokens_per_frame() * f; }
    void validate() const;
};

// Names of the quantized linear sites inside one block.
enum class LinearSite : int { Q = 0, K = 1, V = 2, O = 3, Fc1 = 4, Fc2 = 5 };
constexpr int kLinearSites = 6;
const char* site_name(LinearSite s);

struct BlockWeights {
    Tensor wq, wk, wv, wo; // d x d
    Tensor w1;             // 2d x d
    Tensor w2;             // d x 2d
    std::vector<double> gain_attn; // per-channel norm gain before attention
    std::vector<double> gain_mlp;  // per-channel norm gain before the MLP
    bool frame_local = false;

    const Tensor& weight(LinearSite s) const;
    Tensor& weight(LinearSite s);
};

struct ToyModel {
    ToyModelConfig cfg;
    std::vector<BlockWeights> blocks;
    Tensor t_first;  // 5 x d special tokens of frame 1
    Tensor t_other;  // 5 x d special tokens of frames 2..f
    std::vector<double> stream_gain; // per-channel multiplier applied at block exit
};

// A candidate multi-frame input. domain_id/is_outlier are generator oracle
// metadata: tests may read them, the sampling pipeline never does.
struct Scene {
    std::vector<Tensor> frames; // f tensors, s x d
    int domain_id = 0;
    bool is_outlier = false;
};

ToyModel build_toy_model(const ToyModelConfig& cfg);

// Frame-major concatenation: each frame's s patch rows followed by its five
// special rows (t_first for frame 1, t_other for the rest).
Tensor register_tokens(const Scene& scene, const Tensor& t_first, const Tensor& t_other);
Tensor register_tokens(const ToyModel& model, const Scene& scene);

struct ForwardResult {
    std::vector<Tensor> block_inputs; // stream at each block entry, n x d
    Tensor final_features;            // A, n x d
};

ForwardResult forward(const ToyModel& model, const Scene& scene);

// Inputs seen by every quantized linear during a forward pass, stacked
// across the given scenes (rows = scenes * tokens). Indexed [block][site].
using SiteActs = std::vector<std::array<Tensor, kLinearSites>>;
SiteActs collect_linear_inputs(const ToyModel& model, const std::vector<Scene>& scenes);

// One full-precision block applied to a stream state (n x d), including the
// trailing per-channel stream gain.
Tensor fp_block_forward(const ToyModel& model, std::size_t block, const Tensor& stream_in);

Scene gen_scene(int domain_id, SeededRng& rng, const ToyModelConfig& cfg,
                bool outlier = false);

std::vector<Scene> gen_pool(std::size_t n_domains, std::size_t per_domain,
                            double outlier_frac, SeededRng& rng, const ToyModelConfig& cfg);

// ---------------------------------------------------------------------------
// Quantized model

struct QuantBlock {
    std::array<QuantLinear, kLinearSites> linears;
};

struct QuantizedModel {
    ToyModel base;              // full-precision skeleton (nonlinear parts)
    int act_bits = 8;           // 16 disables quantization entirely
    int weight_bits = 8;
    SchemeVariant variant = SchemeVariant::Naive;
    bool passthrough = false;   // true when bits == 16
    std::vector<QuantBlock> blocks;
};

struct ModelQuantConfig {
    SchemeVariant variant = SchemeVariant::DSFQ;
    int act_bits = 4;
    int weight_bits = 4;
    QuantMode act_mode = QuantMode::Dynamic;
    Granularity act_granularity = Granularity::PerRow;
    TransformOrder order = TransformOrder::RotateScale;
    double alpha = 0.5;
    std::uint64_t rotation_seed = 0;
};

QuantizedModel quantize_model(const ToyModel& model, const std::vector<Scene>& calib_set,
                              const ModelQuantConfig& qcfg);

// Quantized forward on a registered token stream / scene.
Tensor q_forward(const QuantizedModel& qm, const Scene& scene);
Tensor q_block_forward(const QuantizedModel& qm, std::size_t block, const Tensor& stream_in);

// Split block forward: attention sub-step (returns the stream after the
// attention residual) and MLP sub-step (consumes that stream, returns the
// block output). Lets the calibration search cache the attention half while
// sweeping MLP-side parameters.
Tensor q_block_attn_half(const QuantizedModel& qm, std::size_t block, const Tensor& stream_in);
Tensor q_block_mlp_half(const QuantizedModel& qm, std::size_t block, const Tensor& y1);

// Same sub-steps against an explicit QuantBlock (the calibration search
// mutates a working block without touching the owning model).
Tensor q_block_attn_half_with(const ToyModel& base, const QuantBlock& qb, std::size_t block,
                              const Tensor& stream_in);
Tensor q_block_mlp_half_with(const ToyModel& base, const QuantBlock& qb, std::size_t block,
                             const Tensor& y1);

// Mean over eval scenes of the final-feature MSE between the full-precision
// and quantized models.
double model_quant_loss(const ToyModel& model, const QuantizedModel& qm,
                        const std::vector<Scene>& eval_set);

} // namespace quantsmooth
