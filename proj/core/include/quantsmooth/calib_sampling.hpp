// Copyright (c) 2026 quantsmooth authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "quantsmooth/tensor.hpp"
#include "quantsmooth/toy_model.hpp"

namespace quantsmooth {

// Per-sample mean/variance of the deep-layer input activations.
struct LayerStatRecord {
    std::size_t sample_id = 0;
    std::vector<double> mean; // m_{i,j}, one per tracked layer
    std::vector<double> var;  // s_{i,j}
};

// Global robust moments behind the noise score.
struct ScoreStats {
    std::vector<double> mu, sigma; // over means
    std::vector<double> nu, tau;   // over variances
    double epsilon = 1e-6;
};

// Cosine of each later frame's flattened features against frame 0.
struct FrameCorrVector {
    std::vector<double> c; // length f-1, entries in [-1, 1]
};

struct ClusterModel {
    std::vector<std::vector<double>> centroids; // K points
    std::vector<std::size_t> assignments;       // one per input vector
    std::vector<double> sse_history;            // per Lloyd iteration
    std::uint64_t seed = 0;

    std::size_t k() const { return centroids.size(); }
};

// Tracked layers = the last ceil(layer_fraction * n_blocks) blocks' input
// activations; statistics pooled over all tokens and channels.
std::vector<LayerStatRecord> collect_layer_stats(const ToyModel& model,
                                                 const std::vector<Scene>& pool,
                                                 double layer_fraction);

ScoreStats score_stats(const std::vector<LayerStatRecord>& records, double epsilon = 1e-6);

// score(x_i) = sqrt(sum_j zm_j^2 + sum_j zs_j^2) with the global z-moments.
// Needs at least two samples.
std::vector<double> noise_scores(const std::vector<LayerStatRecord>& records,
                                 double epsilon = 1e-6);

// Keeps the ceil(T * n) lowest-score sample indices, ties broken by id.
std::vector<std::size_t> filter_pool(const std::vector<double>& scores, double keep_fraction);

FrameCorrVector frame_corr_vector(const Tensor& features, std::size_t s, std::size_t f,
                                  bool include_special = true);

ClusterModel kmeans(const std::vector<std::vector<double>>& vectors, std::size_t k,
                    std::uint64_t seed);

// Proportional within-cluster sampling: quota_k = round(budget * |R_k| /
// total), remainder settled against the largest clusters, uniform without
// replacement inside each cluster. Returns sorted ids (relative to the
// vector order fed to kmeans).
std::vector<std::size_t> diverse_sample(const ClusterModel& cm, std::size_t budget,
                                        std::uint64_t seed);

double entropy(const std::vector<double>& p);

// Grid search over the N-simplex at the given step; returns the maximizer.
std::vector<double> max_entropy_oracle(std::size_t n, double grid_step);

} // namespace quantsmooth
