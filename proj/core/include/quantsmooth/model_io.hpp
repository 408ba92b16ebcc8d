// Copyright (c) 2026 quantsmooth authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "quantsmooth/toy_model.hpp"

namespace quantsmooth {

// Pool directory layout: scene_%04d.qtsr (rank-3 f x s x d tensors),
// manifest.json with scene geometry, oracle.json with the generator
// metadata kept apart from what the sampling pipeline reads.
void save_pool(const std::string& dir, const std::vector<Scene>& pool);
std::vector<Scene> load_pool(const std::string& dir);

struct PoolOracleEntry {
    std::size_t scene_id = 0;
    int domain_id = 0;
    bool is_outlier = false;
};
std::vector<PoolOracleEntry> load_pool_oracle(const std::string& dir);

// Quantized-model directory: per-layer records (scheme tag, rotation signs,
// c_hat, QQTS weight block, static activation ranges) in layers.qsl plus a
// JSON manifest carrying bits/scheme and the toy-model config needed to
// rebuild the full-precision skeleton.
void save_quantized_model(const std::string& dir, const QuantizedModel& qm);
QuantizedModel load_quantized_model(const std::string& dir);

} // namespace quantsmooth
