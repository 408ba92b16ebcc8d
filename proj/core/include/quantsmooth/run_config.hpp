// Copyright (c) 2026 quantsmooth authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "quantsmooth/calib_optimizer.hpp"
#include "quantsmooth/toy_model.hpp"

namespace quantsmooth {

inline constexpr const char* kToolVersion = "0.1.0";

// One JSON document holding every knob of the pipeline. Unknown keys are
// rejected; every run emits the fully resolved document plus its hash next
// to the outputs.
struct RunConfig {
    ToyModelConfig model;

    // pool
    std::size_t n_domains = 4;
    std::size_t per_domain = 100;
    double outlier_frac = 0.05;
    std::uint64_t seed = 7;

    // sampling
    double keep_fraction = 0.2;  // T
    bool keep_lowest = true;     // false flips to the drop-lowest reading
    std::size_t clusters = 8;    // K
    std::size_t budget = 40;
    double layer_fraction = 0.5;
    bool include_special = true; // special rows inside Eq.-12 frame vectors

    // quantization
    std::string bits = "w4a4";   // w4a4 | w6a6 | w8a8 | w16a16
    std::string scheme = "dsfq"; // naive | rotation | scale | dsfq
    std::string act_mode = "dynamic";       // dynamic | static
    std::string act_granularity = "token";  // token | tensor
    std::string order = "rot-scale";        // rot-scale | scale-rot
    double alpha = 0.5;

    // calibration
    int passes = 3;
    std::size_t search_samples = 8;

    // harness
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::size_t eval_scenes = 24;
    std::uint64_t eval_seed = 99991;
    std::vector<std::string> ablations = {"scheme", "sampling"};

    void validate() const;
    int act_bits() const;
    int weight_bits() const;
    ModelQuantConfig quant_config(std::uint64_t rotation_seed) const;
    CalibConfig calib_config() const;

    std::string to_json_string() const;           // canonical resolved form
    static RunConfig from_json_string(const std::string& text);
    static RunConfig from_file(const std::string& path);

    // FNV-1a over the canonical serialization.
    std::string hash() const;
};

} // namespace quantsmooth
