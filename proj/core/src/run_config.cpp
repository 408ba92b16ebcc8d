// Copyright (c) 2026 quantsmooth authors
// SPDX-License-Identifier: Apache-2.0

#include "quantsmooth/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "quantsmooth/errors.hpp"

namespace quantsmooth {

using nlohmann::json;

void RunConfig::validate() const {
    model.validate();
    if (n_domains == 0 || per_domain == 0) throw UsageError("config: empty pool");
    if (outlier_frac < 0.0 || outlier_frac > 0.2)
        throw UsageError("config: outlier_frac must be in [0, 0.2]");
    if (!(keep_fraction > 0.0) || keep_fraction > 1.0)
        throw UsageError("config: keep_fraction must be in (0, 1]");
    if (clusters == 0 || budget == 0) throw UsageError("config: clusters/budget must be positive");
    if (!(layer_fraction > 0.0) || layer_fraction > 1.0)
        throw UsageError("config: layer_fraction must be in (0, 1]");
    if (bits != "w4a4" && bits != "w6a6" && bits != "w8a8" && bits != "w16a16")
        throw UsageError("config: bits must be one of w4a4|w6a6|w8a8|w16a16");
    scheme_from_name(scheme);
    if (act_mode != "dynamic" && act_mode != "static")
        throw UsageError("config: act_mode must be dynamic|static");
    if (act_granularity != "token" && act_granularity != "tensor")
        throw UsageError("config: act_granularity must be token|tensor");
    if (order != "rot-scale" && order != "scale-rot")
        throw UsageError("config: order must be rot-scale|scale-rot");
    if (alpha < 0.0 || alpha > 1.0) throw UsageError("config: alpha must be in [0, 1]");
    if (passes < 1) throw UsageError("config: passes >= 1");
    if (search_samples == 0) throw UsageError("config: search_samples >= 1");
    if (seeds.empty()) throw UsageError("config: seeds list empty");
    if (eval_scenes == 0) throw UsageError("config: eval_scenes >= 1");
    for (const auto& a : ablations)
        if (a != "scheme" && a != "sampling" && a != "granularity" && a != "order")
            throw UsageError("config: unknown ablation arm set: " + a);
}

int RunConfig::act_bits() const {
    if (bits == "w4a4") return 4;
    if (bits == "w6a6") return 6;
    if (bits == "w8a8") return 8;
    return 16;
}

int RunConfig::weight_bits() const { return act_bits(); }

ModelQuantConfig RunConfig::quant_config(std::uint64_t rotation_seed) const {
    ModelQuantConfig q;
    q.variant = scheme_from_name(scheme);
    q.act_bits = act_bits();
    q.weight_bits = weight_bits();
    q.act_mode = (act_mode == "dynamic") ? QuantMode::Dynamic : QuantMode::Static;
    q.act_granularity =
        (act_granularity == "token") ? Granularity::PerRow : Granularity::PerTensor;
    q.order = (order == "rot-scale") ? TransformOrder::RotateScale : TransformOrder::ScaleRotate;
    q.alpha = alpha;
    q.rotation_seed = rotation_seed;
    return q;
}

CalibConfig RunConfig::calib_config() const {
    CalibConfig c;
    c.passes = passes;
    c.max_search_samples = search_samples;
    return c;
}

namespace {

json to_json(const RunConfig& c) {
    json j;
    j["model"] = {{"d", c.model.d},
                  {"s", c.model.s},
                  {"f", c.model.f},
                  {"n_blocks", c.model.n_blocks},
                  {"heads", c.model.heads},
                  {"special_token_scale", c.model.special_token_scale},
                  {"seed", c.model.seed}};
    j["n_domains"] = c.n_domains;
    j["per_domain"] = c.per_domain;
    j["outlier_frac"] = c.outlier_frac;
    j["seed"] = c.seed;
    j["keep_fraction"] = c.keep_fraction;
    j["keep_lowest"] = c.keep_lowest;
    j["clusters"] = c.clusters;
    j["budget"] = c.budget;
    j["layer_fraction"] = c.layer_fraction;
    j["include_special"] = c.include_special;
    j["bits"] = c.bits;
    j["scheme"] = c.scheme;
    j["act_mode"] = c.act_mode;
    j["act_granularity"] = c.act_granularity;
    j["order"] = c.order;
    j["alpha"] = c.alpha;
    j["passes"] = c.passes;
    j["search_samples"] = c.search_samples;
    j["seeds"] = c.seeds;
    j["eval_scenes"] = c.eval_scenes;
    j["eval_seed"] = c.eval_seed;
    j["ablations"] = c.ablations;
    return j;
}

const std::set<std::string> kTopKeys = {
    "model",        "n_domains",  "per_domain",      "outlier_frac", "seed",
    "keep_fraction", "keep_lowest", "clusters",      "budget",       "layer_fraction",
    "include_special", "bits",    "scheme",          "act_mode",     "act_granularity",
    "order",        "alpha",      "passes",          "search_samples", "seeds",
    "eval_scenes",  "eval_seed",  "ablations"};

const std::set<std::string> kModelKeys = {"d",     "s",                  "f",   "n_blocks",
                                          "heads", "special_token_scale", "seed"};

} // namespace

std::string RunConfig::to_json_string() const { return to_json(*this).dump(2); }

RunConfig RunConfig::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw UsageError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw UsageError("config: document must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!kTopKeys.count(it.key())) throw UsageError("config: unknown key: " + it.key());

    RunConfig c;
    if (j.contains("model")) {
        const json& m = j["model"];
        for (auto it = m.begin(); it != m.end(); ++it)
            if (!kModelKeys.count(it.key()))
                throw UsageError("config: unknown model key: " + it.key());
        c.model.d = m.value("d", c.model.d);
        c.model.s = m.value("s", c.model.s);
        c.model.f = m.value("f", c.model.f);
        c.model.n_blocks = m.value("n_blocks", c.model.n_blocks);
        c.model.heads = m.value("heads", c.model.heads);
        c.model.special_token_scale = m.value("special_token_scale", c.model.special_token_scale);
        c.model.seed = m.value("seed", c.model.seed);
    }
    c.n_domains = j.value("n_domains", c.n_domains);
    c.per_domain = j.value("per_domain", c.per_domain);
    c.outlier_frac = j.value("outlier_frac", c.outlier_frac);
    c.seed = j.value("seed", c.seed);
    c.keep_fraction = j.value("keep_fraction", c.keep_fraction);
    c.keep_lowest = j.value("keep_lowest", c.keep_lowest);
    c.clusters = j.value("clusters", c.clusters);
    c.budget = j.value("budget", c.budget);
    c.layer_fraction = j.value("layer_fraction", c.layer_fraction);
    c.include_special = j.value("include_special", c.include_special);
    c.bits = j.value("bits", c.bits);
    c.scheme = j.value("scheme", c.scheme);
    c.act_mode = j.value("act_mode", c.act_mode);
    c.act_granularity = j.value("act_granularity", c.act_granularity);
    c.order = j.value("order", c.order);
    c.alpha = j.value("alpha", c.alpha);
    c.passes = j.value("passes", c.passes);
    c.search_samples = j.value("search_samples", c.search_samples);
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    c.eval_scenes = j.value("eval_scenes", c.eval_scenes);
    c.eval_seed = j.value("eval_seed", c.eval_seed);
    if (j.contains("ablations")) c.ablations = j["ablations"].get<std::vector<std::string>>();
    c.validate();
    return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_json_string(ss.str());
}

std::string RunConfig::hash() const {
    std::string s = to_json_string();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

} // namespace quantsmooth
