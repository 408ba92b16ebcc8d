// Copyright (c) 2026 quantsmooth authors
// SPDX-License-Identifier: Apache-2.0

#include "quantsmooth/toy_model.hpp"

#include <algorithm>
#include <cmath>

#include "quantsmooth/errors.hpp"
#include "quantsmooth/parallel.hpp"

namespace quantsmooth {

namespace {

// Generator shape constants. The synthetic stand-ins for the phenomena the
// quantizer has to survive: a few channels carry correlated large-magnitude
// content (amplified along depth and by the norm gains), a couple of dense
// shared directions give the rotated space residual per-channel variance,
// and a minority of patch tokens carry one strong scene-stable spike at a
// token-specific channel.
constexpr double kDesignatedCorr = 0.99;
constexpr double kNormGainOutlier = 3.0;
constexpr double kNormGainJitter = 0.2;
constexpr double kStreamGain = 1.18;
constexpr double kAttnOutScale = 0.07;
constexpr double kMlpOutScale = 0.25;
constexpr std::size_t kDenseDirCount = 2;
constexpr double kDenseKappa = 8.0;
constexpr double kSpikeFrac = 0.375;
constexpr double kSpikeAmp = 17.0;
constexpr double kOutlierPatchScale = 5.0;
constexpr std::uint64_t kDenseDirSeed = 0x9D1585Eull;
constexpr double kRmsEps = 1e-12;

std::vector<std::size_t> designated_channels(std::size_t d) {
    std::vector<std::size_t> base = {5 * d / 64, 21 * d / 64, 38 * d / 64, 57 * d / 64};
    std::vector<std::size_t> out;
    for (std::size_t c : base) {
        c = std::min(c, d - 1);
        if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
    }
    return out;
}

bool is_designated(std::size_t c, const std::vector<std::size_t>& des) {
    return std::find(des.begin(), des.end(), c) != des.end();
}

// Fixed dense unit directions shared by every pool and model, so channel
// structure transfers from calibration to evaluation data.
Tensor dense_directions(std::size_t d) {
    SeededRng rng(kDenseDirSeed);
    Tensor dirs({kDenseDirCount, d});
    for (std::size_t k = 0; k < kDenseDirCount; ++k) {
        double sq = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            double v = rng.next_gaussian();
            dirs.at(k, j) = v;
            sq += v * v;
        }
        double inv = 1.0 / std::sqrt(sq);
        for (std::size_t j = 0; j < d; ++j) dirs.at(k, j) *= inv;
    }
    return dirs;
}

// Correlated designated-channel draw: one shared factor per row plus a small
// independent part, unit marginal variance.
void fill_designated(Tensor& x, const std::vector<std::size_t>& des, SeededRng& rng) {
    const double resid = std::sqrt(1.0 - kDesignatedCorr * kDesignatedCorr);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double z = rng.next_gaussian();
        for (std::size_t c : des)
            x.at(i, c) = kDesignatedCorr * z + resid * rng.next_gaussian();
    }
}

Tensor base_frame(SeededRng& rng, const ToyModelConfig& cfg,
                  const std::vector<std::size_t>& des, const Tensor& dirs) {
    Tensor x = gen_gaussian(rng, {cfg.s, cfg.d});
    fill_designated(x, des, rng);
    for (std::size_t i = 0; i < cfg.s; ++i) {
        for (std::size_t k = 0; k < kDenseDirCount; ++k) {
            double a = kDenseKappa * rng.next_gaussian();
            for (std::size_t j = 0; j < cfg.d; ++j) x.at(i, j) += a * dirs.at(k, j);
        }
    }
    return x;
}

double gelu(double x) {
    return 0.5 * x * (1.0 + std::tanh(0.7978845608028654 * (x + 0.044715 * x * x * x)));
}

// Per-row RMS normalization followed by the per-channel gain vector.
Tensor rmsnorm_gain(const Tensor& x, const std::vector<double>& gain) {
    Tensor y = x;
    const std::size_t n = y.rows(), d = y.cols();
    for (std::size_t i = 0; i < n; ++i) {
        double* row = y.row_ptr(i);
        double sq = 0.0;
        for (std::size_t j = 0; j < d; ++j) sq += row[j] * row[j];
        double inv = 1.0 / std::sqrt(sq / static_cast<double>(d) + kRmsEps);
        for (std::size_t j = 0; j < d; ++j) row[j] *= inv * gain[j];
    }
    return y;
}

// Multi-head softmax attention; frame_local restricts keys to the query's
// frame (block-diagonal mask).
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, bool frame_local,
                 const ToyModelConfig& cfg) {
    const std::size_t n = q.rows(), d = q.cols();
    const std::size_t hd = d / cfg.heads;
    const std::size_t fs = cfg.tokens_per_frame();
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
    Tensor out({n, d});
    std::vector<double> logits;

    auto attend_range = [&](std::size_t r0, std::size_t r1, std::size_t head) {
        const std::size_t cnt = r1 - r0;
        const std::size_t c0 = head * hd;
        logits.assign(cnt, 0.0);
        for (std::size_t i = r0; i < r1; ++i) {
            double mx = -1e300;
            for (std::size_t j = 0; j < cnt; ++j) {
                double acc = 0.0;
                for (std::size_t t = 0; t < hd; ++t)
                    acc += q.at(i, c0 + t) * k.at(r0 + j, c0 + t);
                logits[j] = acc * inv_sqrt;
                mx = std::max(mx, logits[j]);
            }
            double denom = 0.0;
            for (std::size_t j = 0; j < cnt; ++j) {
                logits[j] = std::exp(logits[j] - mx);
                denom += logits[j];
            }
            double inv_denom = 1.0 / denom;
            for (std::size_t t = 0; t < hd; ++t) {
                double acc = 0.0;
                for (std::size_t j = 0; j < cnt; ++j)
                    acc += logits[j] * v.at(r0 + j, c0 + t);
                out.at(i, c0 + t) = acc * inv_denom;
            }
        }
    };

    for (std::size_t head = 0; head < cfg.heads; ++head) {
        if (frame_local) {
            for (std::size_t fi = 0; fi < cfg.f; ++fi)
                attend_range(fi * fs, (fi + 1) * fs, head);
        } else {
            attend_range(0, n, head);
        }
    }
    return out;
}

void apply_stream_gain(Tensor& stream, const std::vector<double>& gain) {
    for (std::size_t i = 0; i < stream.rows(); ++i) {
        double* row = stream.row_ptr(i);
        for (std::size_t j = 0; j < stream.cols(); ++j) row[j] *= gain[j];
    }
}

void add_inplace(Tensor& a, const Tensor& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

Tensor gelu_of(const Tensor& u) {
    Tensor g = u;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = gelu(g[i]);
    return g;
}

const double kProfiles[4][3] = {
    {0.95, 0.90, 0.85},
    {0.65, 0.45, 0.25},
    {0.25, 0.15, 0.05},
    {0.05, 0.75, 0.15},
};

} // namespace

void ToyModelConfig::validate() const {
    if (!is_power_of_two(d)) throw DimError("ToyModelConfig: d must be a power of two");
    if (heads == 0 || d % heads != 0) throw DimError("ToyModelConfig: heads must divide d");
    if (s == 0 || f < 2 || n_blocks < 2) throw DimError("ToyModelConfig: s >= 1, f >= 2, n_blocks >= 2");
    if (special_token_scale < 0) throw NumericError("ToyModelConfig: negative token scale");
}

const char* site_name(LinearSite s) {
    switch (s) {
        case LinearSite::Q: return "q";
        case LinearSite::K: return "k";
        case LinearSite::V: return "v";
        case LinearSite::O: return "o";
        case LinearSite::Fc1: return "fc1";
        case LinearSite::Fc2: return "fc2";
    }
    return "?";
}

const Tensor& BlockWeights::weight(LinearSite s) const {
    switch (s) {
        case LinearSite::Q: return wq;
        case LinearSite::K: return wk;
        case LinearSite::V: return wv;
        case LinearSite::O: return wo;
        case LinearSite::Fc1: return w1;
        case LinearSite::Fc2: return w2;
    }
    return wq;
}

Tensor& BlockWeights::weight(LinearSite s) {
    return const_cast<Tensor&>(static_cast<const BlockWeights*>(this)->weight(s));
}

ToyModel build_toy_model(const ToyModelConfig& cfg) {
    cfg.validate();
    ToyModel m;
    m.cfg = cfg;
    const std::size_t d = cfg.d;
    const auto des = designated_channels(d);
    SeededRng root(cfg.seed);

    auto draw_matrix = [](SeededRng rng, std::size_t rows, std::size_t cols, double sigma) {
        Tensor w({rows, cols});
        const double scale = sigma / std::sqrt(static_cast<double>(cols));
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = scale * rng.next_gaussian();
        return w;
    };
    auto draw_gain = [&](SeededRng rng) {
        std::vector<double> g(d);
        for (std::size_t j = 0; j < d; ++j) g[j] = std::fabs(1.0 + kNormGainJitter * rng.next_gaussian());
        for (std::size_t c : des) g[c] = kNormGainOutlier;
        return g;
    };

    for (std::size_t b = 0; b < cfg.n_blocks; ++b) {
        SeededRng brng = root.fork(b);
        BlockWeights bw;
        bw.wq = draw_matrix(brng.fork(0), d, d, 1.0);
        bw.wk = draw_matrix(brng.fork(1), d, d, 1.0);
        bw.wv = draw_matrix(brng.fork(2), d, d, 1.0);
        bw.wo = draw_matrix(brng.fork(3), d, d, kAttnOutScale);
        bw.w1 = draw_matrix(brng.fork(4), 2 * d, d, 1.0);
        bw.w2 = draw_matrix(brng.fork(5), d, 2 * d, kMlpOutScale);
        bw.gain_attn = draw_gain(brng.fork(6));
        bw.gain_mlp = draw_gain(brng.fork(7));
        bw.frame_local = (b % 2 == 0);
        m.blocks.push_back(std::move(bw));
    }

    auto draw_special = [&](SeededRng rng) {
        Tensor t = gen_gaussian(rng, {std::size_t(5), d});
        fill_designated(t, des, rng);
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t c : des) t.at(i, c) *= cfg.special_token_scale;
        return t;
    };
    m.t_first = draw_special(root.fork(1000));
    m.t_other = draw_special(root.fork(1001));

    m.stream_gain.assign(d, 1.0);
    for (std::size_t c : des) m.stream_gain[c] = kStreamGain;
    return m;
}

Tensor register_tokens(const Scene& scene, const Tensor& t_first, const Tensor& t_other) {
    if (scene.frames.empty()) throw DimError("register_tokens: empty scene");
    const std::size_t s = scene.frames[0].rows();
    const std::size_t d = scene.frames[0].cols();
    if (t_first.rows() != 5 || t_other.rows() != 5 || t_first.cols() != d || t_other.cols() != d)
        throw DimError("register_tokens: special token shape mismatch");
    const std::size_t f = scene.frames.size();
    Tensor out({(s + 5) * f, d});
    for (std::size_t fi = 0; fi < f; ++fi) {
        const Tensor& fr = scene.frames[fi];
        if (fr.rows() != s || fr.cols() != d)
            throw DimError("register_tokens: inconsistent frame shape");
        const Tensor& special = (fi == 0) ? t_first : t_other;
        const std::size_t r0 = fi * (s + 5);
        for (std::size_t i = 0; i < s; ++i)
            for (std::size_t j = 0; j < d; ++j) out.at(r0 + i, j) = fr.at(i, j);
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t j = 0; j < d; ++j) out.at(r0 + s + i, j) = special.at(i, j);
    }
    return out;
}

Tensor register_tokens(const ToyModel& model, const Scene& scene) {
    return register_tokens(scene, model.t_first, model.t_other);
}

Tensor fp_block_forward(const ToyModel& model, std::size_t block, const Tensor& stream_in) {
    const BlockWeights& bw = model.blocks[block];
    Tensor stream = stream_in;
    Tensor h = rmsnorm_gain(stream, bw.gain_attn);
    Tensor q = matmul(h, bw.wq);
    Tensor k = matmul(h, bw.wk);
    Tensor v = matmul(h, bw.wv);
    Tensor attn = attention(q, k, v, bw.frame_local, model.cfg);
    add_inplace(stream, matmul(attn, bw.wo));
    Tensor h2 = rmsnorm_gain(stream, bw.gain_mlp);
    Tensor u = gelu_of(matmul(h2, bw.w1));
    add_inplace(stream, matmul(u, bw.w2));
    apply_stream_gain(stream, model.stream_gain);
    if (!stream.all_finite()) throw NumericError("fp_block_forward: diverged");
    return stream;
}

ForwardResult forward(const ToyModel& model, const Scene& scene) {
    ForwardResult r;
    Tensor stream = register_tokens(model, scene);
    for (std::size_t b = 0; b < model.cfg.n_blocks; ++b) {
        r.block_inputs.push_back(stream);
        stream = fp_block_forward(model, b, stream);
    }
    r.final_features = std::move(stream);
    return r;
}

SiteActs collect_linear_inputs(const ToyModel& model, const std::vector<Scene>& scenes) {
    const ToyModelConfig& cfg = model.cfg;
    const std::size_t n = cfg.tokens_total(), d = cfg.d;
    SiteActs acts(cfg.n_blocks);
    for (std::size_t b = 0; b < cfg.n_blocks; ++b) {
        for (int s = 0; s < kLinearSites; ++s) {
            std::size_t width = (s == int(LinearSite::Fc2)) ? 2 * d : d;
            acts[b][s] = Tensor({scenes.size() * n, width});
        }
    }
    for (std::size_t si = 0; si < scenes.size(); ++si) {
        Tensor stream = register_tokens(model, scenes[si]);
        for (std::size_t b = 0; b < cfg.n_blocks; ++b) {
            const BlockWeights& bw = model.blocks[b];
            Tensor h = rmsnorm_gain(stream, bw.gain_attn);
            Tensor q = matmul(h, bw.wq);
            Tensor k = matmul(h, bw.wk);
            Tensor v = matmul(h, bw.wv);
            Tensor attn = attention(q, k, v, bw.frame_local, cfg);
            Tensor h2;
            {
                add_inplace(stream, matmul(attn, bw.wo));
                h2 = rmsnorm_gain(stream, bw.gain_mlp);
            }
            Tensor u = gelu_of(matmul(h2, bw.w1));
            add_inplace(stream, matmul(u, bw.w2));
            apply_stream_gain(stream, model.stream_gain);

            auto copy_rows = [&](int site, const Tensor& src) {
                Tensor& dst = acts[b][site];
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < src.cols(); ++j)
                        dst.at(si * n + i, j) = src.at(i, j);
            };
            copy_rows(int(LinearSite::Q), h);
            copy_rows(int(LinearSite::K), h);
            copy_rows(int(LinearSite::V), h);
            copy_rows(int(LinearSite::O), attn);
            copy_rows(int(LinearSite::Fc1), h2);
            copy_rows(int(LinearSite::Fc2), u);
        }
    }
    return acts;
}

Scene gen_scene(int domain_id, SeededRng& rng, const ToyModelConfig& cfg, bool outlier) {
    cfg.validate();
    const auto des = designated_channels(cfg.d);
    const Tensor dirs = dense_directions(cfg.d);

    Scene sc;
    sc.domain_id = domain_id;
    sc.is_outlier = outlier;

    Tensor lat = base_frame(rng, cfg, des, dirs);

    // Scene-stable bright features: a fixed minority of patch tokens carry
    // one strong spike at a token-specific non-designated channel, repeated
    // identically in every frame.
    const std::size_t n_spikes =
        static_cast<std::size_t>(std::llround(kSpikeFrac * static_cast<double>(cfg.s)));
    Tensor spikes({cfg.s, cfg.d});
    {
        std::vector<std::size_t> rows(cfg.s);
        for (std::size_t i = 0; i < cfg.s; ++i) rows[i] = i;
        for (std::size_t i = 0; i + 1 < cfg.s && i < n_spikes; ++i) {
            std::size_t j = i + rng.next_below(cfg.s - i);
            std::swap(rows[i], rows[j]);
        }
        for (std::size_t i = 0; i < n_spikes && i < cfg.s; ++i) {
            std::size_t ch;
            do {
                ch = rng.next_below(cfg.d);
            } while (is_designated(ch, des));
            spikes.at(rows[i], ch) = rng.next_sign() * kSpikeAmp;
        }
    }

    const double* prof = kProfiles[((domain_id % 4) + 4) % 4];
    for (std::size_t t = 0; t < cfg.f; ++t) {
        Tensor frame({cfg.s, cfg.d});
        if (t == 0) {
            frame = lat;
        } else {
            double rho = prof[std::min<std::size_t>(t - 1, 2)];
            Tensor noise = base_frame(rng, cfg, des, dirs);
            double resid = std::sqrt(1.0 - rho * rho);
            for (std::size_t i = 0; i < frame.size(); ++i)
                frame[i] = rho * lat[i] + resid * noise[i];
        }
        add_inplace(frame, spikes);
        if (outlier)
            for (std::size_t i = 0; i < frame.size(); ++i) frame[i] *= kOutlierPatchScale;
        sc.frames.push_back(std::move(frame));
    }
    return sc;
}

std::vector<Scene> gen_pool(std::size_t n_domains, std::size_t per_domain, double outlier_frac,
                            SeededRng& rng, const ToyModelConfig& cfg) {
    if (outlier_frac < 0.0 || outlier_frac > 0.2)
        throw NumericError("gen_pool: outlier_frac must be in [0, 0.2]");
    const std::size_t total = n_domains * per_domain;
    const std::size_t n_out =
        static_cast<std::size_t>(std::ceil(outlier_frac * static_cast<double>(total)));

    std::vector<std::size_t> idx(total);
    for (std::size_t i = 0; i < total; ++i) idx[i] = i;
    SeededRng pick = rng.fork(0xA11);
    for (std::size_t i = 0; i + 1 < total && i < n_out; ++i) {
        std::size_t j = i + pick.next_below(total - i);
        std::swap(idx[i], idx[j]);
    }
    std::vector<bool> is_out(total, false);
    for (std::size_t i = 0; i < n_out; ++i) is_out[idx[i]] = true;

    std::vector<Scene> pool;
    pool.reserve(total);
    for (std::size_t i = 0; i < total; ++i) {
        SeededRng srng = rng.fork(i + 1);
        int dom = static_cast<int>(i / per_domain);
        pool.push_back(gen_scene(dom, srng, cfg, is_out[i]));
    }
    return pool;
}

// ---------------------------------------------------------------------------

QuantizedModel quantize_model(const ToyModel& model, const std::vector<Scene>& calib_set,
                              const ModelQuantConfig& qcfg) {
    if (calib_set.empty()) throw DimError("quantize_model: empty calibration set");
    QuantizedModel qm;
    qm.base = model;
    qm.act_bits = qcfg.act_bits;
    qm.weight_bits = qcfg.weight_bits;
    qm.variant = qcfg.variant;
    if (qcfg.act_bits == 16 || qcfg.weight_bits == 16) {
        qm.passthrough = true;
        return qm;
    }

    SiteActs acts = collect_linear_inputs(model, calib_set);
    SeededRng seed_root(qcfg.rotation_seed);
    qm.blocks.resize(model.cfg.n_blocks);
    for (std::size_t b = 0; b < model.cfg.n_blocks; ++b) {
        for (int s = 0; s < kLinearSites; ++s) {
            QuantScheme scheme = QuantScheme::make(qcfg.variant, qcfg.act_bits, qcfg.weight_bits,
                                                   seed_root.fork(b * kLinearSites + s).state());
            scheme.act_spec.mode = qcfg.act_mode;
            scheme.act_spec.granularity = qcfg.act_granularity;
            scheme.order = qcfg.order;
            scheme.alpha = qcfg.alpha;
            qm.blocks[b].linears[s] =
                build_quant_linear(model.blocks[b].weight(LinearSite(s)), acts[b][s], scheme);
        }
    }
    return qm;
}

Tensor q_block_attn_half_with(const ToyModel& base, const QuantBlock& qb, std::size_t block,
                              const Tensor& stream_in) {
    const BlockWeights& bw = base.blocks[block];
    Tensor stream = stream_in;
    Tensor h = rmsnorm_gain(stream, bw.gain_attn);
    Tensor q = forward_quantized(qb.linears[int(LinearSite::Q)], h);
    Tensor k = forward_quantized(qb.linears[int(LinearSite::K)], h);
    Tensor v = forward_quantized(qb.linears[int(LinearSite::V)], h);
    Tensor attn = attention(q, k, v, bw.frame_local, base.cfg);
    add_inplace(stream, forward_quantized(qb.linears[int(LinearSite::O)], attn));
    return stream;
}

Tensor q_block_mlp_half_with(const ToyModel& base, const QuantBlock& qb, std::size_t block,
                             const Tensor& y1) {
    const BlockWeights& bw = base.blocks[block];
    Tensor stream = y1;
    Tensor h2 = rmsnorm_gain(stream, bw.gain_mlp);
    Tensor u = gelu_of(forward_quantized(qb.linears[int(LinearSite::Fc1)], h2));
    add_inplace(stream, forward_quantized(qb.linears[int(LinearSite::Fc2)], u));
    apply_stream_gain(stream, base.stream_gain);
    if (!stream.all_finite()) throw NumericError("q_block_forward: diverged");
    return stream;
}

Tensor q_block_attn_half(const QuantizedModel& qm, std::size_t block, const Tensor& stream_in) {
    return q_block_attn_half_with(qm.base, qm.blocks[block], block, stream_in);
}

Tensor q_block_mlp_half(const QuantizedModel& qm, std::size_t block, const Tensor& y1) {
    return q_block_mlp_half_with(qm.base, qm.blocks[block], block, y1);
}

Tensor q_block_forward(const QuantizedModel& qm, std::size_t block, const Tensor& stream_in) {
    return q_block_mlp_half(qm, block, q_block_attn_half(qm, block, stream_in));
}

Tensor q_forward(const QuantizedModel& qm, const Scene& scene) {
    if (qm.passthrough) return forward(qm.base, scene).final_features;
    Tensor stream = register_tokens(qm.base, scene);
    for (std::size_t b = 0; b < qm.base.cfg.n_blocks; ++b)
        stream = q_block_forward(qm, b, stream);
    return stream;
}

double model_quant_loss(const ToyModel& model, const QuantizedModel& qm,
                        const std::vector<Scene>& eval_set) {
    if (eval_set.empty()) throw DimError("model_quant_loss: empty eval set");
    std::vector<double> per_scene(eval_set.size());
    parallel_for(eval_set.size(), [&](std::size_t i) {
        Tensor ref = forward(model, eval_set[i]).final_features;
        Tensor got = q_forward(qm, eval_set[i]);
        double acc = 0.0;
        for (std::size_t k = 0; k < ref.size(); ++k) {
            double d = ref[k] - got[k];
            acc += d * d;
        }
        per_scene[i] = acc / static_cast<double>(ref.size());
    });
    double total = 0.0;
    for (double v : per_scene) total += v;
    return total / static_cast<double>(eval_set.size());
}

} // namespace quantsmooth
