// Copyright (c) 2026 quantsmooth authors
// SPDX-License-Identifier: Apache-2.0

#include "quantsmooth/calib_sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "quantsmooth/errors.hpp"
#include "quantsmooth/parallel.hpp"

namespace quantsmooth {

std::vector<LayerStatRecord> collect_layer_stats(const ToyModel& model,
                                                 const std::vector<Scene>& pool,
                                                 double layer_fraction) {
    if (pool.empty()) throw DimError("collect_layer_stats: empty pool");
    if (!(layer_fraction > 0.0) || layer_fraction > 1.0)
        throw NumericError("collect_layer_stats: layer_fraction must be in (0, 1]");
    const std::size_t nb = model.cfg.n_blocks;
    const std::size_t n_layers =
        static_cast<std::size_t>(std::ceil(layer_fraction * static_cast<double>(nb)));
    const std::size_t first = nb - n_layers;

    std::vector<LayerStatRecord> records(pool.size());
    parallel_for(pool.size(), [&](std::size_t i) {
        ForwardResult r = forward(model, pool[i]);
        LayerStatRecord rec;
        rec.sample_id = i;
        for (std::size_t b = first; b < nb; ++b) {
            rec.mean.push_back(mean_of(r.block_inputs[b]));
            rec.var.push_back(population_var(r.block_inputs[b]));
        }
        records[i] = std::move(rec);
    });
    return records;
}

ScoreStats score_stats(const std::vector<LayerStatRecord>& records, double epsilon) {
    if (records.size() < 2) throw DimError("noise_scores: need at least two samples");
    const std::size_t L = records[0].mean.size();
    for (const auto& r : records)
        if (r.mean.size() != L || r.var.size() != L)
            throw DimError("noise_scores: inconsistent layer counts");

    ScoreStats st;
    st.epsilon = epsilon;
    st.mu.assign(L, 0.0);
    st.sigma.assign(L, 0.0);
    st.nu.assign(L, 0.0);
    st.tau.assign(L, 0.0);
    const double inv = 1.0 / static_cast<double>(records.size());
    for (const auto& r : records)
        for (std::size_t j = 0; j < L; ++j) {
            st.mu[j] += r.mean[j] * inv;
            st.nu[j] += r.var[j] * inv;
        }
    for (const auto& r : records)
        for (std::size_t j = 0; j < L; ++j) {
            double dm = r.mean[j] - st.mu[j];
            double dv = r.var[j] - st.nu[j];
            st.sigma[j] += dm * dm * inv;
            st.tau[j] += dv * dv * inv;
        }
    for (std::size_t j = 0; j < L; ++j) {
        st.sigma[j] = std::sqrt(st.sigma[j] + epsilon);
        st.tau[j] = std::sqrt(st.tau[j] + epsilon);
    }
    return st;
}

std::vector<double> noise_scores(const std::vector<LayerStatRecord>& records, double epsilon) {
    ScoreStats st = score_stats(records, epsilon);
    const std::size_t L = st.mu.size();
    std::vector<double> scores(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < L; ++j) {
            double zm = (records[i].mean[j] - st.mu[j]) / st.sigma[j];
            double zs = (records[i].var[j] - st.nu[j]) / st.tau[j];
            acc += zm * zm + zs * zs;
        }
        scores[i] = std::sqrt(acc);
    }
    return scores;
}

std::vector<std::size_t> filter_pool(const std::vector<double>& scores, double keep_fraction) {
    if (!(keep_fraction > 0.0) || keep_fraction > 1.0)
        throw NumericError("filter_pool: keep fraction must be in (0, 1]");
    const std::size_t n = scores.size();
    if (n == 0) throw DimError("filter_pool: empty pool");
    const std::size_t keep =
        static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(n)));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t(0));
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] < scores[b];
        return a < b;
    });
    idx.resize(std::min(keep, n));
    std::sort(idx.begin(), idx.end());
    return idx;
}

FrameCorrVector frame_corr_vector(const Tensor& features, std::size_t s, std::size_t f,
                                  bool include_special) {
    if (features.rank() != 2) throw DimError("frame_corr_vector: rank-2 features required");
    const std::size_t fs = s + 5;
    if (features.rows() != fs * f)
        throw DimError("frame_corr_vector: row count != (s+5)*f");
    const std::size_t d = features.cols();
    const std::size_t rows_used = include_special ? fs : s;

    auto frame_dot = [&](std::size_t fa, std::size_t fb) {
        double acc = 0.0;
        for (std::size_t i = 0; i < rows_used; ++i) {
            const double* ra = features.row_ptr(fa * fs + i);
            const double* rb = features.row_ptr(fb * fs + i);
            for (std::size_t j = 0; j < d; ++j) acc += ra[j] * rb[j];
        }
        return acc;
    };

    const double n0 = std::sqrt(frame_dot(0, 0));
    if (!(n0 > 0.0)) throw NumericError("frame_corr_vector: zero-norm reference frame");
    FrameCorrVector out;
    for (std::size_t t = 1; t < f; ++t) {
        double nt = std::sqrt(frame_dot(t, t));
        if (!(nt > 0.0)) throw NumericError("frame_corr_vector: zero-norm frame");
        out.c.push_back(frame_dot(0, t) / (n0 * nt));
    }
    return out;
}

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

} // namespace

ClusterModel kmeans(const std::vector<std::vector<double>>& vectors, std::size_t k,
                    std::uint64_t seed) {
    const std::size_t n = vectors.size();
    if (k == 0 || n < k) throw DimError("kmeans: need at least k vectors");
    const std::size_t dim = vectors[0].size();
    for (const auto& v : vectors)
        if (v.size() != dim) throw DimError("kmeans: inconsistent vector sizes");

    SeededRng rng(seed);
    ClusterModel cm;
    cm.seed = seed;

    // k-means++ seeding.
    cm.centroids.push_back(vectors[rng.next_below(n)]);
    std::vector<double> d2(n);
    while (cm.centroids.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = sq_dist(vectors[i], cm.centroids[0]);
            for (std::size_t c = 1; c < cm.centroids.size(); ++c)
                best = std::min(best, sq_dist(vectors[i], cm.centroids[c]));
            d2[i] = best;
            total += best;
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double r = rng.next_double() * total, run = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                run += d2[i];
                if (run >= r) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = rng.next_below(n);
        }
        cm.centroids.push_back(vectors[pick]);
    }

    cm.assignments.assign(n, 0);
    for (int iter = 0; iter < 100; ++iter) {
        // Assign.
        double sse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double bd = sq_dist(vectors[i], cm.centroids[0]);
            for (std::size_t c = 1; c < k; ++c) {
                double d = sq_dist(vectors[i], cm.centroids[c]);
                if (d < bd) {
                    bd = d;
                    best = c;
                }
            }
            cm.assignments[i] = best;
            sse += bd;
        }
        cm.sse_history.push_back(sse);

        // Update; empty clusters reseed to the farthest point.
        std::vector<std::vector<double>> next(k, std::vector<double>(dim, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            counts[cm.assignments[i]]++;
            for (std::size_t j = 0; j < dim; ++j) next[cm.assignments[i]][j] += vectors[i][j];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                std::size_t far = 0;
                double fd = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    double d = sq_dist(vectors[i], cm.centroids[cm.assignments[i]]);
                    if (d > fd) {
                        fd = d;
                        far = i;
                    }
                }
                next[c] = vectors[far];
            } else {
                for (std::size_t j = 0; j < dim; ++j)
                    next[c][j] /= static_cast<double>(counts[c]);
            }
        }

        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) shift = std::max(shift, sq_dist(next[c], cm.centroids[c]));
        cm.centroids = std::move(next);
        if (std::sqrt(shift) < 1e-6) break;
    }

    // Final assignment against the converged centroids.
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        double bd = sq_dist(vectors[i], cm.centroids[0]);
        for (std::size_t c = 1; c < k; ++c) {
            double d = sq_dist(vectors[i], cm.centroids[c]);
            if (d < bd) {
                bd = d;
                best = c;
            }
        }
        cm.assignments[i] = best;
    }
    return cm;
}

std::vector<std::size_t> diverse_sample(const ClusterModel& cm, std::size_t budget,
                                        std::uint64_t seed) {
    const std::size_t n = cm.assignments.size();
    if (budget == 0) throw DimError("diverse_sample: zero budget");
    if (budget > n) throw DimError("diverse_sample: budget exceeds pool");
    const std::size_t k = cm.k();

    std::vector<std::vector<std::size_t>> members(k);
    for (std::size_t i = 0; i < n; ++i) members[cm.assignments[i]].push_back(i);

    // Proportional quotas, remainder settled against the largest clusters.
    std::vector<std::size_t> quota(k);
    long long assigned = 0;
    for (std::size_t c = 0; c < k; ++c) {
        double q = static_cast<double>(budget) * static_cast<double>(members[c].size()) /
                   static_cast<double>(n);
        quota[c] = std::min(members[c].size(),
                            static_cast<std::size_t>(std::llround(q)));
        assigned += static_cast<long long>(quota[c]);
    }
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (members[a].size() != members[b].size()) return members[a].size() > members[b].size();
        return a < b;
    });
    std::size_t guard = 0;
    while (assigned != static_cast<long long>(budget) && guard++ < 4 * k + 8) {
        for (std::size_t c : order) {
            if (assigned < static_cast<long long>(budget) && quota[c] < members[c].size()) {
                quota[c]++;
                assigned++;
            } else if (assigned > static_cast<long long>(budget) && quota[c] > 0) {
                quota[c]--;
                assigned--;
            }
            if (assigned == static_cast<long long>(budget)) break;
        }
    }
    if (assigned != static_cast<long long>(budget))
        throw NumericError("diverse_sample: quota settlement failed");

    // Uniform without replacement inside each cluster.
    SeededRng rng(seed);
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<std::size_t> ids = members[c];
        SeededRng crng = rng.fork(c);
        for (std::size_t i = 0; i + 1 < ids.size() && i < quota[c]; ++i) {
            std::size_t j = i + crng.next_below(ids.size() - i);
            std::swap(ids[i], ids[j]);
        }
        for (std::size_t i = 0; i < quota[c]; ++i) out.push_back(ids[i]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

double entropy(const std::vector<double>& p) {
    double sum = 0.0;
    for (double v : p) {
        if (v < 0.0) throw NumericError("entropy: negative probability");
        sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-9) throw NumericError("entropy: probabilities must sum to 1");
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

namespace {

void simplex_search(std::vector<double>& p, std::size_t pos, long long remaining, long long steps,
                    double grid_step, double& best_h, std::vector<double>& best_p) {
    if (pos + 1 == p.size()) {
        p[pos] = static_cast<double>(remaining) * grid_step;
        double h = 0.0;
        for (double v : p)
            if (v > 0.0) h -= v * std::log(v);
        if (h > best_h) {
            best_h = h;
            best_p = p;
        }
        return;
    }
    for (long long t = 0; t <= remaining; ++t) {
        p[pos] = static_cast<double>(t) * grid_step;
        simplex_search(p, pos + 1, remaining - t, steps, grid_step, best_h, best_p);
    }
}

} // namespace

std::vector<double> max_entropy_oracle(std::size_t n, double grid_step) {
    if (n < 2) throw DimError("max_entropy_oracle: n >= 2 required");
    if (!(grid_step > 0.0) || grid_step > 1.0)
        throw NumericError("max_entropy_oracle: bad grid step");
    const long long steps = std::llround(1.0 / grid_step);
    std::vector<double> p(n, 0.0), best_p(n, 0.0);
    double best_h = -1.0;
    simplex_search(p, 0, steps, steps, grid_step, best_h, best_p);
    return best_p;
}

} // namespace quantsmooth
