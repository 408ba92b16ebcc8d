// Copyright (c) 2026 quantsmooth authors
// SPDX-License-Identifier: Apache-2.0

#include "quantsmooth/quantize.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>

#include "quantsmooth/errors.hpp"

namespace quantsmooth {

namespace {
constexpr double kZeroMaxDelta = 1e-8;

void put_u32le(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32le(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw IoError("QQTS: truncated");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64le(std::ostream& out, double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    put_u32le(out, static_cast<std::uint32_t>(v & 0xffffffffull));
    put_u32le(out, static_cast<std::uint32_t>(v >> 32));
}

double get_f64le(std::istream& in) {
    std::uint64_t lo = get_u32le(in), hi = get_u32le(in);
    std::uint64_t v = lo | (hi << 32);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}
} // namespace

void QuantSpec::validate() const {
    if (bits != 4 && bits != 6 && bits != 8)
        throw NumericError("QuantSpec: bits must be 4, 6 or 8");
}

double compute_delta(const double* x, std::size_t n, int bits) {
    if (bits != 4 && bits != 6 && bits != 8)
        throw NumericError("compute_delta: bits must be 4, 6 or 8");
    double ma = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(x[i])) throw NumericError("compute_delta: non-finite input");
        ma = std::max(ma, std::fabs(x[i]));
    }
    if (ma == 0.0) return kZeroMaxDelta;
    return ma / static_cast<double>((std::int64_t(1) << (bits - 1)) - 1);
}

double compute_delta(const Tensor& x, int bits) {
    return compute_delta(x.data(), x.size(), bits);
}

std::int8_t quantize_value(double x, double delta, int bits) {
    const double lo = -static_cast<double>(std::int64_t(1) << (bits - 1));
    const double hi = static_cast<double>((std::int64_t(1) << (bits - 1)) - 1);
    double r = std::round(x / delta);
    if (r < lo) r = lo;
    if (r > hi) r = hi;
    return static_cast<std::int8_t>(r);
}

void quantize(const double* x, std::size_t n, double delta, int bits, std::int8_t* codes) {
    if (delta <= 0.0) throw NumericError("quantize: delta must be positive");
    for (std::size_t i = 0; i < n; ++i) codes[i] = quantize_value(x[i], delta, bits);
}

Tensor dequantize(const QuantizedTensor& q) {
    Tensor t(q.shape);
    const std::size_t n = t.size();
    switch (q.spec.granularity) {
        case Granularity::PerTensor:
            for (std::size_t i = 0; i < n; ++i) t[i] = q.codes[i] * q.deltas[0];
            break;
        case Granularity::PerRow: {
            const std::size_t cols = q.cols();
            for (std::size_t i = 0; i < n; ++i) t[i] = q.codes[i] * q.deltas[i / cols];
            break;
        }
        case Granularity::PerColumn: {
            const std::size_t cols = q.cols();
            for (std::size_t i = 0; i < n; ++i) t[i] = q.codes[i] * q.deltas[i % cols];
            break;
        }
    }
    return t;
}

QuantizedTensor quantize_tensor(const Tensor& x, const QuantSpec& spec) {
    spec.validate();
    if (x.rank() != 2) throw DimError("quantize_tensor: rank-2 required");
    if (!x.all_finite()) throw NumericError("quantize_tensor: non-finite input");
    const std::size_t m = x.rows(), n = x.cols();

    QuantizedTensor q;
    q.shape = x.shape();
    q.spec = spec;
    q.codes.resize(m * n);
    switch (spec.granularity) {
        case Granularity::PerTensor: {
            double d = compute_delta(x.data(), m * n, spec.bits);
            q.deltas = {d};
            quantize(x.data(), m * n, d, spec.bits, q.codes.data());
            break;
        }
        case Granularity::PerRow: {
            q.deltas.resize(m);
            for (std::size_t i = 0; i < m; ++i) {
                q.deltas[i] = compute_delta(x.row_ptr(i), n, spec.bits);
                quantize(x.row_ptr(i), n, q.deltas[i], spec.bits, q.codes.data() + i * n);
            }
            break;
        }
        case Granularity::PerColumn: {
            q.deltas.resize(n);
            std::vector<double> col(m);
            for (std::size_t j = 0; j < n; ++j) {
                for (std::size_t i = 0; i < m; ++i) col[i] = x.at(i, j);
                q.deltas[j] = compute_delta(col.data(), m, spec.bits);
                for (std::size_t i = 0; i < m; ++i)
                    q.codes[i * n + j] = quantize_value(x.at(i, j), q.deltas[j], spec.bits);
            }
            break;
        }
    }
    return q;
}

double quant_mse(const Tensor& x, const QuantSpec& spec) {
    Tensor rec = dequantize(quantize_tensor(x, spec));
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double d = x[i] - rec[i];
        acc += d * d;
    }
    return acc / static_cast<double>(x.size());
}

double coherence(const double* x, std::size_t n) {
    double ma = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma = std::max(ma, std::fabs(x[i]));
        sq += x[i] * x[i];
    }
    if (sq <= 0.0) throw NumericError("coherence: zero norm");
    return ma * std::sqrt(static_cast<double>(n)) / std::sqrt(sq);
}

double coherence(const Tensor& x) { return coherence(x.data(), x.size()); }

void save_qqts(const QuantizedTensor& q, std::ostream& out) {
    out.write("QQTS", 4);
    unsigned char hdr[4] = {static_cast<unsigned char>(q.spec.bits),
                            static_cast<unsigned char>(q.spec.granularity),
                            static_cast<unsigned char>(q.spec.mode),
                            static_cast<unsigned char>(q.shape.size())};
    out.write(reinterpret_cast<const char*>(hdr), 4);
    for (std::size_t d : q.shape) put_u32le(out, static_cast<std::uint32_t>(d));
    put_u32le(out, static_cast<std::uint32_t>(q.deltas.size()));
    for (double d : q.deltas) put_f64le(out, d);
    out.write(reinterpret_cast<const char*>(q.codes.data()),
              static_cast<std::streamsize>(q.codes.size()));
    if (!out) throw IoError("QQTS: write failed");
}

QuantizedTensor load_qqts(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "QQTS", 4) != 0) throw IoError("QQTS: bad magic");
    unsigned char hdr[4];
    in.read(reinterpret_cast<char*>(hdr), 4);
    if (!in) throw IoError("QQTS: truncated header");
    QuantizedTensor q;
    q.spec.bits = hdr[0];
    q.spec.granularity = static_cast<Granularity>(hdr[1]);
    q.spec.mode = static_cast<QuantMode>(hdr[2]);
    const unsigned rank = hdr[3];
    if (rank < 1 || rank > 3) throw IoError("QQTS: bad rank");
    q.shape.resize(rank);
    std::size_t n = 1;
    for (auto& d : q.shape) {
        d = get_u32le(in);
        n *= d;
    }
    q.deltas.resize(get_u32le(in));
    for (auto& d : q.deltas) d = get_f64le(in);
    q.codes.resize(n);
    in.read(reinterpret_cast<char*>(q.codes.data()), static_cast<std::streamsize>(n));
    if (!in) throw IoError("QQTS: truncated payload");
    return q;
}

void save_qqts_file(const QuantizedTensor& q, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    save_qqts(q, f);
}

QuantizedTensor load_qqts_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for read: " + path);
    return load_qqts(f);
}

} // namespace quantsmooth
