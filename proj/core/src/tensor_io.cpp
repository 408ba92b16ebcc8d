// Copyright (c) 2026 quantsmooth authors
// SPDX-License-Identifier: Apache-2.0

#include "quantsmooth/tensor_io.hpp"

#include <cstring>
#include <fstream>
#include <ostream>

#include "quantsmooth/errors.hpp"

namespace quantsmooth {

namespace {

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
    if (!in) throw IoError("QTSR: truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32le(std::ostream& out, float f) {
    std::uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32le(out, v);
}

float get_f32le(std::istream& in) {
    std::uint32_t v = get_u32le(in);
    float f;
    std::memcpy(&f, &v, 4);
    return f;
}

} // namespace

void save_qtsr(const Tensor& t, std::ostream& out) {
    out.write("QTSR", 4);
    unsigned char version = 1, rank = static_cast<unsigned char>(t.rank());
    out.write(reinterpret_cast<const char*>(&version), 1);
    out.write(reinterpret_cast<const char*>(&rank), 1);
    for (std::size_t d : t.shape()) put_u32le(out, static_cast<std::uint32_t>(d));
    for (std::size_t i = 0; i < t.size(); ++i) put_f32le(out, static_cast<float>(t[i]));
    if (!out) throw IoError("QTSR: write failed");
}

Tensor load_qtsr(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "QTSR", 4) != 0) throw IoError("QTSR: bad magic");
    unsigned char version = 0, rank = 0;
    in.read(reinterpret_cast<char*>(&version), 1);
    in.read(reinterpret_cast<char*>(&rank), 1);
    if (!in || version != 1) throw IoError("QTSR: unsupported version");
    if (rank < 1 || rank > 3) throw IoError("QTSR: bad rank");
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = get_u32le(in);
    Tensor t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(get_f32le(in));
    if (!in) throw IoError("QTSR: truncated payload");
    return t;
}

void save_qtsr_file(const Tensor& t, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    save_qtsr(t, f);
}

Tensor load_qtsr_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for read: " + path);
    return load_qtsr(f);
}

} // namespace quantsmooth
