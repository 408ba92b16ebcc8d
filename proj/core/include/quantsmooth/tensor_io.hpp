// Copyright (c) 2026 quantsmooth authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>

#include "quantsmooth/tensor.hpp"

namespace quantsmooth {

// QTSR tensor file: magic "QTSR", u8 version=1, u8 rank, u32-LE dims,
// row-major LE f32 payload. Values are narrowed to f32 on write; a
// save/load/save cycle is byte-identical.
void save_qtsr(const Tensor& t, std::ostream& out);
void save_qtsr_file(const Tensor& t, const std::string& path);
Tensor load_qtsr(std::istream& in);
Tensor load_qtsr_file(const std::string& path);

} // namespace quantsmooth
