// SPDX-License-Identifier: Apache-2.0
//
// ctpred: continuous-time channel prediction with tensor neural ODEs
// Copyright (C) 2026 The ctpred authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "ctpred/binary_io.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <memory>

namespace ctpred::io {

void ByteWriter::matrix(const CMatrix& m) {
  u32(static_cast<std::uint32_t>(m.rows()));
  u32(static_cast<std::uint32_t>(m.cols()));
  for (const Complex& z : m.data()) {
    f64(z.real());
    f64(z.imag());
  }
}

std::uint64_t ByteReader::get_le(int n) {
  if (remaining() < static_cast<std::size_t>(n)) fail("truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
  pos_ += static_cast<std::size_t>(n);
  return v;
}

std::string ByteReader::bytes(std::size_t n) {
  if (remaining() < n) fail("truncated");
  std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
  pos_ += n;
  return s;
}

CMatrix ByteReader::matrix() {
  const std::uint32_t rows = u32();
  const std::uint32_t cols = u32();
  if (rows == 0 || cols == 0) fail("matrix with zero dimension");
  const std::uint64_t count = static_cast<std::uint64_t>(rows) * cols;
  if (remaining() / 16 < count) fail("truncated matrix payload");
  std::vector<Complex> data(count);
  for (auto& z : data) {
    const double re = f64();
    const double im = f64();
    z = Complex(re, im);
  }
  return CMatrix(rows, cols, std::move(data));
}

CMatrix ByteReader::matrix(std::size_t rows, std::size_t cols, std::string_view label) {
  const std::size_t at = pos_;
  const std::uint32_t r = u32();
  const std::uint32_t c = u32();
  if (r != rows || c != cols) {
    fail(std::string(label) + " has shape " + std::to_string(r) + "x" + std::to_string(c) + ", header implies " +
         std::to_string(rows) + "x" + std::to_string(cols));
  }
  pos_ = at;
  return matrix();
}

void ByteReader::expect_end() const {
  if (remaining() != 0) fail(std::to_string(remaining()) + " trailing bytes");
}

void ByteReader::fail(const std::string& msg) const {
  throw FormatError("corrupt " + what_ + " at byte " + std::to_string(pos_) + ": " + msg);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error reading " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("error writing " + path.string());
}

std::string git_blob_sha1(std::span<const std::uint8_t> bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw Error("git_blob_sha1: digest failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

}  // namespace ctpred::io
