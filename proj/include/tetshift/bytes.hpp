// Copyright 2026 The tetshift Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "tetshift/error.hpp"

namespace tetshift {

using Bytes = std::vector<std::uint8_t>;

// Little-endian flat-buffer writer. Every integer goes out as 64 bits.
class ByteWriter {
 public:
  void u64(std::uint64_t x) {
    if constexpr (std::endian::native == std::endian::big) x = byteswap(x);
    append(&x, sizeof x);
  }
  void i64(std::int64_t x) { u64(static_cast<std::uint64_t>(x)); }
  void f64(double x) { u64(std::bit_cast<std::uint64_t>(x)); }
  void str(const std::string& s) {
    u64(s.size());
    append(s.data(), s.size());
  }
  void bytes(std::span<const std::uint8_t> b) {
    u64(b.size());
    append(b.data(), b.size());
  }

  Bytes take() { return std::move(buf_); }
  const Bytes& buffer() const { return buf_; }

 private:
  static std::uint64_t byteswap(std::uint64_t x) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r = (r << 8) | ((x >> (8 * i)) & 0xff);
    return r;
  }
  void append(const void* p, std::size_t n) {
    const auto* c = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }

  Bytes buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint64_t u64() {
    need(8);
    std::uint64_t x;
    std::memcpy(&x, data_.data() + pos_, 8);
    pos_ += 8;
    if constexpr (std::endian::native == std::endian::big) {
      std::uint64_t r = 0;
      for (int i = 0; i < 8; ++i) r = (r << 8) | ((x >> (8 * i)) & 0xff);
      x = r;
    }
    return x;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    auto n = count(1);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  Bytes bytes() {
    auto n = count(1);
    Bytes b(data_.begin() + pos_, data_.begin() + pos_ + n);
    pos_ += n;
    return b;
  }
  // Reads an element count and checks that the remaining buffer can hold
  // that many elements of at least minBytes each.
  std::size_t count(std::size_t minBytes) {
    auto n = u64();
    if (minBytes > 0 && n > remaining() / minBytes)
      throw Error(ErrorCode::MalformedBuffer, "count exceeds remaining buffer");
    return static_cast<std::size_t>(n);
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw Error(ErrorCode::MalformedBuffer, "truncated buffer");
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace tetshift
