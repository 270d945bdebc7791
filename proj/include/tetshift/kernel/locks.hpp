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

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "tetshift/error.hpp"

namespace tetshift::kernel {

// Append-only storage whose elements never move, so a worker may keep
// references while others append. Growth is serialized; indexing is not.
template <typename T, int kShift = 12>
class ChunkedVec {
 public:
  static constexpr std::size_t kChunk = std::size_t{1} << kShift;
  static constexpr std::size_t kMaxChunks = std::size_t{1} << 14;

  ChunkedVec() : chunks_(new std::unique_ptr<T[]>[kMaxChunks]) {}
  ChunkedVec(const ChunkedVec&) = delete;
  ChunkedVec& operator=(const ChunkedVec&) = delete;

  T& operator[](std::size_t i) { return chunks_[i >> kShift][i & (kChunk - 1)]; }
  const T& operator[](std::size_t i) const { return chunks_[i >> kShift][i & (kChunk - 1)]; }

  std::size_t size() const { return size_.load(std::memory_order_acquire); }

  // Thread-safe; the new slot is default-constructed.
  std::size_t emplace() {
    std::size_t i = size_.fetch_add(1, std::memory_order_acq_rel);
    ensure(i >> kShift);
    return i;
  }

  // Thread-safe; grows to at least n slots.
  void ensure_size(std::size_t n) {
    if (n == 0) return;
    ensure((n - 1) >> kShift);
    std::size_t cur = size_.load(std::memory_order_acquire);
    while (cur < n && !size_.compare_exchange_weak(cur, n, std::memory_order_acq_rel)) {
    }
  }

  // Single-threaded only.
  void clear() {
    for (std::size_t c = 0; c < kMaxChunks && chunks_[c]; ++c) chunks_[c].reset();
    allocated_.store(0, std::memory_order_release);
    size_.store(0, std::memory_order_release);
  }

 private:
  void ensure(std::size_t chunk) {
    if (chunk < allocated_.load(std::memory_order_acquire)) return;
    std::lock_guard lock(grow_);
    std::size_t have = allocated_.load(std::memory_order_relaxed);
    if (chunk >= kMaxChunks) throw Error(ErrorCode::InvalidArgument, "kernel storage exhausted");
    for (; have <= chunk; ++have) chunks_[have].reset(new T[kChunk]());
    allocated_.store(have, std::memory_order_release);
  }

  std::unique_ptr<std::unique_ptr<T[]>[]> chunks_;
  std::atomic<std::size_t> size_{0};
  std::atomic<std::size_t> allocated_{0};
  std::mutex grow_;
};

// One test-and-set word per element; 0 is free, otherwise owner + 1.
class ElementLocks {
 public:
  ElementLocks() = default;

  // Thread-safe.
  void ensure_size(std::size_t n) { words_.ensure_size(n); }
  std::size_t size() const { return words_.size(); }

  bool try_lock(int element, int owner) {
    std::uint32_t expected = 0;
    return words_[element].compare_exchange_strong(expected, static_cast<std::uint32_t>(owner) + 1,
                                                   std::memory_order_acquire,
                                                   std::memory_order_relaxed);
  }
  bool held_by(int element, int owner) const {
    return words_[element].load(std::memory_order_relaxed) ==
           static_cast<std::uint32_t>(owner) + 1;
  }
  void unlock(int element) { words_[element].store(0, std::memory_order_release); }
  std::uint32_t word(int element) const { return words_[element].load(std::memory_order_acquire); }

  // All-or-nothing in ascending element order. Elements for which `frozen`
  // returns true always fail. On failure everything taken here is released.
  template <typename FrozenPred>
  bool try_lock_cavity(std::span<const int> elements, int owner, FrozenPred frozen) {
    std::vector<int> order(elements.begin(), elements.end());
    std::sort(order.begin(), order.end());
    order.erase(std::unique(order.begin(), order.end()), order.end());
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (frozen(order[i]) || !try_lock(order[i], owner)) {
        rollback(std::span<const int>(order.data(), i));
        return false;
      }
    }
    return true;
  }
  bool try_lock_cavity(std::span<const int> elements, int owner) {
    return try_lock_cavity(elements, owner, [](int) { return false; });
  }

  void rollback(std::span<const int> elements) {
    for (int e : elements) unlock(e);
  }

  void reset() { words_.clear(); }

 private:
  ChunkedVec<std::atomic<std::uint32_t>> words_;
};

}  // namespace tetshift::kernel
