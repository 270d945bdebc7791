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
#include <array>
#include <cstdint>
#include <functional>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace tetshift {

using Vec3 = Eigen::Vector3d;

// Local faces of a tetrahedron; face i is opposite vertex i and is oriented
// so that its normal points out of a positively oriented tet.
inline constexpr int kTetFace[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};
inline constexpr int kTetEdge[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};

inline double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return (b - a).dot((c - a).cross(d - a)) / 6.0;
}

// Volume of a regular tetrahedron with unit edges.
inline double regular_tet_volume() { return 0.11785113019775792; }  // 1/(6*sqrt(2))

// Sorted vertex triple used to identify a face independently of orientation.
template <typename T>
struct TriKey {
  std::array<T, 3> v;

  TriKey() = default;
  TriKey(T a, T b, T c) : v{a, b, c} { std::sort(v.begin(), v.end()); }

  friend bool operator==(const TriKey&, const TriKey&) = default;
  friend auto operator<=>(const TriKey&, const TriKey&) = default;
};

template <typename T>
struct PairKey {
  std::array<T, 2> v;

  PairKey() = default;
  PairKey(T a, T b) : v{std::min(a, b), std::max(a, b)} {}

  friend bool operator==(const PairKey&, const PairKey&) = default;
  friend auto operator<=>(const PairKey&, const PairKey&) = default;
};

inline std::size_t hash_combine(std::size_t seed, std::size_t value) {
  return seed ^ (value + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

template <typename T>
struct TriKeyHash {
  std::size_t operator()(const TriKey<T>& k) const {
    std::hash<T> h;
    return hash_combine(hash_combine(h(k.v[0]), h(k.v[1])), h(k.v[2]));
  }
};

template <typename T>
struct PairKeyHash {
  std::size_t operator()(const PairKey<T>& k) const {
    std::hash<T> h;
    return hash_combine(h(k.v[0]), h(k.v[1]));
  }
};

}  // namespace tetshift
