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

#include <map>
#include <vector>

#include "tetshift/bytes.hpp"
#include "tetshift/mesh.hpp"

namespace tetshift {

inline constexpr std::uint64_t kSubdomainMagic = 0x3130425553485354ULL;  // "TSHSUB01"
inline constexpr std::uint64_t kShipmentMagic = 0x3130504853485354ULL;   // "TSHSHP01"
inline constexpr std::uint64_t kFormatVersion = 1;

// Self-contained flat encoding of a subdomain: little-endian header with the
// counts, then the flat arrays. All integers are 64 bits wide.
Bytes pack(const Subdomain& sub);
// Throws Error(MalformedBuffer) on truncated, trailing or inconsistent input.
Subdomain unpack(std::span<const std::uint8_t> buffer);

bool structurally_equal(const Subdomain& a, const Subdomain& b);

// Elements moved from a sender into a receiver during an interface shift.
// Vertex indices in tets/facets refer to the shipment's own vertex list.
struct Shipment {
  struct ShipVertex {
    GlobalId gid;
    Vec3 pos = Vec3::Zero();
    std::uint8_t flags = 0;
    // Subdomains holding this gid once the shift completes. Filled in before
    // the receiver scatters; empty means "unknown, keep what is there".
    std::vector<int> holders;
  };

  int sender = -1;
  int receiver = -1;
  std::vector<ShipVertex> vertices;
  std::vector<std::array<int, 4>> tets;
  std::vector<BoundaryFacet> facets;

  bool empty() const { return tets.empty(); }
};

Bytes pack(const Shipment& s);
Shipment unpack_shipment(std::span<const std::uint8_t> buffer);

}  // namespace tetshift
