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

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <unordered_map>
#include <vector>

#include "tetshift/geometry.hpp"

namespace tetshift {

// Names a vertex across subdomains: the subdomain that first saw the point
// plus that subdomain's running vertex counter.
struct GlobalId {
  std::int64_t owner = -1;
  std::int64_t local = -1;

  bool valid() const { return owner >= 0 && local >= 0; }

  friend bool operator==(const GlobalId&, const GlobalId&) = default;
  friend auto operator<=>(const GlobalId&, const GlobalId&) = default;
};

struct GlobalIdHash {
  std::size_t operator()(const GlobalId& g) const {
    return hash_combine(std::hash<std::int64_t>{}(g.owner), std::hash<std::int64_t>{}(g.local));
  }
};

namespace vflag {
inline constexpr std::uint8_t kBoundary = 1;
inline constexpr std::uint8_t kInterface = 2;
}  // namespace vflag

namespace tflag {
inline constexpr std::uint8_t kInterface = 1;
inline constexpr std::uint8_t kFrozen = 2;
}  // namespace tflag

struct Vertex {
  Vec3 pos = Vec3::Zero();
  GlobalId gid;
  std::uint8_t flags = 0;

  bool boundary() const { return flags & vflag::kBoundary; }
  bool interface() const { return flags & vflag::kInterface; }
};

struct Tetrahedron {
  std::array<int, 4> v{};
  std::uint8_t flags = 0;
  // Only meaningful while a kernel holds the element; always zero at rest.
  std::uint64_t lockWord = 0;

  bool interface() const { return flags & tflag::kInterface; }
  bool frozen() const { return flags & tflag::kFrozen; }
};

struct BoundaryFacet {
  std::array<int, 3> v{};
  int tag = 0;
};

struct TetMesh {
  std::vector<Vertex> vertices;
  std::vector<Tetrahedron> tets;
  std::vector<BoundaryFacet> facets;

  const Vec3& pos(int v) const { return vertices[v].pos; }
  double volume(int t) const {
    const auto& q = tets[t].v;
    return signed_volume(pos(q[0]), pos(q[1]), pos(q[2]), pos(q[3]));
  }
  double total_volume() const;
  bool empty() const { return tets.empty(); }

  // Marks vertices that lie on a boundary facet.
  void mark_boundary_vertices();
  // Drops vertices no tet references and renumbers tets/facets accordingly.
  void compact_vertices();
};

struct SubdomainState {
  enum class Phase { Decomposed, InteriorAdapted, MIIAdapted };
  Phase phase = Phase::Decomposed;
  int miiRound = 0;

  friend bool operator==(const SubdomainState&, const SubdomainState&) = default;
};

struct Subdomain {
  int id = 0;
  TetMesh mesh;
  // gid -> local vertex index, for every vertex this subdomain does not own.
  std::map<GlobalId, int> duplicates;
  std::set<int> neighbors;
  std::int64_t nextLocalId = 0;
  SubdomainState state;
  int miiPassCount = 0;
  // For every vertex also held elsewhere: the other subdomains holding it.
  std::map<GlobalId, std::vector<int>> sharers;

  void rebuild_duplicates();
  // neighbors := union of sharers.
  void rebuild_neighbors();
  std::set<GlobalId> shared_gids() const;
};

std::unordered_map<GlobalId, int, GlobalIdHash> gid_index(const TetMesh& mesh);

}  // namespace tetshift
