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
#include <span>
#include <unordered_map>
#include <vector>

#include "tetshift/mesh.hpp"

namespace tetshift {

using FaceKey = TriKey<int>;
using EdgeKey = PairKey<int>;

// Neighbor across local face i of each tet, or -1 when the face is unshared.
using Adjacency = std::vector<std::array<int, 4>>;

// Throws Error(NonManifoldFace) if a face is shared by more than two tets.
Adjacency build_adjacency(const TetMesh& mesh);

// Same, restricted to a subset of tets; entries refer to positions in
// "subset", not to mesh tet indices.
Adjacency build_adjacency(const TetMesh& mesh, std::span<const int> subset);

inline FaceKey face_key(const Tetrahedron& t, int f) {
  return FaceKey(t.v[kTetFace[f][0]], t.v[kTetFace[f][1]], t.v[kTetFace[f][2]]);
}

// vertex -> incident tets
std::vector<std::vector<int>> vertex_to_tets(const TetMesh& mesh);

// Unique edges of the mesh in ascending key order.
std::vector<EdgeKey> unique_edges(const TetMesh& mesh);

}  // namespace tetshift
