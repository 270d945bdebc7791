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

#include <cstdint>
#include <iosfwd>
#include <string>

#include "tetshift/mesh.hpp"

namespace tetshift {

// ASCII mesh format:
//   nVerts nTets nBoundaryFacets
//   x y z [ownerGid localGid]      (per vertex)
//   v0 v1 v2 v3                    (per tet)
//   v0 v1 v2 tag                   (per facet)
// '#' starts a comment that runs to the end of the line.
TetMesh read_mesh(std::istream& in);
TetMesh read_mesh_file(const std::string& path);
void write_mesh(std::ostream& out, const TetMesh& mesh, bool withGids);
void write_mesh_file(const std::string& path, const TetMesh& mesh, bool withGids);

// Structured n*n*n cube of the given edge size, six tets per cell, with
// boundary facets tagged 0..5 (x=0, x=L, y=0, y=L, z=0, z=L). Interior
// points move by up to jitter * (size / n) per coordinate, drawn from a
// generator seeded with `seed`.
TetMesh make_cube_mesh(int n, double size = 1.0, double jitter = 0.0, std::uint64_t seed = 1);

}  // namespace tetshift
