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
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tetshift/mesh.hpp"

namespace tetshift {

struct DecompositionPlan {
  // Axes in the order they are cut; P, Q, R map to x, y, z.
  std::array<int, 3> axisOrder{0, 1, 2};
  // Number of pieces along x, y, z.
  std::array<int, 3> splits{1, 1, 1};
  int targetCount = 1;

  // Throws Error(InvalidArgument).
  void validate() const;

  // axisOrder like "xyz", "zxy" or "pqr"; splits like "4,2,1". An empty
  // splits string cuts along the first axis only.
  static DecompositionPlan parse(int subdomains, const std::string& axisOrder,
                                 const std::string& splits);
};

// Subdomain index for every tet: sorted-centroid runs, then repaired so each
// piece is simply connected. Throws Error(UnsplittableDomain).
std::vector<int> partition_tets(const TetMesh& mesh, const DecompositionPlan& plan);

// Moves disconnected and pinched pieces to the face-adjacent part sharing the
// most faces with them (ties to the lower id) until every part is simply
// connected. Throws Error(UnsplittableDomain) when that does not terminate or
// a part becomes empty.
void repair_partition(const TetMesh& mesh, std::vector<int>& part, int parts);

// Copy of the listed tets with only the vertices they use, kept in ascending
// source order, and the boundary facets lying on them. origin[i] receives the
// source index of vertex i when non-null.
TetMesh extract_submesh(const TetMesh& mesh, std::span<const int> tets,
                        std::vector<int>* origin = nullptr);

// Splits, assigns global ids, records sharers and neighbors and classifies
// the interface.
std::vector<Subdomain> decompose(const TetMesh& mesh, const DecompositionPlan& plan);

// Owner-first ids keyed by exact coordinates: walking subdomains in index
// order, the first one holding a point owns it. Also fills sharers,
// duplicates, neighbors and nextLocalId.
void assign_gids(std::vector<Subdomain>& subs);

// i and j are neighbors iff they hold a common GlobalId.
std::vector<std::set<int>> build_neighbor_graph(std::span<const Subdomain> subs);

}  // namespace tetshift
