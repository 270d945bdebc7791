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
#include "tetshift/adjacency.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "tetshift/error.hpp"

namespace tetshift {

Adjacency build_adjacency(const TetMesh& mesh, std::span<const int> subset) {
  Adjacency adj(subset.size(), {-1, -1, -1, -1});
  std::unordered_map<FaceKey, std::pair<int, int>, TriKeyHash<int>> open;
  open.reserve(subset.size() * 4);
  const int nv = static_cast<int>(mesh.vertices.size());
  for (std::size_t i = 0; i < subset.size(); ++i) {
    const auto& tet = mesh.tets[subset[i]];
    for (int v : tet.v)
      if (v < 0 || v >= nv)
        throw Error(ErrorCode::InvalidArgument, "tet vertex index out of range");
    for (int f = 0; f < 4; ++f) {
      auto key = face_key(tet, f);
      auto [it, fresh] = open.try_emplace(key, static_cast<int>(i), f);
      if (fresh) continue;
      auto [j, g] = it->second;
      if (j < 0 || adj[j][g] != -1)
        throw Error(ErrorCode::NonManifoldFace,
                    "face (" + std::to_string(key.v[0]) + "," + std::to_string(key.v[1]) + "," +
                        std::to_string(key.v[2]) + ") shared by more than two tets");
      adj[i][f] = j;
      adj[j][g] = static_cast<int>(i);
      it->second = {-1, -1};
    }
  }
  return adj;
}

Adjacency build_adjacency(const TetMesh& mesh) {
  std::vector<int> all(mesh.tets.size());
  std::iota(all.begin(), all.end(), 0);
  return build_adjacency(mesh, all);
}

std::vector<std::vector<int>> vertex_to_tets(const TetMesh& mesh) {
  std::vector<std::vector<int>> out(mesh.vertices.size());
  for (std::size_t t = 0; t < mesh.tets.size(); ++t)
    for (int v : mesh.tets[t].v) out[v].push_back(static_cast<int>(t));
  return out;
}

std::vector<EdgeKey> unique_edges(const TetMesh& mesh) {
  std::vector<EdgeKey> edges;
  edges.reserve(mesh.tets.size() * 6);
  for (const auto& t : mesh.tets)
    for (const auto& e : kTetEdge) edges.emplace_back(t.v[e[0]], t.v[e[1]]);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

}  // namespace tetshift
