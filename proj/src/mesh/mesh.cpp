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
#include "tetshift/mesh.hpp"

#include "tetshift/error.hpp"

namespace tetshift {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonManifoldFace: return "NonManifoldFace";
    case ErrorCode::MalformedBuffer: return "MalformedBuffer";
    case ErrorCode::ConformityBreak: return "ConformityBreak";
    case ErrorCode::NonSPD: return "NonSPD";
    case ErrorCode::InvalidTarget: return "InvalidTarget";
    case ErrorCode::ZeroEdge: return "ZeroEdge";
    case ErrorCode::DegenerateTet: return "DegenerateTet";
    case ErrorCode::UnsplittableDomain: return "UnsplittableDomain";
    case ErrorCode::UnknownObject: return "UnknownObject";
    case ErrorCode::UnknownEvent: return "UnknownEvent";
    case ErrorCode::StaleTopology: return "StaleTopology";
    case ErrorCode::OverGather: return "OverGather";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

double TetMesh::total_volume() const {
  double sum = 0.0;
  for (std::size_t t = 0; t < tets.size(); ++t) sum += volume(static_cast<int>(t));
  return sum;
}

void TetMesh::mark_boundary_vertices() {
  for (auto& v : vertices) v.flags &= ~vflag::kBoundary;
  for (const auto& f : facets)
    for (int v : f.v) vertices[v].flags |= vflag::kBoundary;
}

void TetMesh::compact_vertices() {
  std::vector<int> remap(vertices.size(), -1);
  for (const auto& t : tets)
    for (int v : t.v) remap[v] = 0;
  int next = 0;
  std::vector<Vertex> kept;
  kept.reserve(vertices.size());
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    if (remap[i] < 0) continue;
    remap[i] = next++;
    kept.push_back(vertices[i]);
  }
  for (auto& t : tets)
    for (int& v : t.v) v = remap[v];
  for (auto& f : facets)
    for (int& v : f.v) v = remap[v];
  vertices = std::move(kept);
}

void Subdomain::rebuild_duplicates() {
  duplicates.clear();
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& g = mesh.vertices[i].gid;
    if (g.owner != id) duplicates.emplace(g, static_cast<int>(i));
  }
}

void Subdomain::rebuild_neighbors() {
  neighbors.clear();
  for (const auto& [g, others] : sharers)
    for (int s : others) neighbors.insert(s);
}

std::set<GlobalId> Subdomain::shared_gids() const {
  std::set<GlobalId> out;
  for (const auto& [g, others] : sharers)
    if (!others.empty()) out.insert(g);
  return out;
}

std::unordered_map<GlobalId, int, GlobalIdHash> gid_index(const TetMesh& mesh) {
  std::unordered_map<GlobalId, int, GlobalIdHash> idx;
  idx.reserve(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
    idx.emplace(mesh.vertices[i].gid, static_cast<int>(i));
  return idx;
}

}  // namespace tetshift
