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

#include "tetshift/kernel/work_mesh.hpp"

#include <deque>
#include <map>
#include <unordered_map>

#include "tetshift/adjacency.hpp"

namespace tetshift::kernel {

WorkMesh::WorkMesh(const TetMesh& mesh, std::vector<MetricTensor> vertexMetrics, MetricFn metricAt)
    : metricAt_(std::move(metricAt)), sourceFacets_(mesh.facets) {
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    int v = new_vertex();
    auto& r = verts[v];
    r.pos = mesh.vertices[i].pos;
    r.gid = mesh.vertices[i].gid;
    r.flags = mesh.vertices[i].flags;
    r.metric = vertexMetrics[i];
    r.origin = static_cast<int>(i);
  }
  auto adj = build_adjacency(mesh);
  std::unordered_map<FaceKey, int, TriKeyHash<int>> facetTag;
  for (const auto& f : mesh.facets) facetTag.emplace(FaceKey(f.v[0], f.v[1], f.v[2]), f.tag);
  for (std::size_t i = 0; i < mesh.tets.size(); ++i) {
    int t = new_tet();
    auto& r = tets[t];
    r.v = mesh.tets[i].v;
    r.nbr = adj[i];
    r.flags = mesh.tets[i].flags;
    r.origin = static_cast<int>(i);
    for (int f = 0; f < 4; ++f) {
      if (r.nbr[f] >= 0) continue;
      auto it = facetTag.find(face_key(mesh.tets[i], f));
      if (it != facetTag.end()) r.tag[f] = it->second;
    }
    for (int v : r.v) verts[v].hint.store(t, std::memory_order_relaxed);
  }
}

int WorkMesh::new_tet() {
  auto t = tets.emplace();
  locks.ensure_size(t + 1);
  return static_cast<int>(t);
}

int WorkMesh::new_vertex() { return static_cast<int>(verts.emplace()); }

double WorkMesh::volume(int t) const {
  const auto& q = tets[t].v;
  return signed_volume(verts[q[0]].pos, verts[q[1]].pos, verts[q[2]].pos, verts[q[3]].pos);
}

void WorkMesh::compact() {
  const std::size_t nt = tets.size(), nv = verts.size();
  std::vector<int> tmap(nt, -1), vmap(nv, -1);
  std::vector<TetRec> keptT;
  int next = 0;
  for (std::size_t t = 0; t < nt; ++t)
    if (!tets[t].dead) tmap[t] = next++;
  next = 0;
  std::vector<char> used(nv, 0);
  for (std::size_t t = 0; t < nt; ++t)
    if (!tets[t].dead)
      for (int v : tets[t].v) used[v] = 1;
  for (std::size_t v = 0; v < nv; ++v)
    if (!verts[v].dead && used[v]) vmap[v] = next++;

  keptT.reserve(next);
  for (std::size_t t = 0; t < nt; ++t) {
    if (tets[t].dead) continue;
    TetRec r = tets[t];
    for (int& v : r.v) v = vmap[v];
    for (int& n : r.nbr)
      if (n >= 0) n = tmap[n];
    keptT.push_back(r);
  }
  struct VCopy {
    Vec3 pos;
    MetricTensor metric;
    GlobalId gid;
    std::uint8_t flags;
    int origin;
  };
  std::vector<VCopy> keptVs;
  for (std::size_t v = 0; v < nv; ++v) {
    if (vmap[v] < 0) continue;
    const auto& r = verts[v];
    keptVs.push_back({r.pos, r.metric, r.gid, r.flags, r.origin});
  }
  tets.clear();
  verts.clear();
  locks.reset();
  for (const auto& c : keptVs) {
    auto& r = verts[new_vertex()];
    r.pos = c.pos;
    r.metric = c.metric;
    r.gid = c.gid;
    r.flags = c.flags;
    r.origin = c.origin;
  }
  for (const auto& k : keptT) {
    int t = new_tet();
    tets[t] = k;
    for (int v : k.v) verts[v].hint.store(t, std::memory_order_relaxed);
  }
}

void WorkMesh::mark_buffer(int layers) {
  const std::size_t nt = tets.size();
  std::vector<int> depth(nt, -1);
  std::deque<int> queue;
  for (std::size_t t = 0; t < nt; ++t) {
    tets[t].buffer = false;
    if (!tets[t].dead && frozen(static_cast<int>(t))) {
      depth[t] = 0;
      queue.push_back(static_cast<int>(t));
    }
  }
  while (!queue.empty()) {
    int t = queue.front();
    queue.pop_front();
    if (depth[t] >= layers) continue;
    for (int n : tets[t].nbr) {
      if (n < 0 || depth[n] >= 0) continue;
      depth[n] = depth[t] + 1;
      tets[n].buffer = true;
      queue.push_back(n);
    }
  }
}

std::size_t WorkMesh::live_tets() const {
  std::size_t n = 0;
  for (std::size_t t = 0; t < tets.size(); ++t) n += !tets[t].dead;
  return n;
}

std::size_t WorkMesh::live_vertices() const {
  std::size_t n = 0;
  for (std::size_t v = 0; v < verts.size(); ++v) n += !verts[v].dead;
  return n;
}

TetMesh WorkMesh::to_mesh() const {
  TetMesh out;
  std::vector<int> vmap(verts.size(), -1);
  std::vector<char> used(verts.size(), 0);
  for (std::size_t t = 0; t < tets.size(); ++t)
    if (!tets[t].dead)
      for (int v : tets[t].v) used[v] = 1;
  for (std::size_t v = 0; v < verts.size(); ++v) {
    if (verts[v].dead || !used[v]) continue;
    vmap[v] = static_cast<int>(out.vertices.size());
    Vertex nv;
    nv.pos = verts[v].pos;
    nv.gid = verts[v].gid;
    nv.flags = verts[v].flags;
    out.vertices.push_back(nv);
  }
  // Boundary faces keyed by source-vertex indices where possible.
  std::map<FaceKey, BoundaryFacet> faces;
  std::vector<FaceKey> order;
  for (std::size_t t = 0; t < tets.size(); ++t) {
    const auto& r = tets[t];
    if (r.dead) continue;
    Tetrahedron nt;
    for (int j = 0; j < 4; ++j) nt.v[j] = vmap[r.v[j]];
    nt.flags = r.flags;
    out.tets.push_back(nt);
    for (int f = 0; f < 4; ++f) {
      if (r.nbr[f] >= 0 || r.tag[f] < 0) continue;
      BoundaryFacet bf;
      for (int k = 0; k < 3; ++k) bf.v[k] = nt.v[kTetFace[f][k]];
      bf.tag = r.tag[f];
      FaceKey key(bf.v[0], bf.v[1], bf.v[2]);
      faces.emplace(key, bf);
      order.push_back(key);
    }
  }
  // Source facets first, in their original order and orientation.
  std::vector<int> srcToOut(verts.size(), -1);
  for (std::size_t v = 0; v < verts.size(); ++v)
    if (verts[v].origin >= 0 && vmap[v] >= 0) {
      if (static_cast<std::size_t>(verts[v].origin) >= srcToOut.size())
        srcToOut.resize(verts[v].origin + 1, -1);
      srcToOut[verts[v].origin] = vmap[v];
    }
  for (const auto& f : sourceFacets_) {
    std::array<int, 3> w{};
    bool ok = true;
    for (int k = 0; k < 3; ++k) {
      int s = f.v[k];
      w[k] = s < static_cast<int>(srcToOut.size()) ? srcToOut[s] : -1;
      ok = ok && w[k] >= 0;
    }
    if (!ok) continue;
    auto it = faces.find(FaceKey(w[0], w[1], w[2]));
    if (it == faces.end()) continue;
    out.facets.push_back({w, f.tag});
    faces.erase(it);
  }
  for (const auto& key : order) {
    auto it = faces.find(key);
    if (it == faces.end()) continue;
    out.facets.push_back(it->second);
    faces.erase(it);
  }
  return out;
}

}  // namespace tetshift::kernel
