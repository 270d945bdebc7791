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

#include "tetshift/orchestrator/invariants.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "tetshift/connectivity.hpp"
#include "tetshift/decomp.hpp"

namespace tetshift::orch {

namespace {

using GidTriple = std::array<GlobalId, 3>;

GidTriple sorted_triple(GlobalId a, GlobalId b, GlobalId c) {
  GidTriple t{a, b, c};
  std::sort(t.begin(), t.end());
  return t;
}

std::string gid_str(const GlobalId& g) {
  std::ostringstream os;
  os << "(" << g.owner << "," << g.local << ")";
  return os.str();
}

}  // namespace

InvariantReport check_global_invariants(std::span<const Subdomain> subs, double expectedVolume,
                                        double volumeTol) {
  InvariantReport rep;
  auto bad = [&](std::string s) { rep.violations.push_back(std::move(s)); };

  std::map<GidTriple, int> faceUse;
  std::map<GidTriple, int> facetUse;
  std::map<GlobalId, Vec3> where;
  std::map<std::array<double, 3>, GlobalId> byPoint;
  std::map<GlobalId, std::set<int>> holders;
  double volume = 0.0;

  for (const auto& s : subs) {
    const auto& m = s.mesh;
    std::set<GlobalId> seen;
    for (const auto& v : m.vertices) {
      if (!v.gid.valid()) bad("subdomain " + std::to_string(s.id) + " has a vertex without gid");
      if (!seen.insert(v.gid).second)
        bad("gid " + gid_str(v.gid) + " repeated inside subdomain " + std::to_string(s.id));
      holders[v.gid].insert(s.id);
      auto [it, fresh] = where.emplace(v.gid, v.pos);
      if (!fresh && it->second != v.pos)
        bad("gid " + gid_str(v.gid) + " has different coordinates in subdomain " +
            std::to_string(s.id));
      std::array<double, 3> key{v.pos.x(), v.pos.y(), v.pos.z()};
      auto [pit, pfresh] = byPoint.emplace(key, v.gid);
      if (!pfresh && pit->second != v.gid)
        bad("gids " + gid_str(pit->second) + " and " + gid_str(v.gid) + " share a point");
    }
    for (std::size_t t = 0; t < m.tets.size(); ++t) {
      double vol = m.volume(static_cast<int>(t));
      if (!(vol > 0.0))
        bad("tet " + std::to_string(t) + " of subdomain " + std::to_string(s.id) +
            " is not positively oriented");
      volume += vol;
      const auto& q = m.tets[t].v;
      for (int f = 0; f < 4; ++f)
        ++faceUse[sorted_triple(m.vertices[q[kTetFace[f][0]]].gid, m.vertices[q[kTetFace[f][1]]].gid,
                                m.vertices[q[kTetFace[f][2]]].gid)];
    }
    for (const auto& f : m.facets)
      ++facetUse[sorted_triple(m.vertices[f.v[0]].gid, m.vertices[f.v[1]].gid,
                               m.vertices[f.v[2]].gid)];
    if (!m.tets.empty()) {
      auto c = check_simple_connectivity(m);
      if (!c.connected)
        bad("subdomain " + std::to_string(s.id) + " is not simply connected (" +
            std::to_string(c.components) + " pieces, " + std::to_string(c.pinchVertices.size()) +
            " pinched vertices, " + std::to_string(c.pinchEdges.size()) + " pinched edges)");
    }
  }

  for (const auto& [face, n] : faceUse) {
    int facets = facetUse.count(face) ? facetUse.at(face) : 0;
    if (n + facets != 2)
      bad("face " + gid_str(face[0]) + gid_str(face[1]) + gid_str(face[2]) + " used by " +
          std::to_string(n) + " tets and " + std::to_string(facets) + " facets");
  }
  for (const auto& [face, n] : facetUse)
    if (!faceUse.count(face))
      bad("boundary facet " + gid_str(face[0]) + gid_str(face[1]) + gid_str(face[2]) +
          " lies on no tet");

  if (expectedVolume > 0.0 && std::abs(volume - expectedVolume) > volumeTol * expectedVolume) {
    std::ostringstream os;
    os.precision(17);
    os << "total volume " << volume << " differs from " << expectedVolume;
    bad(os.str());
  }

  for (const auto& s : subs) {
    for (const auto& v : s.mesh.vertices) {
      std::vector<int> expect;
      for (int h : holders[v.gid])
        if (h != s.id) expect.push_back(h);
      std::vector<int> have;
      if (auto it = s.sharers.find(v.gid); it != s.sharers.end()) have = it->second;
      if (have != expect)
        bad("subdomain " + std::to_string(s.id) + " has stale sharers for gid " + gid_str(v.gid));
    }
    for (const auto& [g, others] : s.sharers)
      if (!holders[g].count(s.id))
        bad("subdomain " + std::to_string(s.id) + " lists sharers for gid " + gid_str(g) +
            " it does not hold");
  }
  auto graph = build_neighbor_graph(subs);
  for (const auto& s : subs) {
    const std::set<int>& expect =
        s.id < static_cast<int>(graph.size()) ? graph[s.id] : std::set<int>{};
    if (s.neighbors != expect)
      bad("subdomain " + std::to_string(s.id) + " neighbor set differs from the rebuilt graph");
  }
  return rep;
}

TetMesh assemble(std::span<const Subdomain> subs) {
  std::map<GlobalId, Vertex> verts;
  for (const auto& s : subs)
    for (const auto& v : s.mesh.vertices) {
      auto& out = verts[v.gid];
      std::uint8_t flags = out.flags | (v.flags & vflag::kBoundary);
      out = v;
      out.flags = flags;
    }
  TetMesh m;
  std::map<GlobalId, int> index;
  for (auto& [g, v] : verts) {
    index.emplace(g, static_cast<int>(m.vertices.size()));
    m.vertices.push_back(v);
  }
  for (const auto& s : subs) {
    for (const auto& t : s.mesh.tets) {
      Tetrahedron nt;
      for (int j = 0; j < 4; ++j) nt.v[j] = index.at(s.mesh.vertices[t.v[j]].gid);
      m.tets.push_back(nt);
    }
    for (const auto& f : s.mesh.facets) {
      BoundaryFacet nf = f;
      for (int j = 0; j < 3; ++j) nf.v[j] = index.at(s.mesh.vertices[f.v[j]].gid);
      m.facets.push_back(nf);
    }
  }
  return m;
}

}  // namespace tetshift::orch
