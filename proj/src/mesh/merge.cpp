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

#include "tetshift/merge.hpp"

#include <algorithm>
#include <sstream>

#include "tetshift/adjacency.hpp"
#include "tetshift/error.hpp"

namespace tetshift {

namespace {

std::string describe(const GlobalId& g) {
  std::ostringstream os;
  os << "(" << g.owner << "," << g.local << ")";
  return os.str();
}

}  // namespace

void classify_interface(Subdomain& sub, const std::set<GlobalId>& sharedGids) {
  auto& m = sub.mesh;
  for (auto& v : m.vertices) {
    if (sharedGids.count(v.gid))
      v.flags |= vflag::kInterface;
    else
      v.flags &= ~vflag::kInterface;
  }
  for (auto& t : m.tets) {
    bool iface = false;
    for (int v : t.v) iface = iface || m.vertices[v].interface();
    if (iface)
      t.flags |= tflag::kInterface | tflag::kFrozen;
    else
      t.flags &= ~(tflag::kInterface | tflag::kFrozen);
  }
}

void merge_scatter(Subdomain& receiver, const Shipment& shipment) {
  if (shipment.empty() && shipment.vertices.empty()) return;

  Subdomain next = receiver;
  auto& m = next.mesh;
  auto idx = gid_index(m);
  std::vector<int> local(shipment.vertices.size());
  for (std::size_t i = 0; i < shipment.vertices.size(); ++i) {
    const auto& sv = shipment.vertices[i];
    if (auto it = idx.find(sv.gid); it != idx.end()) {
      if (m.vertices[it->second].pos != sv.pos)
        throw Error(ErrorCode::ConformityBreak,
                    "gid " + describe(sv.gid) + " arrives with different coordinates");
      local[i] = it->second;
    } else {
      Vertex v;
      v.pos = sv.pos;
      v.gid = sv.gid;
      v.flags = sv.flags & vflag::kBoundary;
      local[i] = static_cast<int>(m.vertices.size());
      m.vertices.push_back(v);
      idx.emplace(sv.gid, local[i]);
    }
    if (!sv.holders.empty()) {
      std::vector<int> others;
      for (int h : sv.holders)
        if (h != next.id) others.push_back(h);
      std::sort(others.begin(), others.end());
      others.erase(std::unique(others.begin(), others.end()), others.end());
      if (others.empty())
        next.sharers.erase(sv.gid);
      else
        next.sharers[sv.gid] = std::move(others);
    }
  }

  std::set<std::array<int, 4>> existing;
  for (const auto& t : m.tets) {
    auto k = t.v;
    std::sort(k.begin(), k.end());
    existing.insert(k);
  }
  for (const auto& st : shipment.tets) {
    Tetrahedron t;
    for (int j = 0; j < 4; ++j) t.v[j] = local[st[j]];
    auto k = t.v;
    std::sort(k.begin(), k.end());
    if (!existing.insert(k).second) {
      std::string gids;
      for (int j = 0; j < 4; ++j) gids += describe(shipment.vertices[st[j]].gid);
      throw Error(ErrorCode::ConformityBreak, "shipment duplicates tet " + gids);
    }
    m.tets.push_back(t);
  }
  for (const auto& sf : shipment.facets) {
    BoundaryFacet f;
    for (int j = 0; j < 3; ++j) f.v[j] = local[sf.v[j]];
    f.tag = sf.tag;
    m.facets.push_back(f);
  }

  try {
    (void)build_adjacency(m);
  } catch (const Error& e) {
    std::string gids;
    for (const auto& sv : shipment.vertices) gids += describe(sv.gid);
    throw Error(ErrorCode::ConformityBreak, std::string(e.what()) + " after merging from " +
                                                std::to_string(shipment.sender) + "; gids " + gids);
  }

  next.rebuild_duplicates();
  next.rebuild_neighbors();
  classify_interface(next);
  receiver = std::move(next);
}

}  // namespace tetshift
