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

#include "tetshift/orchestrator/shift.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "tetshift/adjacency.hpp"
#include "tetshift/connectivity.hpp"
#include "tetshift/decomp.hpp"
#include "tetshift/error.hpp"
#include "tetshift/merge.hpp"

namespace tetshift::orch {

namespace {

std::vector<char> shared_with(const Subdomain& sub, int receiver) {
  const auto& m = sub.mesh;
  std::vector<char> out(m.vertices.size(), 0);
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    auto it = sub.sharers.find(m.vertices[i].gid);
    if (it == sub.sharers.end()) continue;
    out[i] = std::find(it->second.begin(), it->second.end(), receiver) != it->second.end();
  }
  return out;
}

// Keeps the largest piece of `tets` (the earliest on ties) and marks the rest.
bool ship_minor_pieces(const TetMesh& m, const std::vector<int>& tets, std::vector<char>& ship) {
  std::vector<int> label;
  int pieces = label_components(m, tets, label);
  if (pieces < 2) return false;
  std::vector<int> size(pieces, 0);
  for (int l : label) ++size[l];
  int keep = static_cast<int>(std::max_element(size.begin(), size.end()) - size.begin());
  for (std::size_t i = 0; i < tets.size(); ++i)
    if (label[i] != keep) ship[tets[i]] = 1;
  return true;
}

}  // namespace

int layers_for(const Subdomain& sender, const ShiftPlan& plan) {
  return sender.miiPassCount > 0 ? plan.layersAdapted : plan.layersFresh;
}

std::vector<int> layer_depths(const Subdomain& sender, int receiver, int layers,
                              SeedConnectivity seeds) {
  if (layers < 1) throw Error(ErrorCode::InvalidArgument, "layers must be >= 1");
  const auto& m = sender.mesh;
  const int nT = static_cast<int>(m.tets.size());
  auto shared = shared_with(sender, receiver);
  auto adj = build_adjacency(m);
  std::vector<int> depth(nT, 0);
  std::vector<int> frontier;

  std::unordered_map<FaceKey, int, TriKeyHash<int>> facet;
  for (const auto& f : m.facets) facet.emplace(FaceKey(f.v[0], f.v[1], f.v[2]), 1);
  for (int t = 0; t < nT; ++t) {
    const auto& q = m.tets[t].v;
    bool seed = false;
    if (seeds == SeedConnectivity::PointConnected) {
      for (int v : q) seed = seed || shared[v];
    } else {
      // A face lying on the receiver: all three corners shared with it, no
      // sender tet behind it and not on the domain boundary.
      for (int f = 0; f < 4 && !seed; ++f) {
        if (adj[t][f] >= 0) continue;
        bool all = true;
        for (int k = 0; k < 3; ++k) all = all && shared[q[kTetFace[f][k]]];
        seed = all && !facet.count(face_key(m.tets[t], f));
      }
    }
    if (seed) {
      depth[t] = 1;
      frontier.push_back(t);
    }
  }
  for (int d = 2; d <= layers && !frontier.empty(); ++d) {
    std::vector<int> next;
    for (int t : frontier)
      for (int n : adj[t])
        if (n >= 0 && depth[n] == 0) {
          depth[n] = d;
          next.push_back(n);
        }
    frontier = std::move(next);
  }
  return depth;
}

std::vector<int> select_shipment(const Subdomain& sender, int receiver, const GatherOptions& opts) {
  const auto& m = sender.mesh;
  const int nT = static_cast<int>(m.tets.size());
  auto depth = layer_depths(sender, receiver, opts.layers, opts.seeds);
  std::vector<char> ship(nT, 0);
  bool any = false;
  for (int t = 0; t < nT; ++t)
    if (depth[t] > 0) ship[t] = 1, any = true;
  if (!any) return {};

  auto v2t = vertex_to_tets(m);
  const double cap = opts.maxShipFraction * nT;
  for (int round = 0;; ++round) {
    std::vector<int> rest;
    int shipped = 0;
    for (int t = 0; t < nT; ++t) {
      if (ship[t])
        ++shipped;
      else
        rest.push_back(t);
    }
    if (shipped > cap || rest.empty())
      throw Error(ErrorCode::OverGather, std::to_string(shipped) + " of " + std::to_string(nT) +
                                             " tets from subdomain " + std::to_string(sender.id) +
                                             " toward " + std::to_string(receiver));
    auto rep = check_simple_connectivity(m, rest);
    if (rep.connected) break;
    if (round > 4 * nT)
      throw Error(ErrorCode::OverGather, "pinch repair did not settle in subdomain " +
                                             std::to_string(sender.id));
    if (rep.components > 1) {
      ship_minor_pieces(m, rest, ship);
      continue;
    }
    std::vector<int> fan;
    for (int pv : rep.pinchVertices) {
      fan.clear();
      for (int t : v2t[pv])
        if (!ship[t]) fan.push_back(t);
      ship_minor_pieces(m, fan, ship);
    }
    for (auto [a, b] : rep.pinchEdges) {
      fan.clear();
      for (int t : v2t[a]) {
        if (ship[t]) continue;
        const auto& q = m.tets[t].v;
        if (std::find(q.begin(), q.end(), b) != q.end()) fan.push_back(t);
      }
      ship_minor_pieces(m, fan, ship);
    }
  }
  std::vector<int> out;
  for (int t = 0; t < nT; ++t)
    if (ship[t]) out.push_back(t);
  return out;
}

Shipment build_shipment(const Subdomain& sender, int receiver, std::span<const int> tets) {
  const auto& m = sender.mesh;
  Shipment s;
  s.sender = sender.id;
  s.receiver = receiver;
  std::vector<int> origin;
  TetMesh part = extract_submesh(m, tets, &origin);
  s.vertices.reserve(part.vertices.size());
  for (const auto& v : part.vertices) {
    Shipment::ShipVertex sv;
    sv.gid = v.gid;
    sv.pos = v.pos;
    sv.flags = v.flags & vflag::kBoundary;
    sv.holders.push_back(sender.id);
    if (auto it = sender.sharers.find(v.gid); it != sender.sharers.end())
      sv.holders.insert(sv.holders.end(), it->second.begin(), it->second.end());
    std::sort(sv.holders.begin(), sv.holders.end());
    s.vertices.push_back(std::move(sv));
  }
  for (const auto& t : part.tets) s.tets.push_back(t.v);
  s.facets = std::move(part.facets);
  return s;
}

Bytes pack_deltas(std::span<const HolderDelta> deltas) {
  ByteWriter w;
  w.u64(deltas.size());
  for (const auto& d : deltas) {
    w.i64(d.gid.owner);
    w.i64(d.gid.local);
    w.i64(d.added);
    w.i64(d.removed);
  }
  return w.take();
}

std::vector<HolderDelta> unpack_deltas(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  std::vector<HolderDelta> out(r.count(32));
  for (auto& d : out) {
    d.gid.owner = r.i64();
    d.gid.local = r.i64();
    d.added = static_cast<int>(r.i64());
    d.removed = static_cast<int>(r.i64());
  }
  if (!r.done()) throw Error(ErrorCode::MalformedBuffer, "trailing bytes after holder deltas");
  return out;
}

std::map<int, std::vector<HolderDelta>> remove_shipped(Subdomain& sender, int receiver,
                                                       std::span<const int> tets) {
  auto& m = sender.mesh;
  std::vector<char> ship(m.tets.size(), 0);
  std::set<GlobalId> shippedGids;
  for (int t : tets) {
    ship[t] = 1;
    for (int v : m.tets[t].v) shippedGids.insert(m.vertices[v].gid);
  }
  std::vector<int> rest;
  for (int t = 0; t < static_cast<int>(m.tets.size()); ++t)
    if (!ship[t]) rest.push_back(t);
  m = extract_submesh(m, rest);
  std::set<GlobalId> kept;
  for (const auto& v : m.vertices) kept.insert(v.gid);

  std::map<int, std::vector<HolderDelta>> out;
  for (const auto& g : shippedGids) {
    std::vector<int> before;
    if (auto it = sender.sharers.find(g); it != sender.sharers.end()) before = it->second;
    bool gained = std::find(before.begin(), before.end(), receiver) == before.end();
    bool dropped = !kept.count(g);
    HolderDelta d{g, gained ? receiver : -1, dropped ? sender.id : -1};
    if (d.added >= 0 || d.removed >= 0)
      for (int x : before) out[x].push_back(d);
    if (dropped) {
      sender.sharers.erase(g);
    } else if (gained) {
      before.push_back(receiver);
      std::sort(before.begin(), before.end());
      sender.sharers[g] = std::move(before);
    }
  }
  sender.rebuild_duplicates();
  sender.rebuild_neighbors();
  classify_interface(sender);
  return out;
}

void apply_deltas(Subdomain& sub, std::span<const HolderDelta> deltas) {
  if (deltas.empty()) return;
  auto idx = gid_index(sub.mesh);
  for (const auto& d : deltas) {
    if (!idx.count(d.gid)) continue;
    auto& v = sub.sharers[d.gid];
    if (d.added >= 0 && d.added != sub.id &&
        std::find(v.begin(), v.end(), d.added) == v.end())
      v.push_back(d.added);
    if (d.removed >= 0) v.erase(std::remove(v.begin(), v.end(), d.removed), v.end());
    std::sort(v.begin(), v.end());
    if (v.empty()) sub.sharers.erase(d.gid);
  }
}

void apply_deltas(std::map<GlobalId, std::set<int>>& holders, std::span<const HolderDelta> deltas) {
  for (const auto& d : deltas) {
    auto it = holders.find(d.gid);
    if (it == holders.end()) continue;
    if (d.added >= 0) it->second.insert(d.added);
    if (d.removed >= 0) it->second.erase(d.removed);
  }
}

bool merge_keeps_connectivity(const Subdomain& receiver, std::span<const Shipment> shipments) {
  Subdomain copy = receiver;
  try {
    for (const auto& s : shipments) merge_scatter(copy, s);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConformityBreak) return false;
    throw;
  }
  return check_simple_connectivity(copy.mesh).connected;
}

}  // namespace tetshift::orch
