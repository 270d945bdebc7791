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

#include "tetshift/decomp.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "tetshift/adjacency.hpp"
#include "tetshift/connectivity.hpp"
#include "tetshift/error.hpp"
#include "tetshift/merge.hpp"

namespace tetshift {

void DecompositionPlan::validate() const {
  std::array<int, 3> seen{0, 0, 0};
  for (int a : axisOrder) {
    if (a < 0 || a > 2) throw Error(ErrorCode::InvalidArgument, "axis order entry out of range");
    ++seen[a];
  }
  if (seen != std::array<int, 3>{1, 1, 1})
    throw Error(ErrorCode::InvalidArgument, "axis order is not a permutation");
  long product = 1;
  for (int s : splits) {
    if (s < 1) throw Error(ErrorCode::InvalidArgument, "split factors must be >= 1");
    product *= s;
  }
  if (product != targetCount)
    throw Error(ErrorCode::InvalidArgument, "split factors multiply to " + std::to_string(product) +
                                                ", not " + std::to_string(targetCount));
}

DecompositionPlan DecompositionPlan::parse(int subdomains, const std::string& axisOrder,
                                           const std::string& splits) {
  DecompositionPlan plan;
  plan.targetCount = subdomains;
  if (axisOrder.size() != 3) throw Error(ErrorCode::InvalidArgument, "axis order needs 3 letters");
  for (int i = 0; i < 3; ++i) {
    char c = static_cast<char>(std::tolower(static_cast<unsigned char>(axisOrder[i])));
    switch (c) {
      case 'x': case 'p': plan.axisOrder[i] = 0; break;
      case 'y': case 'q': plan.axisOrder[i] = 1; break;
      case 'z': case 'r': plan.axisOrder[i] = 2; break;
      default: throw Error(ErrorCode::InvalidArgument, std::string("bad axis letter ") + c);
    }
  }
  if (splits.empty()) {
    plan.splits = {1, 1, 1};
    plan.splits[plan.axisOrder[0]] = subdomains;
  } else {
    std::stringstream ss(splits);
    std::string tok;
    int i = 0;
    while (std::getline(ss, tok, ',')) {
      if (i >= 3) throw Error(ErrorCode::InvalidArgument, "splits needs 3 factors");
      try {
        plan.splits[i++] = std::stoi(tok);
      } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidArgument, "bad split factor '" + tok + "'");
      }
    }
    if (i != 3) throw Error(ErrorCode::InvalidArgument, "splits needs 3 factors");
  }
  plan.validate();
  return plan;
}

namespace {

void split_recursive(const std::vector<Vec3>& centroid, std::vector<int> ids,
                     const DecompositionPlan& plan, int level, int base, std::vector<int>& part) {
  if (level == 3) {
    for (int t : ids) part[t] = base;
    return;
  }
  int axis = plan.axisOrder[level];
  int pieces = plan.splits[axis];
  std::sort(ids.begin(), ids.end(), [&](int a, int b) {
    const Vec3 &ca = centroid[a], &cb = centroid[b];
    for (int k = 0; k < 3; ++k) {
      int ax = (axis + k) % 3;
      if (ca[ax] != cb[ax]) return ca[ax] < cb[ax];
    }
    return a < b;
  });
  std::size_t n = ids.size();
  for (int p = 0; p < pieces; ++p) {
    std::size_t lo = n * p / pieces, hi = n * (p + 1) / pieces;
    std::vector<int> run(ids.begin() + lo, ids.begin() + hi);
    split_recursive(centroid, std::move(run), plan, level + 1, base * pieces + p, part);
  }
}

// Hands `group` (all currently in `from`) to the part sharing most faces with
// it. Returns false if it touches no other part.
bool move_group(const Adjacency& adj, const std::vector<int>& group, int from,
                std::vector<int>& part) {
  std::map<int, int> shared;
  for (int t : group)
    for (int n : adj[t])
      if (n >= 0 && part[n] != from) ++shared[part[n]];
  if (shared.empty()) return false;
  int best = -1, bestCount = -1;
  for (auto [p, c] : shared)
    if (c > bestCount) best = p, bestCount = c;  // map order breaks ties low
  for (int t : group) part[t] = best;
  return true;
}

// Face-connected pieces of `tets` (global ids) under the global adjacency.
std::vector<std::vector<int>> pieces_of(const Adjacency& adj, const std::vector<int>& tets) {
  std::unordered_map<int, int> pos;
  for (std::size_t i = 0; i < tets.size(); ++i) pos.emplace(tets[i], static_cast<int>(i));
  std::vector<int> label(tets.size(), -1);
  std::vector<std::vector<int>> out;
  std::vector<int> stack;
  for (std::size_t s = 0; s < tets.size(); ++s) {
    if (label[s] >= 0) continue;
    out.emplace_back();
    label[s] = static_cast<int>(out.size()) - 1;
    stack.push_back(static_cast<int>(s));
    while (!stack.empty()) {
      int i = stack.back();
      stack.pop_back();
      out.back().push_back(tets[i]);
      for (int n : adj[tets[i]]) {
        if (n < 0) continue;
        auto it = pos.find(n);
        if (it != pos.end() && label[it->second] < 0) {
          label[it->second] = label[s];
          stack.push_back(it->second);
        }
      }
    }
  }
  // Largest first; equal sizes keep discovery order (lowest tet id first).
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });
  return out;
}

}  // namespace

void repair_partition(const TetMesh& mesh, std::vector<int>& part, int parts) {
  auto adj = build_adjacency(mesh);
  const int maxRounds = 64 + 8 * parts;
  for (int round = 0; round < maxRounds; ++round) {
    std::vector<std::vector<int>> members(parts);
    for (std::size_t t = 0; t < part.size(); ++t) members[part[t]].push_back(static_cast<int>(t));
    bool dirty = false, moved = false;
    for (int s = 0; s < parts; ++s) {
      if (members[s].empty())
        throw Error(ErrorCode::UnsplittableDomain, "subdomain " + std::to_string(s) + " is empty");
      auto comps = pieces_of(adj, members[s]);
      if (comps.size() > 1) {
        dirty = true;
        for (std::size_t c = 1; c < comps.size(); ++c) moved |= move_group(adj, comps[c], s, part);
        continue;
      }
      auto rep = check_simple_connectivity(mesh, members[s]);
      if (rep.connected) continue;
      dirty = true;
      // Star of the first pinch; every fan but the largest moves out.
      std::vector<int> star;
      for (int t : members[s]) {
        const auto& v = mesh.tets[t].v;
        auto has = [&](int x) { return std::find(v.begin(), v.end(), x) != v.end(); };
        bool in = rep.pinchVertices.empty()
                      ? has(rep.pinchEdges[0].first) && has(rep.pinchEdges[0].second)
                      : has(rep.pinchVertices[0]);
        if (in) star.push_back(t);
      }
      auto fans = pieces_of(adj, star);
      for (std::size_t c = 1; c < fans.size(); ++c) moved |= move_group(adj, fans[c], s, part);
    }
    if (!dirty) return;
    if (!moved) break;
  }
  throw Error(ErrorCode::UnsplittableDomain, "could not restore simple connectivity");
}

std::vector<int> partition_tets(const TetMesh& mesh, const DecompositionPlan& plan) {
  plan.validate();
  if (static_cast<std::size_t>(plan.targetCount) > mesh.tets.size())
    throw Error(ErrorCode::UnsplittableDomain, "more subdomains than tets");
  std::vector<Vec3> centroid(mesh.tets.size());
  for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
    Vec3 c = Vec3::Zero();
    for (int v : mesh.tets[t].v) c += mesh.pos(v);
    centroid[t] = c / 4.0;
  }
  std::vector<int> ids(mesh.tets.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::vector<int> part(mesh.tets.size(), 0);
  split_recursive(centroid, std::move(ids), plan, 0, 0, part);
  if (plan.targetCount > 1) repair_partition(mesh, part, plan.targetCount);
  return part;
}

TetMesh extract_submesh(const TetMesh& mesh, std::span<const int> tets, std::vector<int>* origin) {
  std::vector<int> used;
  for (int t : tets)
    for (int v : mesh.tets[t].v) used.push_back(v);
  std::sort(used.begin(), used.end());
  used.erase(std::unique(used.begin(), used.end()), used.end());
  std::unordered_map<int, int> local;
  local.reserve(used.size());
  TetMesh out;
  for (int v : used) {
    local.emplace(v, static_cast<int>(out.vertices.size()));
    out.vertices.push_back(mesh.vertices[v]);
  }
  std::unordered_map<FaceKey, int, TriKeyHash<int>> facetOf;
  for (std::size_t f = 0; f < mesh.facets.size(); ++f) {
    const auto& v = mesh.facets[f].v;
    facetOf.emplace(FaceKey(v[0], v[1], v[2]), static_cast<int>(f));
  }
  std::vector<int> facetIds;
  for (int t : tets) {
    Tetrahedron nt = mesh.tets[t];
    for (int f = 0; f < 4; ++f) {
      auto it = facetOf.find(face_key(mesh.tets[t], f));
      if (it != facetOf.end()) facetIds.push_back(it->second);
    }
    for (int& v : nt.v) v = local.at(v);
    out.tets.push_back(nt);
  }
  std::sort(facetIds.begin(), facetIds.end());
  facetIds.erase(std::unique(facetIds.begin(), facetIds.end()), facetIds.end());
  for (int f : facetIds) {
    BoundaryFacet bf = mesh.facets[f];
    for (int& v : bf.v) v = local.at(v);
    out.facets.push_back(bf);
  }
  if (origin) *origin = std::move(used);
  return out;
}

void assign_gids(std::vector<Subdomain>& subs) {
  using Key = std::array<double, 3>;
  std::map<Key, GlobalId> seen;
  std::map<GlobalId, std::vector<int>> holders;
  for (auto& s : subs) {
    std::int64_t next = 0;
    for (auto& v : s.mesh.vertices) {
      Key k{v.pos.x(), v.pos.y(), v.pos.z()};
      auto [it, fresh] = seen.emplace(k, GlobalId{s.id, next});
      if (fresh) ++next;
      v.gid = it->second;
      holders[v.gid].push_back(s.id);
    }
    s.nextLocalId = next;
  }
  for (auto& s : subs) {
    s.sharers.clear();
    for (const auto& v : s.mesh.vertices) {
      const auto& h = holders[v.gid];
      if (h.size() < 2) continue;
      auto& others = s.sharers[v.gid];
      for (int o : h)
        if (o != s.id) others.push_back(o);
    }
    s.rebuild_duplicates();
    s.rebuild_neighbors();
  }
}

std::vector<Subdomain> decompose(const TetMesh& mesh, const DecompositionPlan& plan) {
  auto part = partition_tets(mesh, plan);
  std::vector<std::vector<int>> members(plan.targetCount);
  for (std::size_t t = 0; t < part.size(); ++t) members[part[t]].push_back(static_cast<int>(t));
  std::vector<Subdomain> subs(plan.targetCount);
  for (int s = 0; s < plan.targetCount; ++s) {
    subs[s].id = s;
    subs[s].mesh = extract_submesh(mesh, members[s]);
    for (auto& t : subs[s].mesh.tets) t.flags = 0;
    for (auto& v : subs[s].mesh.vertices) v.flags = 0;
    subs[s].mesh.mark_boundary_vertices();
  }
  assign_gids(subs);
  for (auto& s : subs) classify_interface(s);
  return subs;
}

std::vector<std::set<int>> build_neighbor_graph(std::span<const Subdomain> subs) {
  std::map<GlobalId, std::vector<int>> holders;
  for (const auto& s : subs)
    for (const auto& v : s.mesh.vertices) holders[v.gid].push_back(s.id);
  int n = 0;
  for (const auto& s : subs) n = std::max(n, s.id + 1);
  std::vector<std::set<int>> graph(n);
  for (auto& [g, h] : holders) {
    std::sort(h.begin(), h.end());
    h.erase(std::unique(h.begin(), h.end()), h.end());
    for (int a : h)
      for (int b : h)
        if (a != b) graph[a].insert(b);
  }
  return graph;
}

}  // namespace tetshift
