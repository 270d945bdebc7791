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
#include "tetshift/connectivity.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "tetshift/adjacency.hpp"

namespace tetshift {

namespace {

// Number of face-connected pieces among "members" (positions into adj).
int count_pieces(const Adjacency& adj, const std::vector<int>& members, std::vector<int>& mark,
                 int stamp) {
  for (int m : members) mark[m] = stamp;
  int pieces = 0;
  std::vector<int> stack;
  for (int m : members) {
    if (mark[m] != stamp) continue;
    ++pieces;
    mark[m] = stamp + 1;
    stack.push_back(m);
    while (!stack.empty()) {
      int t = stack.back();
      stack.pop_back();
      for (int n : adj[t])
        if (n >= 0 && mark[n] == stamp) {
          mark[n] = stamp + 1;
          stack.push_back(n);
        }
    }
  }
  return pieces;
}

}  // namespace

int label_components(const TetMesh& mesh, std::span<const int> tets, std::vector<int>& label) {
  auto adj = build_adjacency(mesh, tets);
  label.assign(tets.size(), -1);
  int count = 0;
  std::vector<int> stack;
  for (std::size_t s = 0; s < tets.size(); ++s) {
    if (label[s] >= 0) continue;
    label[s] = count;
    stack.push_back(static_cast<int>(s));
    while (!stack.empty()) {
      int t = stack.back();
      stack.pop_back();
      for (int n : adj[t])
        if (n >= 0 && label[n] < 0) {
          label[n] = count;
          stack.push_back(n);
        }
    }
    ++count;
  }
  return count;
}

ConnectivityReport check_simple_connectivity(const TetMesh& mesh, std::span<const int> tets) {
  ConnectivityReport report;
  if (tets.empty()) return report;
  auto adj = build_adjacency(mesh, tets);

  std::vector<int> mark(tets.size(), 0);
  std::vector<int> all(tets.size());
  std::iota(all.begin(), all.end(), 0);
  report.components = count_pieces(adj, all, mark, 1);
  int stamp = 3;

  std::map<int, std::vector<int>> vstar;
  std::map<EdgeKey, std::vector<int>> estar;
  for (std::size_t i = 0; i < tets.size(); ++i) {
    const auto& t = mesh.tets[tets[i]];
    for (int v : t.v) vstar[v].push_back(static_cast<int>(i));
    for (const auto& e : kTetEdge) estar[EdgeKey(t.v[e[0]], t.v[e[1]])].push_back(static_cast<int>(i));
  }
  for (const auto& [v, members] : vstar) {
    if (count_pieces(adj, members, mark, stamp) > 1) report.pinchVertices.push_back(v);
    stamp += 2;
  }
  for (const auto& [e, members] : estar) {
    if (count_pieces(adj, members, mark, stamp) > 1) report.pinchEdges.emplace_back(e.v[0], e.v[1]);
    stamp += 2;
  }
  report.connected =
      report.components == 1 && report.pinchVertices.empty() && report.pinchEdges.empty();
  return report;
}

ConnectivityReport check_simple_connectivity(const TetMesh& mesh) {
  std::vector<int> all(mesh.tets.size());
  std::iota(all.begin(), all.end(), 0);
  return check_simple_connectivity(mesh, all);
}

}  // namespace tetshift
