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

// Builders and brute-force oracles shared by the test binaries. Nothing here
// calls into the code under test except to construct inputs.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "tetshift/mesh.hpp"
#include "tetshift/mesh_io.hpp"
#include "tetshift/metric.hpp"

namespace tetshift::testing {

// One regular tetrahedron with edge length `edge`, positively oriented, with
// its four faces as boundary facets.
inline TetMesh regular_tet(double edge = 1.0) {
  const double s = edge / (2.0 * std::sqrt(2.0));
  TetMesh m;
  for (auto p : {Vec3(1, 1, 1), Vec3(1, -1, -1), Vec3(-1, 1, -1), Vec3(-1, -1, 1)}) {
    Vertex v;
    v.pos = p * s;
    m.vertices.push_back(v);
  }
  Tetrahedron t;
  t.v = {0, 1, 2, 3};
  if (signed_volume(m.pos(0), m.pos(1), m.pos(2), m.pos(3)) < 0) std::swap(t.v[2], t.v[3]);
  m.tets = {t};
  for (int f = 0; f < 4; ++f) {
    BoundaryFacet bf;
    bf.v = {t.v[kTetFace[f][0]], t.v[kTetFace[f][1]], t.v[kTetFace[f][2]]};
    bf.tag = f;
    m.facets.push_back(bf);
  }
  m.mark_boundary_vertices();
  return m;
}

inline std::array<Vec3, 4> regular_tet_points(double edge = 1.0) {
  auto m = regular_tet(edge);
  const auto& q = m.tets[0].v;
  return {m.pos(q[0]), m.pos(q[1]), m.pos(q[2]), m.pos(q[3])};
}

// Random SPD tensor R diag(l) R^T with eigenvalues in [lo, hi].
inline MetricTensor random_spd(std::mt19937_64& rng, double lo = 0.1, double hi = 10.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), e(std::log(lo), std::log(hi));
  Eigen::Quaterniond q(u(rng), u(rng), u(rng), u(rng));
  if (q.norm() < 1e-3) q = Eigen::Quaterniond::Identity();
  q.normalize();
  Eigen::Matrix3d r = q.toRotationMatrix();
  Eigen::Vector3d l(std::exp(e(rng)), std::exp(e(rng)), std::exp(e(rng)));
  return MetricTensor::from_matrix(r * l.asDiagonal() * r.transpose());
}

// Tet corners as coordinate tuples, sorted, so two meshes can be compared as
// multisets of geometric tets without trusting any id scheme.
using GeoTet = std::array<std::array<double, 3>, 4>;

inline GeoTet geo_tet(const TetMesh& m, int t) {
  GeoTet g;
  for (int i = 0; i < 4; ++i) {
    const auto& p = m.pos(m.tets[t].v[i]);
    g[i] = {p.x(), p.y(), p.z()};
  }
  std::sort(g.begin(), g.end());
  return g;
}

inline std::multiset<GeoTet> geo_tets(const TetMesh& m) {
  std::multiset<GeoTet> out;
  for (int t = 0; t < static_cast<int>(m.tets.size()); ++t) out.insert(geo_tet(m, t));
  return out;
}

// Brute-force independence and maximality for a candidate set.
inline bool brute_independent(const std::vector<std::set<int>>& g, const std::set<int>& s) {
  for (int a : s)
    for (int b : s)
      if (a != b && g[a].count(b)) return false;
  return true;
}

inline bool brute_maximal(const std::vector<std::set<int>>& g, const std::set<int>& s,
                          const std::vector<bool>& candidate) {
  for (int v = 0; v < static_cast<int>(g.size()); ++v) {
    if (!candidate[v] || s.count(v)) continue;
    bool blocked = false;
    for (int u : s) blocked = blocked || g[v].count(u);
    if (!blocked) return false;
  }
  return true;
}

inline std::vector<std::set<int>> random_graph(std::mt19937_64& rng, int n, double p) {
  std::vector<std::set<int>> g(n);
  std::bernoulli_distribution edge(p);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      if (edge(rng)) g[a].insert(b), g[b].insert(a);
  return g;
}

// The benchmark used throughout: jittered 10^3 cube, uniform field scaled to
// complexity 1000.
inline TetMesh bench_cube() { return make_cube_mesh(10, 1.0, 0.15, 7); }

}  // namespace tetshift::testing
