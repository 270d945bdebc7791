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
#include <atomic>
#include <cstdint>
#include <functional>
#include <vector>

#include "tetshift/kernel/locks.hpp"
#include "tetshift/mesh.hpp"
#include "tetshift/metric.hpp"

namespace tetshift::kernel {

struct TetRec {
  std::array<int, 4> v{};
  // Neighbor across face f (opposite v[f]); -1 on the mesh or subdomain boundary.
  std::array<int, 4> nbr{-1, -1, -1, -1};
  // Geometry tag of face f when it is a boundary facet, else -1.
  std::array<int, 4> tag{-1, -1, -1, -1};
  std::uint8_t flags = 0;
  bool buffer = false;
  bool dead = false;
  int origin = -1;  // index in the source mesh, -1 if created here
};

struct VertRec {
  Vec3 pos = Vec3::Zero();
  MetricTensor metric;
  GlobalId gid;
  std::uint8_t flags = 0;
  bool dead = false;
  int origin = -1;
  std::atomic<int> hint{-1};  // some live tet containing this vertex, best effort
};

// Mutable working copy of a subdomain mesh with face adjacency. Elements are
// only appended during a sweep; dead slots are reclaimed by compact().
// Fields of a tet, and of any vertex it uses, may only be touched while the
// tet's lock is held.
class WorkMesh {
 public:
  using MetricFn = std::function<MetricTensor(const Vec3&)>;

  // `vertexMetrics` (one per source vertex) seeds the metric; new points are
  // sampled with `metricAt`.
  WorkMesh(const TetMesh& mesh, std::vector<MetricTensor> vertexMetrics, MetricFn metricAt);

  ChunkedVec<TetRec> tets;
  ChunkedVec<VertRec> verts;
  ElementLocks locks;

  MetricTensor metric_at(const Vec3& x) const { return metricAt_(x); }

  int new_tet();
  int new_vertex();

  // Single-threaded. Drops dead elements keeping survivors in order, rebuilds
  // vertex hints and lock words.
  void compact();
  // Flags live tets within `layers` face hops of a frozen tet.
  void mark_buffer(int layers);

  std::size_t live_tets() const;
  std::size_t live_vertices() const;

  // Survivors in order; boundary facets that existed before keep their
  // position, new ones follow in tet order.
  TetMesh to_mesh() const;

  bool frozen(int t) const { return tets[t].flags & tflag::kFrozen; }
  double volume(int t) const;

 private:
  MetricFn metricAt_;
  std::vector<BoundaryFacet> sourceFacets_;
};

}  // namespace tetshift::kernel
