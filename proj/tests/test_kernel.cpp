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

#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "support.hpp"
#include "tetshift/adjacency.hpp"
#include "tetshift/conformity.hpp"
#include "tetshift/connectivity.hpp"
#include "tetshift/decomp.hpp"
#include "tetshift/error.hpp"
#include "tetshift/kernel/adapt.hpp"
#include "tetshift/kernel/locks.hpp"
#include "tetshift/kernel/operators.hpp"
#include "tetshift/kernel/work_mesh.hpp"
#include "tetshift/mesh_io.hpp"
#include "tetshift/orchestrator/invariants.hpp"
#include "tetshift/serialize.hpp"

namespace tetshift::kernel {
namespace {

TEST(Locks, CavityIsAllOrNothing) {
  ElementLocks locks;
  locks.ensure_size(10);
  std::vector<int> a{3, 1, 2}, b{4, 2, 5};
  EXPECT_TRUE(locks.try_lock_cavity(a, 0));
  EXPECT_FALSE(locks.try_lock_cavity(b, 1));
  EXPECT_EQ(locks.word(4), 0u);
  EXPECT_EQ(locks.word(5), 0u);
  EXPECT_TRUE(locks.held_by(2, 0));
  locks.rollback(a);
  EXPECT_TRUE(locks.try_lock_cavity(b, 1));
  EXPECT_FALSE(locks.try_lock_cavity(std::vector<int>{7}, 2, [](int e) { return e == 7; }));
  EXPECT_EQ(locks.word(7), 0u);
}

TEST(Locks, ConcurrentCavitiesNeverOverlap) {
  ElementLocks locks;
  constexpr int kElems = 64;
  locks.ensure_size(kElems);
  std::vector<std::atomic<int>> inside(kElems);
  std::atomic<bool> clash{false};
  std::atomic<long> wins{0};
  auto worker = [&](int owner) {
    std::mt19937 rng(owner);
    std::uniform_int_distribution<int> pick(0, kElems - 1);
    for (int i = 0; i < 20000; ++i) {
      std::vector<int> cav{pick(rng), pick(rng), pick(rng), pick(rng)};
      if (!locks.try_lock_cavity(cav, owner)) continue;
      std::sort(cav.begin(), cav.end());
      cav.erase(std::unique(cav.begin(), cav.end()), cav.end());
      for (int e : cav)
        if (inside[e].fetch_add(1) != 0) clash = true;
      for (int e : cav) inside[e].fetch_sub(1);
      locks.rollback(cav);
      ++wins;
    }
  };
  std::vector<std::thread> ts;
  for (int o = 0; o < 4; ++o) ts.emplace_back(worker, o);
  for (auto& t : ts) t.join();
  EXPECT_FALSE(clash);
  EXPECT_GT(wins.load(), 0);
  for (int e = 0; e < kElems; ++e) EXPECT_EQ(locks.word(e), 0u);
}

TEST(ChunkedVec, ConcurrentAppendsKeepEveryElement) {
  ChunkedVec<int, 4> v;
  std::vector<std::thread> ts;
  for (int o = 0; o < 4; ++o)
    ts.emplace_back([&, o] {
      for (int i = 0; i < 1000; ++i) v[v.emplace()] = o * 1000 + i + 1;
    });
  for (auto& t : ts) t.join();
  ASSERT_EQ(v.size(), 4000u);
  std::set<int> seen;
  for (std::size_t i = 0; i < v.size(); ++i) seen.insert(v[i]);
  EXPECT_EQ(seen.size(), 4000u);
  EXPECT_EQ(*seen.begin(), 1);
}

int vertex_at(const TetMesh& m, Vec3 p) {
  for (int i = 0; i < static_cast<int>(m.vertices.size()); ++i)
    if ((m.vertices[i].pos - p).norm() < 1e-12) return i;
  return -1;
}

WorkMesh work_mesh(const TetMesh& m, double h) {
  auto f = uniform_metric(h);
  return WorkMesh(m, sample_vertices(m, f), [f](const Vec3& x) { return f.eval(x); });
}

TEST(Operators, SplitOfALongEdgeDoublesItsShell) {
  auto m = make_cube_mesh(1);
  auto wm = work_mesh(m, 0.5);
  OpParams p;
  std::atomic<std::uint64_t> stamp{0};
  Operators ops(wm, p, 0, stamp);
  int a = vertex_at(m, Vec3(0, 0, 0)), b = vertex_at(m, Vec3(1, 1, 1));
  ASSERT_GE(a, 0);
  ASSERT_GE(b, 0);
  ASSERT_EQ(ops.split(a, b), OpStatus::Committed);
  wm.compact();
  auto out = wm.to_mesh();
  EXPECT_EQ(out.tets.size(), 12u);
  EXPECT_EQ(out.vertices.size(), 9u);
  EXPECT_NEAR(out.total_volume(), 1.0, 1e-12);
  EXPECT_GE(vertex_at(out, Vec3(0.5, 0.5, 0.5)), 0);
  for (int t = 0; t < 12; ++t) EXPECT_GT(out.volume(t), 0.0);
  EXPECT_TRUE(check_simple_connectivity(out).connected);
}

TEST(Operators, ShortEdgeIsNotSplit) {
  auto m = make_cube_mesh(1);
  auto wm = work_mesh(m, 2.0);
  OpParams p;
  std::atomic<std::uint64_t> stamp{0};
  Operators ops(wm, p, 0, stamp);
  EXPECT_EQ(ops.split(vertex_at(m, Vec3(0, 0, 0)), vertex_at(m, Vec3(1, 1, 1))), OpStatus::Rejected);
  EXPECT_EQ(wm.live_tets(), 6u);
}

TEST(Operators, Swap23CommitsExactlyWhenItImprovesAConvexPair) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-0.35, 0.35), hgt(0.05, 0.7);
  int committed = 0, rejected = 0;
  for (int trial = 0; trial < 300; ++trial) {
    TetMesh m;
    std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}, {0.5, 0.85, 0},
                          {0.5 + u(rng), 0.3 + u(rng), hgt(rng)},
                          {0.5 + u(rng), 0.3 + u(rng), -hgt(rng)}};
    for (const auto& p : pts) {
      Vertex v;
      v.pos = p;
      m.vertices.push_back(v);
    }
    Tetrahedron t;
    t.v = {0, 1, 2, 3};
    m.tets.push_back(t);
    t.v = {0, 2, 1, 4};
    m.tets.push_back(t);
    ASSERT_GT(m.volume(0), 0);
    ASSERT_GT(m.volume(1), 0);

    // Oracle: the segment between the apexes must cross the triangle, the
    // new edge must be short enough, and the worst shape must improve.
    const Vec3 &a = pts[3], &b = pts[4];
    double s = a.z() / (a.z() - b.z());
    Vec3 x = a + s * (b - a);
    auto side = [](const Vec3& p, const Vec3& q, const Vec3& r) {
      return (q.x() - p.x()) * (r.y() - p.y()) - (q.y() - p.y()) * (r.x() - p.x());
    };
    double d0 = side(pts[0], pts[1], x), d1 = side(pts[1], pts[2], x), d2 = side(pts[2], pts[0], x);
    double margin = std::min({std::abs(d0), std::abs(d1), std::abs(d2)});
    bool inside = d0 > 0 && d1 > 0 && d2 > 0;
    double oldMin = std::min(mean_ratio_signed({pts[0], pts[1], pts[2], pts[3]}, {}),
                             mean_ratio_signed({pts[0], pts[2], pts[1], pts[4]}, {}));
    double newMin = 1.0;
    for (int e = 0; e < 3; ++e) {
      std::array<Vec3, 4> q{a, b, pts[e], pts[(e + 1) % 3]};
      newMin = std::min(newMin, std::abs(mean_ratio_signed(q, {})));
    }
    bool shortEdge = (b - a).norm() <= std::sqrt(2.0);
    if (margin < 0.02 || std::abs(newMin - oldMin) < 1e-6 || newMin < 1e-3) continue;
    bool expect = inside && shortEdge && newMin > oldMin;

    auto wm = work_mesh(m, 1.0);
    OpParams p;
    std::atomic<std::uint64_t> stamp{0};
    Operators ops(wm, p, 0, stamp);
    int f = 3;  // face opposite vertex 3 is the shared triangle
    auto st = ops.swap23(0, f);
    EXPECT_EQ(st == OpStatus::Committed, expect) << "trial " << trial;
    wm.compact();
    auto out = wm.to_mesh();
    EXPECT_NEAR(out.total_volume(), m.total_volume(), 1e-12);
    if (st == OpStatus::Committed) {
      EXPECT_EQ(out.tets.size(), 3u);
      ++committed;
    } else {
      EXPECT_EQ(out.tets.size(), 2u);
      ++rejected;
    }
  }
  EXPECT_GT(committed, 10);
  EXPECT_GT(rejected, 10);
}

Subdomain single(const TetMesh& m) {
  return decompose(m, DecompositionPlan::parse(1, "xyz", ""))[0];
}

void expect_valid_domain(const TetMesh& out, double volume) {
  EXPECT_NEAR(out.total_volume(), volume, 1e-9 * volume);
  for (int t = 0; t < static_cast<int>(out.tets.size()); ++t) EXPECT_GT(out.volume(t), 0.0);
  EXPECT_TRUE(check_simple_connectivity(out).connected);
  // Every open face is a boundary facet and lies on the cube surface.
  auto adj = build_adjacency(out);
  std::size_t open = 0;
  for (const auto& a : adj)
    for (int n : a) open += n < 0;
  EXPECT_EQ(open, out.facets.size());
  double area = 0;
  for (const auto& f : out.facets) {
    const Vec3 &p = out.pos(f.v[0]), &q = out.pos(f.v[1]), &r = out.pos(f.v[2]);
    area += 0.5 * (q - p).cross(r - p).norm();
    bool onFace = false;
    for (int ax = 0; ax < 3; ++ax)
      for (double c : {0.0, 1.0})
        onFace = onFace || (std::abs(p[ax] - c) < 1e-12 && std::abs(q[ax] - c) < 1e-12 &&
                            std::abs(r[ax] - c) < 1e-12);
    EXPECT_TRUE(onFace);
  }
  EXPECT_NEAR(area, 6.0, 1e-9);
}

TEST(Adapt, SingleDomainReachesTheMetricAndStaysValid) {
  auto m = make_cube_mesh(5, 1.0, 0.15, 3);
  auto f = uniform_metric(0.12);
  auto s = single(m);
  auto before = quality_report(s.mesh, f);
  AdaptConfig cfg;
  for (auto ph : {AdaptConfig::Phase::InitialInterior, AdaptConfig::Phase::FinalCollapse,
                  AdaptConfig::Phase::QualityImprovement}) {
    cfg.phase = ph;
    adapt(s, f, cfg, 1);
  }
  auto after = quality_report(s.mesh, f);
  EXPECT_GT(after.unit_band_fraction(), before.unit_band_fraction());
  EXPECT_GT(after.unit_band_fraction(), 0.9);
  EXPECT_GT(after.meanQ, before.meanQ);
  expect_valid_domain(s.mesh, 1.0);
  // New points carry fresh ids from this subdomain.
  std::set<GlobalId> ids;
  for (const auto& v : s.mesh.vertices) {
    EXPECT_TRUE(v.gid.valid());
    EXPECT_TRUE(ids.insert(v.gid).second);
    EXPECT_LT(v.gid.local, s.nextLocalId);
  }
}

TEST(Adapt, FrozenElementsAreUntouchedAndNeighborsStillConform) {
  auto m = make_cube_mesh(6, 1.0, 0.15, 4);
  auto f = uniform_metric(0.1);
  auto subs = decompose(m, DecompositionPlan::parse(2, "xyz", ""));
  for (auto& s : subs) {
    auto hash = frozen_geometry_hash(s.mesh);
    AdaptConfig cfg;
    cfg.seed = 99 + s.id;
    adapt(s, f, cfg, 1);
    EXPECT_EQ(frozen_geometry_hash(s.mesh), hash);
  }
  auto rep = orch::check_global_invariants(subs, 1.0);
  for (const auto& v : rep.violations) ADD_FAILURE() << v;
}

TEST(Adapt, FrozenHashSeesMovedPoints) {
  auto m = make_cube_mesh(3);
  auto subs = decompose(m, DecompositionPlan::parse(2, "xyz", ""));
  auto& s = subs[0];
  auto h = frozen_geometry_hash(s.mesh);
  for (const auto& t : s.mesh.tets)
    if (t.frozen()) {
      s.mesh.vertices[t.v[0]].pos.x() += 1e-9;
      break;
    }
  EXPECT_NE(frozen_geometry_hash(s.mesh), h);
}

TEST(Adapt, OneThreadIsDeterministic) {
  auto m = make_cube_mesh(4, 1.0, 0.2, 5);
  auto f = radial_metric(0.08, 0.3);
  auto a = single(m), b = single(m);
  AdaptConfig cfg;
  cfg.seed = 5;
  adapt(a, f, cfg, 1);
  adapt(b, f, cfg, 1);
  EXPECT_EQ(pack(a), pack(b));
}

TEST(Adapt, FourThreadsStayValid) {
  auto m = make_cube_mesh(5, 1.0, 0.15, 6);
  auto f = linear_boundary_layer_metric(0.03, 0.3, 2);
  auto s = single(m);
  AdaptConfig cfg;
  auto out = adapt(s, f, cfg, 4);
  EXPECT_GT(out.total().committed, 0);
  expect_valid_domain(s.mesh, 1.0);
}

TEST(Adapt, RejectsBadThresholds) {
  AdaptConfig cfg;
  cfg.splitThreshold = 0.9;
  EXPECT_THROW(cfg.validate(), Error);
  AdaptConfig c2;
  c2.collapseThreshold = 1.2;
  EXPECT_THROW(c2.validate(), Error);
}

TEST(Adapt, MiiPassOnlyTouchesWhatNeedsWork) {
  auto m = make_cube_mesh(5, 1.0, 0.15, 3);
  auto f = uniform_metric(0.15);
  auto s = single(m);
  AdaptConfig cfg;
  adapt(s, f, cfg, 1);
  auto once = pack(s);
  // A second MII pass over an adapted mesh must not degrade it.
  auto q0 = quality_report(s.mesh, f);
  cfg.phase = AdaptConfig::Phase::MII;
  adapt(s, f, cfg, 1);
  auto q1 = quality_report(s.mesh, f);
  EXPECT_GE(q1.minQ, q0.minQ - 1e-12);
  expect_valid_domain(s.mesh, 1.0);
  (void)once;
}

}  // namespace
}  // namespace tetshift::kernel
