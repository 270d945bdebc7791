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

#include <map>
#include <sstream>

#include "support.hpp"
#include "tetshift/adjacency.hpp"
#include "tetshift/connectivity.hpp"
#include "tetshift/decomp.hpp"
#include "tetshift/error.hpp"
#include "tetshift/merge.hpp"
#include "tetshift/serialize.hpp"

namespace tetshift {
namespace {

using testing::regular_tet;

TetMesh two_tets(std::array<int, 4> a, std::array<int, 4> b, std::vector<Vec3> pts) {
  TetMesh m;
  for (const auto& p : pts) {
    Vertex v;
    v.pos = p;
    m.vertices.push_back(v);
  }
  Tetrahedron t;
  for (auto q : {a, b}) {
    t.v = q;
    m.tets.push_back(t);
    if (m.volume(static_cast<int>(m.tets.size()) - 1) < 0) std::swap(m.tets.back().v[0], m.tets.back().v[1]);
  }
  return m;
}

TEST(Adjacency, MatchesBruteForceFaceMap) {
  auto m = make_cube_mesh(3, 1.0, 0.1, 3);
  auto adj = build_adjacency(m);
  std::map<std::array<int, 3>, std::vector<int>> faces;
  for (int t = 0; t < static_cast<int>(m.tets.size()); ++t)
    for (int f = 0; f < 4; ++f) {
      std::array<int, 3> k{m.tets[t].v[kTetFace[f][0]], m.tets[t].v[kTetFace[f][1]],
                           m.tets[t].v[kTetFace[f][2]]};
      std::sort(k.begin(), k.end());
      faces[k].push_back(t);
    }
  std::size_t boundary = 0;
  for (int t = 0; t < static_cast<int>(m.tets.size()); ++t)
    for (int f = 0; f < 4; ++f) {
      std::array<int, 3> k{m.tets[t].v[kTetFace[f][0]], m.tets[t].v[kTetFace[f][1]],
                           m.tets[t].v[kTetFace[f][2]]};
      std::sort(k.begin(), k.end());
      const auto& users = faces[k];
      if (users.size() == 1) {
        EXPECT_EQ(adj[t][f], -1);
        ++boundary;
      } else {
        ASSERT_EQ(users.size(), 2u);
        EXPECT_EQ(adj[t][f], users[0] == t ? users[1] : users[0]);
      }
    }
  EXPECT_EQ(boundary, m.facets.size());
}

TEST(Adjacency, ThreeTetsOnOneFaceThrow) {
  auto m = two_tets({0, 1, 2, 3}, {0, 1, 2, 4},
                    {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, 0, -1}});
  Tetrahedron t;
  t.v = {0, 1, 2, 3};
  m.tets.push_back(t);
  EXPECT_THROW(
      {
        try {
          build_adjacency(m);
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), ErrorCode::NonManifoldFace);
          throw;
        }
      },
      Error);
}

TEST(Adjacency, CubeSatisfiesEulerCharacteristicOfABall) {
  for (int n : {1, 2, 4}) {
    auto m = make_cube_mesh(n);
    auto edges = unique_edges(m);
    std::set<std::array<int, 3>> faces;
    for (const auto& t : m.tets)
      for (int f = 0; f < 4; ++f) {
        std::array<int, 3> k{t.v[kTetFace[f][0]], t.v[kTetFace[f][1]], t.v[kTetFace[f][2]]};
        std::sort(k.begin(), k.end());
        faces.insert(k);
      }
    long chi = static_cast<long>(m.vertices.size()) - static_cast<long>(edges.size()) +
               static_cast<long>(faces.size()) - static_cast<long>(m.tets.size());
    EXPECT_EQ(chi, 1) << "n=" << n;
  }
}

TEST(Mesh, CubeVolumeAndOrientation) {
  auto m = make_cube_mesh(4, 2.0, 0.2, 9);
  EXPECT_NEAR(m.total_volume(), 8.0, 1e-12);
  for (int t = 0; t < static_cast<int>(m.tets.size()); ++t) EXPECT_GT(m.volume(t), 0.0);
  EXPECT_EQ(m.tets.size(), 6u * 64u);
  EXPECT_EQ(m.facets.size(), 2u * 6u * 16u);
}

TEST(Mesh, CompactVerticesDropsUnused) {
  auto m = regular_tet();
  Vertex extra;
  extra.pos = Vec3(5, 5, 5);
  m.vertices.insert(m.vertices.begin(), extra);
  for (auto& t : m.tets)
    for (int& v : t.v) ++v;
  for (auto& f : m.facets)
    for (int& v : f.v) ++v;
  double vol = m.total_volume();
  m.compact_vertices();
  EXPECT_EQ(m.vertices.size(), 4u);
  EXPECT_NEAR(m.total_volume(), vol, 1e-15);
  for (const auto& f : m.facets)
    for (int v : f.v) EXPECT_LT(v, 4);
}

TEST(Connectivity, FaceVertexAndEdgeContacts) {
  std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, 0, -1},
                        {-1, 0, 0}, {0, -1, 0}, {-1, -1, -1}, {1, 1, -1}};
  // shared face 0,1,2
  auto face = two_tets({0, 1, 2, 3}, {0, 1, 2, 4}, pts);
  auto r = check_simple_connectivity(face);
  EXPECT_TRUE(r.connected);
  EXPECT_EQ(r.components, 1);

  // shared vertex 0 only
  auto point = two_tets({0, 1, 2, 3}, {0, 5, 6, 7}, pts);
  r = check_simple_connectivity(point);
  EXPECT_FALSE(r.connected);
  EXPECT_EQ(r.components, 2);

  // shared edge 0-1 only
  auto edge = two_tets({0, 1, 2, 3}, {0, 1, 4, 8}, pts);
  r = check_simple_connectivity(edge);
  EXPECT_FALSE(r.connected);
}

TEST(Connectivity, PinchVertexWithinOneComponent) {
  // Cells (0,0,0) and (1,1,1) of a 3^3 cube meet at the vertex (1,1,1)/3.
  // A face path through cells that avoid that vertex joins them, so the set
  // is one component yet pinched there.
  auto m = make_cube_mesh(3);
  auto cell = [&](int i, int j, int k) {
    std::vector<int> out;
    for (int t = 0; t < static_cast<int>(m.tets.size()); ++t) {
      Vec3 c = Vec3::Zero();
      for (int v : m.tets[t].v) c += m.pos(v);
      c /= 4.0;
      if (int(c.x() * 3) == i && int(c.y() * 3) == j && int(c.z() * 3) == k) out.push_back(t);
    }
    return out;
  };
  std::vector<int> set;
  for (auto [i, j, k] : std::vector<std::array<int, 3>>{
           {0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {2, 1, 0}, {2, 2, 0}, {2, 2, 1}, {1, 2, 1}, {1, 1, 1}}) {
    auto c = cell(i, j, k);
    ASSERT_EQ(c.size(), 6u);
    set.insert(set.end(), c.begin(), c.end());
  }
  auto r = check_simple_connectivity(m, set);
  EXPECT_EQ(r.components, 1);
  EXPECT_FALSE(r.connected);
  EXPECT_FALSE(r.pinchVertices.empty() && r.pinchEdges.empty());
  EXPECT_TRUE(check_simple_connectivity(m).connected);
}

TEST(Connectivity, LabelComponentsCountsPieces) {
  auto m = make_cube_mesh(2);
  std::vector<int> all(m.tets.size());
  for (int i = 0; i < static_cast<int>(all.size()); ++i) all[i] = i;
  std::vector<int> label;
  EXPECT_EQ(label_components(m, all, label), 1);
  ASSERT_EQ(label.size(), all.size());
}

Subdomain sample_subdomain() {
  auto m = make_cube_mesh(3, 1.0, 0.1, 5);
  auto subs = decompose(m, DecompositionPlan::parse(2, "xyz", ""));
  return subs[1];
}

TEST(Serialize, RoundTripIsStructurallyEqual) {
  auto s = sample_subdomain();
  s.miiPassCount = 3;
  s.state.miiRound = 2;
  s.state.phase = SubdomainState::Phase::MIIAdapted;
  auto back = unpack(pack(s));
  EXPECT_TRUE(structurally_equal(s, back));
  EXPECT_EQ(pack(back), pack(s));
}

TEST(Serialize, EveryTruncationIsRejected) {
  auto bytes = pack(sample_subdomain());
  for (std::size_t n = 0; n < bytes.size(); n += 1 + n / 64) {
    std::span<const std::uint8_t> cut(bytes.data(), n);
    try {
      unpack(cut);
      ADD_FAILURE() << "accepted a prefix of " << n << " bytes";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::MalformedBuffer);
    }
  }
  auto longer = bytes;
  longer.push_back(0);
  EXPECT_THROW(unpack(longer), Error);
}

TEST(Serialize, CorruptIndicesAreRejected) {
  auto s = regular_tet();
  Subdomain sub;
  sub.mesh = s;
  sub.mesh.tets[0].v[3] = 17;
  EXPECT_THROW(unpack(pack(sub)), Error);
}

TEST(Serialize, ShipmentRoundTrip) {
  Shipment s;
  s.sender = 2;
  s.receiver = 5;
  Shipment::ShipVertex v;
  v.gid = {2, 7};
  v.pos = Vec3(0.25, -1.5, 3.0);
  v.flags = vflag::kInterface;
  v.holders = {2, 5, 9};
  s.vertices = {v, v, v, v};
  for (int i = 0; i < 4; ++i) s.vertices[i].gid.local = i;
  s.tets = {{0, 1, 2, 3}};
  s.facets = {BoundaryFacet{{0, 1, 2}, 4}};
  auto back = unpack_shipment(pack(s));
  EXPECT_EQ(back.sender, 2);
  EXPECT_EQ(back.receiver, 5);
  ASSERT_EQ(back.vertices.size(), 4u);
  EXPECT_EQ(back.vertices[2].holders, (std::vector<int>{2, 5, 9}));
  EXPECT_EQ(back.vertices[3].gid, (GlobalId{2, 3}));
  EXPECT_EQ(back.vertices[0].pos, v.pos);
  EXPECT_EQ(back.tets, s.tets);
  EXPECT_EQ(back.facets[0].tag, 4);
}

TEST(MeshIo, WriteReadRoundTripKeepsGids) {
  auto s = sample_subdomain();
  std::stringstream ss;
  ss.precision(17);
  write_mesh(ss, s.mesh, true);
  auto back = read_mesh(ss);
  ASSERT_EQ(back.vertices.size(), s.mesh.vertices.size());
  for (std::size_t i = 0; i < back.vertices.size(); ++i) {
    EXPECT_EQ(back.vertices[i].gid, s.mesh.vertices[i].gid);
    EXPECT_EQ(back.vertices[i].pos, s.mesh.vertices[i].pos);
  }
  EXPECT_EQ(testing::geo_tets(back), testing::geo_tets(s.mesh));
  EXPECT_EQ(back.facets.size(), s.mesh.facets.size());
}

TEST(MeshIo, MalformedInputNamesTheProblem) {
  std::stringstream ss("4 1 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n0 1 2 9\n");
  EXPECT_THROW(read_mesh(ss), Error);
  std::stringstream trunc("4 1 0\n0 0 0\n1 0 0\n");
  EXPECT_THROW(read_mesh(trunc), Error);
}

TEST(Merge, InteriorAfterScatterIsUnfrozen) {
  auto m = make_cube_mesh(2);
  auto subs = decompose(m, DecompositionPlan::parse(2, "xyz", ""));
  auto& a = subs[0];
  auto& b = subs[1];
  // Ship all of b into a: nothing remains shared, nothing stays frozen.
  Shipment s;
  s.sender = b.id;
  s.receiver = a.id;
  for (const auto& v : b.mesh.vertices) s.vertices.push_back({v.gid, v.pos, v.flags, {a.id}});
  for (const auto& t : b.mesh.tets) s.tets.push_back(t.v);
  s.facets = b.mesh.facets;
  merge_scatter(a, s);
  EXPECT_EQ(a.mesh.tets.size(), m.tets.size());
  EXPECT_NEAR(a.mesh.total_volume(), 1.0, 1e-12);
  EXPECT_TRUE(a.sharers.empty());
  EXPECT_TRUE(a.neighbors.empty());
  for (const auto& t : a.mesh.tets) EXPECT_FALSE(t.frozen());
  EXPECT_TRUE(check_simple_connectivity(a.mesh).connected);
}

TEST(Merge, OverlapIsAConformityBreakAndLeavesReceiverAlone) {
  auto m = make_cube_mesh(2);
  auto subs = decompose(m, DecompositionPlan::parse(2, "xyz", ""));
  auto& a = subs[0];
  auto before = pack(a);
  // Re-ship one of a's own tets: its faces would be used three times.
  Shipment s;
  s.sender = 1;
  s.receiver = a.id;
  for (int i = 0; i < 4; ++i) {
    const auto& v = a.mesh.vertices[a.mesh.tets[0].v[i]];
    s.vertices.push_back({v.gid, v.pos, v.flags, {a.id}});
  }
  s.tets = {{0, 1, 2, 3}};
  try {
    merge_scatter(a, s);
    ADD_FAILURE() << "overlapping shipment accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConformityBreak);
  }
  EXPECT_EQ(pack(a), before);
}

TEST(Subdomain, SharedGidsAndClassification) {
  auto m = make_cube_mesh(3);
  auto subs = decompose(m, DecompositionPlan::parse(3, "xyz", ""));
  const auto& mid = subs[1];
  EXPECT_EQ(mid.neighbors, (std::set<int>{0, 2}));
  auto shared = mid.shared_gids();
  for (const auto& v : mid.mesh.vertices) EXPECT_EQ(v.interface(), shared.count(v.gid) == 1);
  for (const auto& t : mid.mesh.tets) {
    bool touches = false;
    for (int v : t.v) touches = touches || mid.mesh.vertices[v].interface();
    EXPECT_EQ(t.frozen(), touches);
    EXPECT_EQ(t.interface(), touches);
  }
}

}  // namespace
}  // namespace tetshift
