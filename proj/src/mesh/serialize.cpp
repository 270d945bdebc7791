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

#include "tetshift/serialize.hpp"

#include "tetshift/error.hpp"

namespace tetshift {

namespace {

void check_index(std::int64_t i, std::size_t n) {
  if (i < 0 || static_cast<std::uint64_t>(i) >= n)
    throw Error(ErrorCode::MalformedBuffer, "index out of range");
}

void check_magic(ByteReader& r, std::uint64_t magic) {
  if (r.u64() != magic) throw Error(ErrorCode::MalformedBuffer, "bad magic");
  if (r.u64() != kFormatVersion) throw Error(ErrorCode::MalformedBuffer, "unsupported version");
}

}  // namespace

Bytes pack(const Subdomain& sub) {
  ByteWriter w;
  const auto& m = sub.mesh;
  w.u64(kSubdomainMagic);
  w.u64(kFormatVersion);
  w.i64(sub.id);
  w.i64(sub.nextLocalId);
  w.i64(static_cast<std::int64_t>(sub.state.phase));
  w.i64(sub.state.miiRound);
  w.i64(sub.miiPassCount);
  w.u64(m.vertices.size());
  w.u64(m.tets.size());
  w.u64(m.facets.size());
  w.u64(sub.duplicates.size());
  w.u64(sub.neighbors.size());
  w.u64(sub.sharers.size());

  for (const auto& v : m.vertices) {
    w.f64(v.pos.x());
    w.f64(v.pos.y());
    w.f64(v.pos.z());
    w.i64(v.gid.owner);
    w.i64(v.gid.local);
    w.u64(v.flags);
  }
  for (const auto& t : m.tets) {
    for (int v : t.v) w.i64(v);
    w.u64(t.flags);
    w.u64(t.lockWord);
  }
  for (const auto& f : m.facets) {
    for (int v : f.v) w.i64(v);
    w.i64(f.tag);
  }
  for (const auto& [g, idx] : sub.duplicates) {
    w.i64(g.owner);
    w.i64(g.local);
    w.i64(idx);
  }
  for (int n : sub.neighbors) w.i64(n);
  for (const auto& [g, others] : sub.sharers) {
    w.i64(g.owner);
    w.i64(g.local);
    w.u64(others.size());
    for (int s : others) w.i64(s);
  }
  return w.take();
}

Subdomain unpack(std::span<const std::uint8_t> buffer) {
  ByteReader r(buffer);
  check_magic(r, kSubdomainMagic);
  Subdomain sub;
  sub.id = static_cast<int>(r.i64());
  sub.nextLocalId = r.i64();
  auto phase = r.i64();
  if (phase < 0 || phase > 2) throw Error(ErrorCode::MalformedBuffer, "bad phase");
  sub.state.phase = static_cast<SubdomainState::Phase>(phase);
  sub.state.miiRound = static_cast<int>(r.i64());
  sub.miiPassCount = static_cast<int>(r.i64());
  auto nv = r.count(0), nt = r.count(0), nf = r.count(0);
  auto nd = r.count(0), nn = r.count(0), ns = r.count(0);
  // Lower bound on the payload size implied by the header.
  const std::uint64_t minBytes = nv * 48 + nt * 48 + nf * 32 + nd * 24 + nn * 8 + ns * 24;
  if (nv > r.remaining() || nt > r.remaining() || minBytes > r.remaining())
    throw Error(ErrorCode::MalformedBuffer, "header counts exceed buffer");

  auto& m = sub.mesh;
  m.vertices.resize(nv);
  for (auto& v : m.vertices) {
    double x = r.f64(), y = r.f64(), z = r.f64();
    v.pos = Vec3(x, y, z);
    v.gid.owner = r.i64();
    v.gid.local = r.i64();
    v.flags = static_cast<std::uint8_t>(r.u64());
  }
  m.tets.resize(nt);
  for (auto& t : m.tets) {
    for (int& v : t.v) {
      auto i = r.i64();
      check_index(i, nv);
      v = static_cast<int>(i);
    }
    t.flags = static_cast<std::uint8_t>(r.u64());
    t.lockWord = r.u64();
  }
  m.facets.resize(nf);
  for (auto& f : m.facets) {
    for (int& v : f.v) {
      auto i = r.i64();
      check_index(i, nv);
      v = static_cast<int>(i);
    }
    f.tag = static_cast<int>(r.i64());
  }
  for (std::size_t i = 0; i < nd; ++i) {
    GlobalId g{r.i64(), r.i64()};
    auto idx = r.i64();
    check_index(idx, nv);
    sub.duplicates.emplace(g, static_cast<int>(idx));
  }
  for (std::size_t i = 0; i < nn; ++i) sub.neighbors.insert(static_cast<int>(r.i64()));
  for (std::size_t i = 0; i < ns; ++i) {
    GlobalId g{r.i64(), r.i64()};
    auto k = r.count(8);
    std::vector<int> others(k);
    for (int& s : others) s = static_cast<int>(r.i64());
    sub.sharers.emplace(g, std::move(others));
  }
  if (!r.done()) throw Error(ErrorCode::MalformedBuffer, "trailing bytes");
  return sub;
}

bool structurally_equal(const Subdomain& a, const Subdomain& b) {
  if (a.id != b.id || a.nextLocalId != b.nextLocalId || !(a.state == b.state) ||
      a.miiPassCount != b.miiPassCount || a.duplicates != b.duplicates ||
      a.neighbors != b.neighbors || a.sharers != b.sharers)
    return false;
  const auto &ma = a.mesh, &mb = b.mesh;
  if (ma.vertices.size() != mb.vertices.size() || ma.tets.size() != mb.tets.size() ||
      ma.facets.size() != mb.facets.size())
    return false;
  for (std::size_t i = 0; i < ma.vertices.size(); ++i) {
    const auto &x = ma.vertices[i], &y = mb.vertices[i];
    if (x.pos != y.pos || x.gid != y.gid || x.flags != y.flags) return false;
  }
  for (std::size_t i = 0; i < ma.tets.size(); ++i) {
    const auto &x = ma.tets[i], &y = mb.tets[i];
    if (x.v != y.v || x.flags != y.flags || x.lockWord != y.lockWord) return false;
  }
  for (std::size_t i = 0; i < ma.facets.size(); ++i)
    if (ma.facets[i].v != mb.facets[i].v || ma.facets[i].tag != mb.facets[i].tag) return false;
  return true;
}

Bytes pack(const Shipment& s) {
  ByteWriter w;
  w.u64(kShipmentMagic);
  w.u64(kFormatVersion);
  w.i64(s.sender);
  w.i64(s.receiver);
  w.u64(s.vertices.size());
  w.u64(s.tets.size());
  w.u64(s.facets.size());
  for (const auto& v : s.vertices) {
    w.i64(v.gid.owner);
    w.i64(v.gid.local);
    w.f64(v.pos.x());
    w.f64(v.pos.y());
    w.f64(v.pos.z());
    w.u64(v.flags);
    w.u64(v.holders.size());
    for (int h : v.holders) w.i64(h);
  }
  for (const auto& t : s.tets)
    for (int v : t) w.i64(v);
  for (const auto& f : s.facets) {
    for (int v : f.v) w.i64(v);
    w.i64(f.tag);
  }
  return w.take();
}

Shipment unpack_shipment(std::span<const std::uint8_t> buffer) {
  ByteReader r(buffer);
  check_magic(r, kShipmentMagic);
  Shipment s;
  s.sender = static_cast<int>(r.i64());
  s.receiver = static_cast<int>(r.i64());
  auto nv = r.count(0), nt = r.count(0), nf = r.count(0);
  if (nv * 56 + nt * 32 + nf * 32 > r.remaining() || nv > r.remaining() || nt > r.remaining())
    throw Error(ErrorCode::MalformedBuffer, "header counts exceed buffer");
  s.vertices.resize(nv);
  for (auto& v : s.vertices) {
    v.gid.owner = r.i64();
    v.gid.local = r.i64();
    double x = r.f64(), y = r.f64(), z = r.f64();
    v.pos = Vec3(x, y, z);
    v.flags = static_cast<std::uint8_t>(r.u64());
    v.holders.resize(r.count(8));
    for (int& h : v.holders) h = static_cast<int>(r.i64());
  }
  s.tets.resize(nt);
  for (auto& t : s.tets)
    for (int& v : t) {
      auto i = r.i64();
      check_index(i, nv);
      v = static_cast<int>(i);
    }
  s.facets.resize(nf);
  for (auto& f : s.facets) {
    for (int& v : f.v) {
      auto i = r.i64();
      check_index(i, nv);
      v = static_cast<int>(i);
    }
    f.tag = static_cast<int>(r.i64());
  }
  if (!r.done()) throw Error(ErrorCode::MalformedBuffer, "trailing bytes");
  return s;
}

}  // namespace tetshift
