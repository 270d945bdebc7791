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

#include "tetshift/kernel/operators.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>

#include "tetshift/adjacency.hpp"
#include "tetshift/conformity.hpp"

namespace tetshift::kernel {

const char* to_string(OpKind kind) {
  switch (kind) {
    case OpKind::Collapse: return "collapse";
    case OpKind::Split: return "split";
    case OpKind::Swap23: return "swap23";
    case OpKind::Swap32: return "swap32";
    case OpKind::Smooth: return "smooth";
  }
  return "?";
}

namespace {

constexpr double kVolumeRel = 1e-10;
constexpr double kConserveRel = 1e-9;
constexpr int kMaxRing = 7;

int slot_of(const TetRec& r, int v) {
  for (int j = 0; j < 4; ++j)
    if (r.v[j] == v) return j;
  return -1;
}

FaceKey face_of(const std::array<int, 4>& v, int f) {
  return FaceKey(v[kTetFace[f][0]], v[kTetFace[f][1]], v[kTetFace[f][2]]);
}

}  // namespace

// Locks taken by one operator call; all released on scope exit.
class Operators::Held {
 public:
  Held(WorkMesh& wm, int owner) : wm_(wm), owner_(owner) {}
  Held(const Held&) = delete;
  Held& operator=(const Held&) = delete;
  ~Held() {
    for (int t : ids_) wm_.locks.unlock(t);
  }

  // Cavity locks refuse frozen tets, even ones already held for reading.
  Take take(int t, bool cavity) {
    if (cavity && wm_.frozen(t)) return Take::Frozen;
    if (wm_.locks.held_by(t, owner_)) return Take::Ok;
    if (!wm_.locks.try_lock(t, owner_)) return Take::Busy;
    ids_.push_back(t);
    return Take::Ok;
  }
  void release(int t) {
    auto it = std::find(ids_.begin(), ids_.end(), t);
    if (it == ids_.end()) return;
    wm_.locks.unlock(t);
    ids_.erase(it);
  }
  void adopt(int t) {
    wm_.locks.try_lock(t, owner_);
    ids_.push_back(t);
  }

 private:
  WorkMesh& wm_;
  int owner_;
  std::vector<int> ids_;
};

static OpStatus status_of(int take) {
  return take == 1 ? OpStatus::LockFailed : OpStatus::Blocked;
}

double Operators::edge_length(int a, int b) const {
  const auto &ra = wm_.verts[a], &rb = wm_.verts[b];
  return metric_edge_length(ra.pos, rb.pos, ra.metric, rb.metric);
}

double Operators::q_of(const std::array<Vec3, 4>& p, const std::array<MetricTensor, 4>& m) const {
  static const std::array<double, 4> kQuarter = {0.25, 0.25, 0.25, 0.25};
  return mean_ratio_signed(p, interpolate(m, kQuarter, p_.interpolation));
}

double Operators::quality(const std::array<int, 4>& v) const {
  std::array<Vec3, 4> p;
  std::array<MetricTensor, 4> m;
  for (int j = 0; j < 4; ++j) {
    p[j] = wm_.verts[v[j]].pos;
    m[j] = wm_.verts[v[j]].metric;
  }
  return q_of(p, m);
}

bool Operators::volume_ok(const std::array<Vec3, 4>& p) {
  double l = 0;
  for (const auto& e : kTetEdge) l = std::max(l, (p[e[1]] - p[e[0]]).squaredNorm());
  return signed_volume(p[0], p[1], p[2], p[3]) > kVolumeRel * l * std::sqrt(l);
}

OpStatus Operators::vertex_start(Held& h, int v, bool cavity, int& out) {
  for (int attempt = 0; attempt < 3; ++attempt) {
    int t = wm_.verts[v].hint.load(std::memory_order_acquire);
    if (t < 0) return OpStatus::Rejected;
    Take k = h.take(t, cavity);
    if (k != Take::Ok) return status_of(static_cast<int>(k));
    if (!wm_.tets[t].dead && slot_of(wm_.tets[t], v) >= 0) {
      out = t;
      return OpStatus::Committed;
    }
    h.release(t);
  }
  return OpStatus::Rejected;
}

OpStatus Operators::ball(Held& h, int v, int start, bool cavity, std::vector<int>& out,
                         bool& open) {
  out.assign(1, start);
  open = false;
  std::set<int> seen{start};
  for (std::size_t i = 0; i < out.size(); ++i) {
    const TetRec& r = wm_.tets[out[i]];
    for (int f = 0; f < 4; ++f) {
      if (r.v[f] == v) continue;  // face opposite v does not contain v
      int n = r.nbr[f];
      if (n < 0) {
        open = true;
        continue;
      }
      if (!seen.insert(n).second) continue;
      Take k = h.take(n, cavity);
      if (k != Take::Ok) return status_of(static_cast<int>(k));
      out.push_back(n);
    }
  }
  return OpStatus::Committed;
}

OpStatus Operators::edge_start(Held& h, int a, int b, int hint, int& out) {
  if (hint >= 0) {
    Take k = h.take(hint, false);
    if (k != Take::Ok) return status_of(static_cast<int>(k));
    const TetRec& r = wm_.tets[hint];
    if (!r.dead && slot_of(r, a) >= 0 && slot_of(r, b) >= 0) {
      out = hint;
      return OpStatus::Committed;
    }
  }
  if (wm_.verts[a].dead || wm_.verts[b].dead) return OpStatus::Rejected;
  int s = -1;
  if (auto st = vertex_start(h, a, false, s); st != OpStatus::Committed) return st;
  std::vector<int> around;
  bool open = false;
  if (auto st = ball(h, a, s, false, around, open); st != OpStatus::Committed) return st;
  for (int t : around)
    if (slot_of(wm_.tets[t], b) >= 0) {
      out = t;
      return OpStatus::Committed;
    }
  return OpStatus::Rejected;
}

OpStatus Operators::shell(Held& h, int a, int b, int start, std::vector<int>& out, bool& open) {
  Take k0 = h.take(start, true);
  if (k0 != Take::Ok) return status_of(static_cast<int>(k0));
  out.assign(1, start);
  open = false;
  std::set<int> seen{start};
  for (std::size_t i = 0; i < out.size(); ++i) {
    const TetRec& r = wm_.tets[out[i]];
    for (int f = 0; f < 4; ++f) {
      if (r.v[f] == a || r.v[f] == b) continue;  // faces holding both a and b
      int n = r.nbr[f];
      if (n < 0) {
        open = true;
        continue;
      }
      if (!seen.insert(n).second) continue;
      Take k = h.take(n, true);
      if (k != Take::Ok) return status_of(static_cast<int>(k));
      out.push_back(n);
    }
  }
  return OpStatus::Committed;
}

OpStatus Operators::commit(Held& h, OpKind kind, const std::vector<int>& cavity,
                           const std::vector<std::array<int, 4>>& fresh, const SplitInfo& split) {
  struct Ext {
    int tet;  // neighbor outside the cavity, -1 for none
    int tag;
    int uses = 0;
    bool parent = false;  // split boundary face, consumed by two halves
  };
  std::set<int> inCavity(cavity.begin(), cavity.end());
  std::map<FaceKey, Ext> ext;
  for (int t : cavity) {
    const TetRec& r = wm_.tets[t];
    for (int f = 0; f < 4; ++f) {
      int n = r.nbr[f];
      if (n >= 0 && inCavity.count(n)) continue;
      ext[face_of(r.v, f)] = Ext{n, r.tag[f]};
    }
  }
  for (const auto& [key, e] : ext) {
    if (e.tet < 0) continue;
    Take k = h.take(e.tet, false);
    if (k != Take::Ok) return status_of(static_cast<int>(k));
  }

  // Resolve every face of every new tet before touching shared state.
  struct Link {
    int kind;  // 0 internal, 1 external
    int other;  // internal: new-tet index * 4 + face
    std::map<FaceKey, Ext>::iterator ext;
  };
  std::vector<std::array<Link, 4>> links(fresh.size());
  std::map<FaceKey, int> open;
  for (std::size_t i = 0; i < fresh.size(); ++i) {
    for (int f = 0; f < 4; ++f) {
      FaceKey key = face_of(fresh[i], f);
      auto it = ext.find(key);
      if (it == ext.end() && split.m >= 0 &&
          std::find(key.v.begin(), key.v.end(), split.m) != key.v.end()) {
        for (int sub : {split.a, split.b}) {
          std::array<int, 3> w = key.v;
          for (int& x : w)
            if (x == split.m) x = sub;
          auto pit = ext.find(FaceKey(w[0], w[1], w[2]));
          if (pit != ext.end() && pit->second.tet < 0 &&
              std::find(w.begin(), w.end(), split.a) != w.end() &&
              std::find(w.begin(), w.end(), split.b) != w.end()) {
            pit->second.parent = true;
            it = pit;
            break;
          }
        }
      }
      if (it != ext.end()) {
        ++it->second.uses;
        links[i][f] = Link{1, -1, it};
        continue;
      }
      auto [oit, fresh_] = open.try_emplace(key, static_cast<int>(i * 4 + f));
      if (fresh_) {
        links[i][f] = Link{0, -1, {}};
        continue;
      }
      if (oit->second < 0) return OpStatus::Rejected;  // third use of one face
      int j = oit->second;
      links[i][f] = Link{0, j, {}};
      links[j / 4][j % 4].other = static_cast<int>(i * 4 + f);
      oit->second = -1;
    }
  }
  for (const auto& [key, idx] : open)
    if (idx >= 0) return OpStatus::Rejected;
  for (const auto& [key, e] : ext)
    if (e.uses != (e.parent ? 2 : 1)) return OpStatus::Rejected;

  bool buffer = false;
  for (int t : cavity) buffer = buffer || wm_.tets[t].buffer;
  std::vector<int> ids(fresh.size());
  for (auto& id : ids) {
    id = wm_.new_tet();
    h.adopt(id);
  }
  for (std::size_t i = 0; i < fresh.size(); ++i) {
    TetRec& r = wm_.tets[ids[i]];
    r.v = fresh[i];
    r.flags = 0;
    r.buffer = buffer;
    r.dead = false;
    r.origin = -1;
    for (int f = 0; f < 4; ++f) {
      const Link& l = links[i][f];
      if (l.kind == 0) {
        r.nbr[f] = ids[l.other / 4];
        r.tag[f] = -1;
        continue;
      }
      const Ext& e = l.ext->second;
      r.nbr[f] = e.tet;
      r.tag[f] = e.tet < 0 ? e.tag : -1;
      if (e.tet >= 0) {
        TetRec& n = wm_.tets[e.tet];
        FaceKey key = face_of(fresh[i], f);
        for (int g = 0; g < 4; ++g)
          if (face_of(n.v, g) == key) n.nbr[g] = ids[i];
      }
    }
  }
  for (int t : cavity) wm_.tets[t].dead = true;
  for (int id : ids)
    for (int v : wm_.tets[id].v) wm_.verts[v].hint.store(id, std::memory_order_release);

  std::uint64_t stamp = stamp_.fetch_add(1, std::memory_order_acq_rel);
  if (log_) {
    std::lock_guard lock(log_->mu);
    log_->records.push_back({kind, stamp, 0, cavity, ids});
  }
  return OpStatus::Committed;
}

OpStatus Operators::split(int a, int b, int hint) {
  Held h(wm_, owner_);
  int t0 = -1;
  if (auto st = edge_start(h, a, b, hint, t0); st != OpStatus::Committed) return st;
  std::vector<int> cav;
  bool open = false;
  if (auto st = shell(h, a, b, t0, cav, open); st != OpStatus::Committed) return st;
  for (int t : cav)
    if (wm_.tets[t].buffer) return OpStatus::Blocked;
  if (edge_length(a, b) <= p_.splitThreshold) return OpStatus::Rejected;

  Vec3 mid = 0.5 * (wm_.verts[a].pos + wm_.verts[b].pos);
  std::vector<std::array<int, 4>> fresh;
  int m = wm_.new_vertex();
  VertRec& vm = wm_.verts[m];
  vm.pos = mid;
  vm.metric = wm_.metric_at(mid);
  vm.flags = open ? vflag::kBoundary : 0;
  vm.origin = -1;
  for (int t : cav) {
    std::array<int, 4> lo = wm_.tets[t].v, hi = lo;
    lo[slot_of(wm_.tets[t], b)] = m;
    hi[slot_of(wm_.tets[t], a)] = m;
    fresh.push_back(lo);
    fresh.push_back(hi);
  }
  for (const auto& q : fresh) {
    std::array<Vec3, 4> p;
    for (int j = 0; j < 4; ++j) p[j] = wm_.verts[q[j]].pos;
    if (!volume_ok(p)) {
      vm.dead = true;
      return OpStatus::Rejected;
    }
  }
  auto st = commit(h, OpKind::Split, cav, fresh, SplitInfo{a, b, m});
  if (st != OpStatus::Committed) vm.dead = true;
  return st;
}

OpStatus Operators::collapse(int a, int b) {
  if (a == b) return OpStatus::Rejected;
  {
    const VertRec& ra = wm_.verts[a];
    if (ra.dead || (ra.flags & (vflag::kBoundary | vflag::kInterface))) return OpStatus::Rejected;
  }
  Held h(wm_, owner_);
  int s = -1;
  if (auto st = vertex_start(h, a, true, s); st != OpStatus::Committed) return st;
  std::vector<int> ballA;
  bool openA = false;
  if (auto st = ball(h, a, s, true, ballA, openA); st != OpStatus::Committed) return st;
  if (openA) return OpStatus::Rejected;
  int tb = -1;
  for (int t : ballA)
    if (slot_of(wm_.tets[t], b) >= 0) tb = t;
  if (tb < 0) return OpStatus::Rejected;
  if (edge_length(a, b) >= p_.collapseThreshold) return OpStatus::Rejected;

  // Link condition against b's star, read under non-exclusive locks.
  std::vector<int> ballB;
  bool openB = false;
  if (auto st = ball(h, b, tb, false, ballB, openB); st != OpStatus::Committed) return st;
  std::set<int> linkA, linkB, shellV;
  std::set<EdgeKey> edgesA, edgesB, shellE;
  auto collect = [&](const std::vector<int>& tets, int apex, std::set<int>& vs,
                     std::set<EdgeKey>& es) {
    for (int t : tets) {
      const auto& v = wm_.tets[t].v;
      for (int x : v)
        if (x != apex) vs.insert(x);
      for (const auto& e : kTetEdge)
        if (v[e[0]] != apex && v[e[1]] != apex) es.insert(EdgeKey(v[e[0]], v[e[1]]));
    }
  };
  collect(ballA, a, linkA, edgesA);
  collect(ballB, b, linkB, edgesB);
  std::vector<int> shellT;
  for (int t : ballA) {
    const auto& v = wm_.tets[t].v;
    if (slot_of(wm_.tets[t], b) < 0) continue;
    shellT.push_back(t);
    std::vector<int> rest;
    for (int x : v)
      if (x != a && x != b) {
        shellV.insert(x);
        rest.push_back(x);
      }
    shellE.insert(EdgeKey(rest[0], rest[1]));
  }
  for (int x : linkA)
    if (x != b && linkB.count(x) && !shellV.count(x)) return OpStatus::Rejected;
  for (const auto& e : edgesA) {
    if (e.v[0] == b || e.v[1] == b) continue;
    if (edgesB.count(e) && !shellE.count(e)) return OpStatus::Rejected;
  }

  double oldMin = 1.0;
  for (int t : ballA) oldMin = std::min(oldMin, quality(wm_.tets[t].v));
  std::vector<std::array<int, 4>> fresh;
  double newMin = 1.0;
  for (int t : ballA) {
    if (slot_of(wm_.tets[t], b) >= 0) continue;
    auto q = wm_.tets[t].v;
    q[slot_of(wm_.tets[t], a)] = b;
    std::array<Vec3, 4> p;
    for (int j = 0; j < 4; ++j) p[j] = wm_.verts[q[j]].pos;
    if (!volume_ok(p)) return OpStatus::Rejected;
    newMin = std::min(newMin, quality(q));
    fresh.push_back(q);
  }
  if (newMin < std::min(oldMin, p_.collapseMinQuality)) return OpStatus::Rejected;
  for (int x : linkA) {
    if (x == b || shellV.count(x)) continue;
    if (edge_length(b, x) > p_.collapseEdgeCap) return OpStatus::Rejected;
  }
  auto st = commit(h, OpKind::Collapse, ballA, fresh, {});
  if (st == OpStatus::Committed) wm_.verts[a].dead = true;
  return st;
}

OpStatus Operators::swap32(int a, int b, int hint) {
  Held h(wm_, owner_);
  int t0 = -1;
  if (auto st = edge_start(h, a, b, hint, t0); st != OpStatus::Committed) return st;
  std::vector<int> cav;
  bool open = false;
  if (auto st = shell(h, a, b, t0, cav, open); st != OpStatus::Committed) return st;
  const int n = static_cast<int>(cav.size());
  if (open || n < 3 || n > kMaxRing) return OpStatus::Rejected;

  // Ring vertices in cyclic order: each shell tet contributes one ring edge.
  std::vector<std::array<int, 2>> ringEdges;
  double oldMin = 1.0, oldVol = 0.0;
  for (int t : cav) {
    std::array<int, 2> e{};
    int k = 0;
    for (int x : wm_.tets[t].v)
      if (x != a && x != b) e[k++] = x;
    ringEdges.push_back(e);
    oldMin = std::min(oldMin, quality(wm_.tets[t].v));
    oldVol += wm_.volume(t);
  }
  std::vector<int> ring{ringEdges[0][0], ringEdges[0][1]};
  std::vector<char> usedEdge(n, 0);
  usedEdge[0] = 1;
  while (static_cast<int>(ring.size()) < n) {
    bool found = false;
    for (int i = 0; i < n && !found; ++i) {
      if (usedEdge[i]) continue;
      const auto& e = ringEdges[i];
      int nxt = e[0] == ring.back() ? e[1] : e[1] == ring.back() ? e[0] : -1;
      if (nxt < 0) continue;
      usedEdge[i] = 1;
      ring.push_back(nxt);
      found = true;
    }
    if (!found) return OpStatus::Rejected;
  }

  const Vec3& pa = wm_.verts[a].pos;
  auto P = [&](int i) -> const Vec3& { return wm_.verts[ring[i]].pos; };
  double fan = 0.0;
  for (int i = 1; i + 1 < n; ++i) fan += signed_volume(P(0), P(i), P(i + 1), pa);
  const double sigma = fan > 0 ? 1.0 : -1.0;

  // Pair of tets over ring triangle (i, k, j), oriented positively, or
  // nothing when either would be inverted.
  auto pair_for = [&](int i, int k, int j, std::array<std::array<int, 4>, 2>& out) {
    int ri = ring[i], rk = ring[k], rj = ring[j];
    if (sigma > 0) {
      out[0] = {ri, rk, rj, a};
      out[1] = {rk, ri, rj, b};
    } else {
      out[0] = {rk, ri, rj, a};
      out[1] = {ri, rk, rj, b};
    }
    for (const auto& q : out) {
      std::array<Vec3, 4> p;
      for (int m = 0; m < 4; ++m) p[m] = wm_.verts[q[m]].pos;
      if (!volume_ok(p)) return false;
    }
    // Diagonals of the ring polygon are new edges; keep them splittable-free.
    for (auto [x, y] : {std::pair{i, k}, std::pair{k, j}, std::pair{i, j}}) {
      bool side = y - x == 1 || (x == 0 && y == n - 1);
      if (!side && edge_length(ring[x], ring[y]) > p_.splitThreshold) return false;
    }
    return true;
  };
  // best[i][j]: best worst-quality triangulation of ring[i..j].
  constexpr double kNone = -1.0;
  std::vector<std::vector<double>> best(n, std::vector<double>(n, kNone));
  std::vector<std::vector<int>> pick(n, std::vector<int>(n, -1));
  for (int i = 0; i + 1 < n; ++i) best[i][i + 1] = 2.0;  // empty polygon
  for (int len = 2; len < n; ++len)
    for (int i = 0; i + len < n; ++i) {
      int j = i + len;
      for (int k = i + 1; k < j; ++k) {
        if (best[i][k] < 0 || best[k][j] < 0) continue;
        std::array<std::array<int, 4>, 2> tt;
        if (!pair_for(i, k, j, tt)) continue;
        double sc = std::min({best[i][k], best[k][j], quality(tt[0]), quality(tt[1])});
        if (sc > best[i][j]) {
          best[i][j] = sc;
          pick[i][j] = k;
        }
      }
    }
  if (!(best[0][n - 1] > oldMin)) return OpStatus::Rejected;

  std::vector<std::array<int, 4>> fresh;
  std::vector<std::array<int, 2>> stack{{0, n - 1}};
  while (!stack.empty()) {
    auto [i, j] = stack.back();
    stack.pop_back();
    if (j - i < 2) continue;
    int k = pick[i][j];
    std::array<std::array<int, 4>, 2> tt;
    pair_for(i, k, j, tt);
    fresh.push_back(tt[0]);
    fresh.push_back(tt[1]);
    stack.push_back({i, k});
    stack.push_back({k, j});
  }
  double newVol = 0.0;
  for (const auto& q : fresh)
    newVol += signed_volume(wm_.verts[q[0]].pos, wm_.verts[q[1]].pos, wm_.verts[q[2]].pos,
                            wm_.verts[q[3]].pos);
  if (std::abs(newVol - oldVol) > kConserveRel * oldVol) return OpStatus::Rejected;
  return commit(h, OpKind::Swap32, cav, fresh, {});
}

OpStatus Operators::swap23(int t, int f) {
  Held h(wm_, owner_);
  Take k = h.take(t, true);
  if (k != Take::Ok) return status_of(static_cast<int>(k));
  if (wm_.tets[t].dead) return OpStatus::Rejected;
  int n = wm_.tets[t].nbr[f];
  if (n < 0) return OpStatus::Rejected;
  k = h.take(n, true);
  if (k != Take::Ok) return status_of(static_cast<int>(k));
  const auto& tv = wm_.tets[t].v;
  int a = tv[f];
  std::array<int, 3> face{tv[kTetFace[f][0]], tv[kTetFace[f][1]], tv[kTetFace[f][2]]};
  int b = -1;
  for (int x : wm_.tets[n].v)
    if (std::find(face.begin(), face.end(), x) == face.end()) b = x;
  if (b < 0 || b == a) return OpStatus::Rejected;
  if (edge_length(a, b) > p_.splitThreshold) return OpStatus::Rejected;
  double oldMin = std::min(quality(tv), quality(wm_.tets[n].v));
  double oldVol = wm_.volume(t) + wm_.volume(n);
  std::vector<std::array<int, 4>> fresh;
  double newMin = 1.0, newVol = 0.0;
  for (int e = 0; e < 3; ++e) {
    std::array<int, 4> q{a, b, face[e], face[(e + 1) % 3]};
    std::array<Vec3, 4> p;
    for (int j = 0; j < 4; ++j) p[j] = wm_.verts[q[j]].pos;
    if (signed_volume(p[0], p[1], p[2], p[3]) < 0) {
      std::swap(q[2], q[3]);
      std::swap(p[2], p[3]);
    }
    if (!volume_ok(p)) return OpStatus::Rejected;
    newVol += signed_volume(p[0], p[1], p[2], p[3]);
    newMin = std::min(newMin, quality(q));
    fresh.push_back(q);
  }
  if (std::abs(newVol - oldVol) > kConserveRel * oldVol) return OpStatus::Rejected;
  if (!(newMin > oldMin)) return OpStatus::Rejected;
  return commit(h, OpKind::Swap23, {t, n}, fresh, {});
}

OpStatus Operators::smooth(int v) {
  {
    const VertRec& r = wm_.verts[v];
    if (r.dead || (r.flags & (vflag::kBoundary | vflag::kInterface))) return OpStatus::Rejected;
  }
  Held h(wm_, owner_);
  int s = -1;
  if (auto st = vertex_start(h, v, true, s); st != OpStatus::Committed) return st;
  std::vector<int> cav;
  bool open = false;
  if (auto st = ball(h, v, s, true, cav, open); st != OpStatus::Committed) return st;
  if (open) return OpStatus::Rejected;

  std::set<int> link;
  double oldMin = 1.0;
  for (int t : cav) {
    for (int x : wm_.tets[t].v)
      if (x != v) link.insert(x);
    oldMin = std::min(oldMin, quality(wm_.tets[t].v));
  }
  const Vec3 p0 = wm_.verts[v].pos;
  // Average of the points that would put each link vertex at unit distance.
  Vec3 target = Vec3::Zero();
  for (int w : link) {
    const Vec3& pw = wm_.verts[w].pos;
    target += pw + (p0 - pw) / edge_length(v, w);
  }
  target /= static_cast<double>(link.size());

  for (double omega = p_.smoothRelax; omega > p_.smoothRelax / 16; omega *= 0.5) {
    Vec3 cand = p0 + omega * (target - p0);
    MetricTensor mc = wm_.metric_at(cand);
    double newMin = 1.0;
    bool ok = true;
    for (int t : cav) {
      const auto& q = wm_.tets[t].v;
      std::array<Vec3, 4> p;
      std::array<MetricTensor, 4> m;
      for (int j = 0; j < 4; ++j) {
        p[j] = q[j] == v ? cand : wm_.verts[q[j]].pos;
        m[j] = q[j] == v ? mc : wm_.verts[q[j]].metric;
      }
      if (!volume_ok(p)) {
        ok = false;
        break;
      }
      newMin = std::min(newMin, q_of(p, m));
    }
    if (!ok || newMin < oldMin) continue;
    VertRec& r = wm_.verts[v];
    r.pos = cand;
    r.metric = mc;
    std::uint64_t stamp = stamp_.fetch_add(1, std::memory_order_acq_rel);
    if (log_) {
      std::lock_guard lock(log_->mu);
      log_->records.push_back({OpKind::Smooth, stamp, 0, cav, {}});
    }
    return OpStatus::Committed;
  }
  return OpStatus::Rejected;
}

}  // namespace tetshift::kernel
