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

#include "tetshift/kernel/adapt.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>
#include <random>
#include <set>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "tetshift/adjacency.hpp"
#include "tetshift/conformity.hpp"
#include "tetshift/error.hpp"
#include "tetshift/kernel/work_mesh.hpp"

namespace tetshift::kernel {

void AdaptConfig::validate() const {
  if (!(splitThreshold > 1.0 && collapseThreshold < 1.0 && collapseThreshold > 0.0))
    throw Error(ErrorCode::InvalidArgument, "need splitThreshold > 1 > collapseThreshold > 0");
  if (passBudget < 0 || bufferLayers < 0)
    throw Error(ErrorCode::InvalidArgument, "pass budget and buffer layers must be >= 0");
}

OpParams AdaptConfig::op_params() const {
  OpParams p;
  p.splitThreshold = splitThreshold;
  p.collapseThreshold = collapseThreshold;
  p.qualityFloor = qualityFloor;
  p.smoothRelax = smoothRelax;
  p.collapseMinQuality = collapseMinQuality;
  p.collapseEdgeCap = phase == Phase::InitialInterior ? std::max(collapseEdgeCap, splitThreshold)
                                                      : splitThreshold;
  p.interpolation = interpolation;
  return p;
}

const char* to_string(AdaptConfig::Phase phase) {
  switch (phase) {
    case AdaptConfig::Phase::InitialInterior: return "initial-interior";
    case AdaptConfig::Phase::MII: return "mii";
    case AdaptConfig::Phase::FinalCollapse: return "final-collapse";
    case AdaptConfig::Phase::QualityImprovement: return "quality-improvement";
  }
  return "?";
}

OpCounters TaskOutcome::total() const {
  OpCounters t;
  for (const auto& o : ops) t += o;
  return t;
}

TaskOutcome& TaskOutcome::operator+=(const TaskOutcome& o) {
  for (int k = 0; k < kOpKinds; ++k) ops[k] += o.ops[k];
  sweeps += o.sweeps;
  stalled = stalled || o.stalled;
  stalls.insert(stalls.end(), o.stalls.begin(), o.stalls.end());
  newVertices += o.newVertices;
  log.insert(log.end(), o.log.begin(), o.log.end());
  return *this;
}

namespace {

struct Task {
  int a = -1, b = -1, hint = -1;
  double key = 0;
};

class Engine {
 public:
  Engine(WorkMesh& wm, const AdaptConfig& cfg, int threads, TaskOutcome& out)
      : wm_(wm), cfg_(cfg), params_(cfg.op_params()), threads_(std::max(threads, 1)), out_(out),
        rng_(cfg.seed) {}

  // One sweep of one operator kind; returns commits.
  std::int64_t sweep(OpKind kind) {
    wm_.compact();
    wm_.mark_buffer(cfg_.bufferLayers);
    auto tasks = make_tasks(kind);
    if (tasks.empty()) return 0;
    CommitLog log;
    std::int64_t committed = 0;
    std::vector<Task> pending = std::move(tasks);
    for (int round = 0; round < 4 && !pending.empty(); ++round) {
      std::vector<std::vector<Task>> retry(threads_);
      std::vector<OpCounters> counters(threads_);
      std::atomic<std::size_t> next{0};
      auto work = [&](int owner) {
        Operators ops(wm_, params_, owner, stamp_, cfg_.recordLog ? &log : nullptr);
        for (std::size_t i; (i = next.fetch_add(1)) < pending.size();) {
          OpStatus st = run(ops, kind, pending[i]);
          auto& c = counters[owner];
          ++c.attempted;
          switch (st) {
            case OpStatus::Committed: ++c.committed; break;
            case OpStatus::LockFailed:
              ++c.rolledBack;
              retry[owner].push_back(pending[i]);
              break;
            case OpStatus::Blocked: ++c.rolledBack; break;
            case OpStatus::Rejected: ++c.rejected; break;
          }
        }
      };
      if (threads_ == 1) {
        work(0);
      } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < threads_; ++w) pool.emplace_back(work, w);
        for (auto& t : pool) t.join();
      }
      pending.clear();
      for (int w = 0; w < threads_; ++w) {
        out_.ops[static_cast<int>(kind)] += counters[w];
        committed += counters[w].committed;
        pending.insert(pending.end(), retry[w].begin(), retry[w].end());
      }
      std::shuffle(pending.begin(), pending.end(), rng_);
    }
    if (cfg_.recordLog) {
      for (auto& r : log.records) r.sweep = out_.sweeps;
      out_.log.insert(out_.log.end(), log.records.begin(), log.records.end());
    }
    if (committed == 0 && (kind == OpKind::Split || kind == OpKind::Collapse)) {
      out_.stalled = true;
      out_.stalls.push_back(std::string(to_string(cfg_.phase)) + " sweep " +
                            std::to_string(out_.sweeps) + ": " + to_string(kind) +
                            " committed nothing");
    }
    ++out_.sweeps;
    return committed;
  }

 private:
  OpStatus run(Operators& ops, OpKind kind, const Task& t) {
    switch (kind) {
      case OpKind::Split: return ops.split(t.a, t.b, t.hint);
      case OpKind::Collapse: {
        OpStatus st = ops.collapse(t.a, t.b);
        if (st == OpStatus::Rejected || st == OpStatus::Blocked) st = ops.collapse(t.b, t.a);
        return st;
      }
      case OpKind::Swap32: return ops.swap32(t.a, t.b, t.hint);
      case OpKind::Swap23: return ops.swap23(t.a, t.b);
      case OpKind::Smooth: return ops.smooth(t.a);
    }
    return OpStatus::Rejected;
  }

  // Per-tet view used to pick targets; computed single-threaded.
  struct Survey {
    std::vector<double> q;
    std::vector<char> good;
    std::vector<char> blocked;  // frozen or buffer
  };

  Survey survey(const Operators& ops) {
    Survey s;
    const std::size_t nt = wm_.tets.size();
    s.q.resize(nt);
    s.good.resize(nt);
    s.blocked.resize(nt);
    for (std::size_t t = 0; t < nt; ++t) {
      const auto& r = wm_.tets[t];
      s.q[t] = ops.quality(r.v);
      s.blocked[t] = wm_.frozen(static_cast<int>(t)) || r.buffer;
      bool good = s.q[t] >= cfg_.qualityFloor;
      for (int e = 0; e < 6 && good; ++e) {
        double l = edge_len(r.v[kTetEdge[e][0]], r.v[kTetEdge[e][1]]);
        good = l >= 1.0 / std::sqrt(2.0) && l <= std::sqrt(2.0);
      }
      s.good[t] = good;
    }
    return s;
  }

  double edge_len(int a, int b) {
    EdgeKey k(a, b);
    auto it = lengthCache_.find(k);
    if (it != lengthCache_.end()) return it->second;
    const auto &ra = wm_.verts[a], &rb = wm_.verts[b];
    double l = metric_edge_length(ra.pos, rb.pos, ra.metric, rb.metric);
    lengthCache_.emplace(k, l);
    return l;
  }

  std::vector<Task> make_tasks(OpKind kind) {
    lengthCache_.clear();
    Operators probe(wm_, params_, 0, stamp_);
    Survey s = survey(probe);
    const bool skip = cfg_.skipAdapted && cfg_.phase == AdaptConfig::Phase::MII;
    const std::size_t nt = wm_.tets.size();
    std::vector<Task> tasks;

    if (kind == OpKind::Split || kind == OpKind::Collapse || kind == OpKind::Swap32) {
      struct EdgeInfo {
        int hint;
        bool blocked, frozen, lowQ;
      };
      std::unordered_map<EdgeKey, EdgeInfo, PairKeyHash<int>> edges;
      for (std::size_t t = 0; t < nt; ++t) {
        const auto& v = wm_.tets[t].v;
        for (const auto& e : kTetEdge) {
          auto [it, fresh] = edges.try_emplace(EdgeKey(v[e[0]], v[e[1]]),
                                               EdgeInfo{static_cast<int>(t), false, false, false});
          it->second.blocked |= s.blocked[t] != 0;
          it->second.frozen |= wm_.frozen(static_cast<int>(t));
          it->second.lowQ |= !wm_.frozen(static_cast<int>(t)) && s.q[t] < cfg_.qualityFloor;
        }
      }
      for (const auto& [k, info] : edges) {
        double l = edge_len(k.v[0], k.v[1]);
        if (kind == OpKind::Split && l > cfg_.splitThreshold && !info.blocked)
          tasks.push_back({k.v[0], k.v[1], info.hint, -l});
        else if (kind == OpKind::Collapse && l < cfg_.collapseThreshold)
          tasks.push_back({k.v[0], k.v[1], info.hint, l});
        else if (kind == OpKind::Swap32 && info.lowQ && !info.frozen)
          tasks.push_back({k.v[0], k.v[1], info.hint, 0});
      }
      std::sort(tasks.begin(), tasks.end(), [](const Task& x, const Task& y) {
        if (x.key != y.key) return x.key < y.key;
        return std::tie(x.a, x.b) < std::tie(y.a, y.b);
      });
    } else if (kind == OpKind::Swap23) {
      for (std::size_t t = 0; t < nt; ++t) {
        if (wm_.frozen(static_cast<int>(t)) || s.q[t] >= cfg_.qualityFloor) continue;
        for (int f = 0; f < 4; ++f) {
          int n = wm_.tets[t].nbr[f];
          if (n < 0 || wm_.frozen(n)) continue;
          // Each face once: from the worse side, or the lower id on ties.
          if (s.q[n] < cfg_.qualityFloor &&
              (s.q[n] < s.q[t] || (s.q[n] == s.q[t] && n < static_cast<int>(t))))
            continue;
          tasks.push_back({static_cast<int>(t), f, -1, s.q[t]});
        }
      }
      std::stable_sort(tasks.begin(), tasks.end(),
                       [](const Task& x, const Task& y) { return x.key < y.key; });
    } else {
      std::vector<char> want(wm_.verts.size(), skip ? 0 : 1);
      if (skip)
        for (std::size_t t = 0; t < nt; ++t)
          if (!s.good[t])
            for (int v : wm_.tets[t].v) want[v] = 1;
      for (std::size_t t = 0; t < nt; ++t)
        if (wm_.frozen(static_cast<int>(t)))
          for (int v : wm_.tets[t].v) want[v] = 0;
      for (std::size_t v = 0; v < wm_.verts.size(); ++v) {
        const auto& r = wm_.verts[v];
        if (want[v] && !r.dead && !(r.flags & (vflag::kBoundary | vflag::kInterface)))
          tasks.push_back({static_cast<int>(v), -1, -1, 0});
      }
    }
    if (skip && kind != OpKind::Smooth) {
      // Targets living only in already-good tets are left alone.
      std::erase_if(tasks, [&](const Task& t) {
        int tet = kind == OpKind::Swap23 ? t.a : t.hint;
        return tet >= 0 && s.good[tet] && kind != OpKind::Split;
      });
    }
    return tasks;
  }

  WorkMesh& wm_;
  const AdaptConfig& cfg_;
  OpParams params_;
  int threads_;
  TaskOutcome& out_;
  std::mt19937_64 rng_;
  std::atomic<std::uint64_t> stamp_{0};
  std::unordered_map<EdgeKey, double, PairKeyHash<int>> lengthCache_;
};

std::vector<OpKind> pass_ops(AdaptConfig::Phase phase) {
  using P = AdaptConfig::Phase;
  switch (phase) {
    case P::InitialInterior:
      return {OpKind::Collapse, OpKind::Split, OpKind::Swap32, OpKind::Swap23, OpKind::Smooth};
    case P::MII: return {OpKind::Split, OpKind::Swap32, OpKind::Swap23, OpKind::Smooth};
    case P::FinalCollapse: return {OpKind::Collapse};
    case P::QualityImprovement: return {OpKind::Swap32, OpKind::Swap23, OpKind::Smooth};
  }
  return {};
}

}  // namespace

TaskOutcome adapt(Subdomain& sub, const MetricField& field, const AdaptConfig& cfg, int threads) {
  cfg.validate();
  TaskOutcome out;
  bool anyFree = false;
  for (const auto& t : sub.mesh.tets) anyFree = anyFree || !t.frozen();
  if (!anyFree || cfg.passBudget == 0) return out;

  std::vector<MetricTensor> vm;
  WorkMesh::MetricFn fn;
  if (field.is_analytic()) {
    vm = sample_vertices(sub.mesh, field);
    fn = [field](const Vec3& x) { return field.eval(x); };
  } else {
    field.check_aligned(sub.mesh);
    vm = field.tensors();
    auto bg = background_metric(sub.mesh, vm, cfg.interpolation);
    fn = [bg](const Vec3& x) { return bg.eval(x); };
  }
  WorkMesh wm(sub.mesh, std::move(vm), std::move(fn));
  Engine engine(wm, cfg, threads, out);
  const auto ops = pass_ops(cfg.phase);
  for (int pass = 0; pass < cfg.passBudget; ++pass) {
    std::int64_t topo = 0;
    for (OpKind k : ops) {
      std::int64_t c = engine.sweep(k);
      if (k != OpKind::Smooth) topo += c;
    }
    if (topo == 0) break;
  }
  wm.compact();

  TetMesh mesh = wm.to_mesh();
  for (auto& v : mesh.vertices) {
    if (v.gid.valid()) continue;
    v.gid = GlobalId{sub.id, sub.nextLocalId++};
    ++out.newVertices;
  }
  sub.mesh = std::move(mesh);
  sub.rebuild_duplicates();
  return out;
}

std::uint64_t frozen_geometry_hash(const TetMesh& mesh) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& t : mesh.tets) {
    if (!t.frozen()) continue;
    for (int v : t.v) {
      const auto& x = mesh.vertices[v];
      mix(&x.gid.owner, sizeof x.gid.owner);
      mix(&x.gid.local, sizeof x.gid.local);
      double c[3] = {x.pos.x(), x.pos.y(), x.pos.z()};
      mix(c, sizeof c);
    }
  }
  return h;
}

}  // namespace tetshift::kernel
